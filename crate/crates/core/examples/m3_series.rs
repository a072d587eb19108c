//! Moment-condition series and tail identities for each family.

use latent_count::link::link_at_one;
use latent_count::marginals::MarginalSpec;

fn main() -> latent_count::Result<()> {
    let specs = vec![
        MarginalSpec::bernoulli(0.3)?,
        MarginalSpec::binomial(6, 0.5)?,
        MarginalSpec::poisson(5.0)?,
        MarginalSpec::neg_binomial(2, 0.2)?,
        MarginalSpec::mixture_poisson(vec![0.3, 0.7], vec![1.0, 4.0])?,
        MarginalSpec::cmp(2.0, 1.5)?,
    ];
    println!(
        "{:<24} {:>12} {:>9} {:>10} {:>10} {:>10}",
        "family", "series", "converged", "tail lhs", "tail rhs", "var"
    );
    for s in &specs {
        let m3 = s.m3_series(500)?;
        let (lhs, rhs) = s.tail_root_inequality()?;
        println!(
            "{:<24} {:>12.6} {:>9} {:>10.5} {:>10.5} {:>10.6}",
            s.name(),
            m3.partial_sum,
            m3.converged,
            lhs,
            rhs,
            link_at_one(s)?
        );
    }
    Ok(())
}
