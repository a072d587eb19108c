//! Link function of a Bernoulli(1/2) pair against its closed form
//! `arcsin(u) / 2pi`, plus a Poisson/Binomial pair and its inverse.

use latent_count::link::{hermite_coeffs, hermite_link_series, link_at_one, LinkContext};
use latent_count::marginals::MarginalSpec;

fn main() -> latent_count::Result<()> {
    let b = MarginalSpec::bernoulli(0.5)?;
    let ctx = LinkContext::new(b.clone(), b.clone())?;
    println!("{:>6} {:>14} {:>14}", "u", "link", "arcsin/2pi");
    for u in [-0.9, -0.5, 0.0, 0.5, 0.9, 0.999] {
        let exact = f64::asin(u) / (2.0 * std::f64::consts::PI);
        println!("{u:>6} {:>14.10} {:>14.10}", ctx.link_eval(u)?, exact);
    }

    let pois = MarginalSpec::poisson(2.0)?;
    let binom = MarginalSpec::binomial(4, 0.4)?;
    let pair = LinkContext::new(pois.clone(), binom.clone())?;
    let (lo, hi) = pair.range();
    println!("\npoisson(2) x binomial(4, 0.4): range [{lo:.6}, {hi:.6}]");
    let ci = hermite_coeffs(pair.table_i(), 40)?;
    let cj = hermite_coeffs(pair.table_j(), 40)?;
    for u in [-0.6, 0.3, 0.8] {
        let x = pair.link_eval(u)?;
        println!(
            "u = {u:>5}: link {x:.10}, hermite series {:.10}, inverse {:.10}",
            hermite_link_series(&ci, &cj, u),
            pair.link_invert(x)
        );
    }
    // values beyond the range clamp to the boundary
    println!("inverse of {:.4} clamps to {}", hi + 0.1, pair.link_invert(hi + 0.1));
    println!(
        "link_ii(1) = var: poisson {:.10}, binomial {:.10}",
        link_at_one(&pois)?,
        link_at_one(&binom)?
    );
    Ok(())
}
