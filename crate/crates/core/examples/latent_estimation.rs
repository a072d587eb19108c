//! Recover the latent autocovariance from counts and watch the error shrink with N.

use latent_count::latent::{estimate_latent_acvf, recovery_error, DiagMode};
use latent_count::marginals::MarginalSpec;
use latent_count::var_model::{simulate, standardize, transform_counts, VarModel};
use nalgebra::DMatrix;

fn main() -> latent_count::Result<()> {
    let a = DMatrix::from_row_slice(
        4,
        4,
        &[
            0.4, 0.0, 0.0, 0.3, //
            0.0, 0.5, 0.0, 0.0, //
            0.2, 0.0, -0.3, 0.0, //
            0.0, 0.0, 0.0, 0.4,
        ],
    );
    let st = standardize(&VarModel::new(vec![a], DMatrix::identity(4, 4))?, 1)?;
    let specs = vec![
        MarginalSpec::bernoulli(0.5)?,
        MarginalSpec::poisson(2.0)?,
        MarginalSpec::binomial(3, 0.4)?,
        MarginalSpec::bernoulli(0.4)?,
    ];
    let families: Vec<_> = specs.iter().map(|s| s.fit_family()).collect();

    println!(
        "{:>6} {:>12} {:>12} {:>12} {:>6}",
        "N", "max", "sparse(2)", "frobenius", "clamp"
    );
    for n in [500, 2000, 8000, 32000] {
        let z = simulate(&st.model, n + 1, 3, None)?;
        let x = transform_counts(&z, &specs)?;
        let est = estimate_latent_acvf(&x, 1, &families, DiagMode::EstimateClamped)?;
        let err = recovery_error(&est.acvf_hat, &st.acvf, 2)?;
        println!(
            "{n:>6} {:>12.6} {:>12.6} {:>12.6} {:>6}",
            err.max_norm, err.sparse_norm_err, err.frobenius, est.clamp_hits
        );
    }
    Ok(())
}
