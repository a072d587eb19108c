//! Concentration constants and LASSO quantities for a small Bernoulli panel.

use latent_count::bounds::{q_of_gamma, var_bound_quantities};
use latent_count::marginals::MarginalSpec;
use latent_count::var_model::{standardize, VarModel};
use nalgebra::DMatrix;

fn main() -> latent_count::Result<()> {
    let a = DMatrix::from_row_slice(2, 2, &[0.3, 0.1, 0.0, 0.2]);
    let st = standardize(&VarModel::new(vec![a], DMatrix::identity(2, 2))?, 1)?;
    let specs = vec![MarginalSpec::bernoulli(0.5)?, MarginalSpec::bernoulli(0.4)?];
    let c_z = st.acvf.c_z();
    println!("c_Z = {c_z:.6}");

    for eps in [1e-4, 1e-3, 1e-2] {
        let k = q_of_gamma(&specs, &st.acvf, 2, c_z, eps, eps, eps, 3)?;
        println!(
            "eps {eps:.0e}: D {:.3e} R {:.3e} S {:.3e} T {:.3e} U {:.3e} Q {:.3e} (c capped: {})",
            k.d_const, k.r_const, k.s_const, k.t_const, k.u_const, k.q_const, k.c_delta_capped
        );
    }
    let k = q_of_gamma(&specs, &st.acvf, 2, c_z, 1e-4, 1e-4, 1e-4, 3)?;
    for n in [1_000, 100_000, 10_000_000] {
        let v = var_bound_quantities(&st.model, 2, k.q_const, n)?;
        println!(
            "N {n:>9}: alpha {:.4} tau {:.3e} lambda threshold {:.3e} c0 spectral {:.4}",
            v.alpha, v.tau, v.lambda_threshold, v.c0_spectral
        );
    }
    Ok(())
}
