//! Fit a sparse VAR(1) to Bernoulli counts over a penalty path.

use latent_count::marginals::MarginalSpec;
use latent_count::sparse_var::{
    beta_from_coeffs, build_problem, default_lambda_grid, lasso_solve, support_metrics, LassoOptions,
};
use latent_count::var_model::{simulate, standardize, transform_counts, VarModel};
use nalgebra::DMatrix;

fn main() -> latent_count::Result<()> {
    let d = 6;
    let mut a = DMatrix::zeros(d, d);
    for (i, j, v) in [(0, 0, 0.5), (1, 3, -0.4), (2, 2, 0.45), (4, 1, 0.35), (5, 5, -0.4)] {
        a[(i, j)] = v;
    }
    let st = standardize(&VarModel::new(vec![a], DMatrix::identity(d, d))?, 1)?;
    let specs: Vec<_> = (0..d).map(|_| MarginalSpec::bernoulli(0.5)).collect::<Result<_, _>>()?;
    let beta0 = beta_from_coeffs(st.model.coeffs());

    let t = 6000;
    let x = transform_counts(&simulate(&st.model, t, 11, None)?, &specs)?;
    let families: Vec<_> = specs.iter().map(|s| s.fit_family()).collect();
    let prob = build_problem(&x, 1, &families, 0.0)?;

    println!(
        "{:>10} {:>8} {:>8} {:>8} {:>10}",
        "lambda", "support", "f1", "l2 err", "kkt"
    );
    for lambda in default_lambda_grid(prob.q(), t - 1).into_iter().step_by(2) {
        let sol = lasso_solve(&prob.with_lambda(lambda)?, &LassoOptions::default())?;
        let m = support_metrics(&sol.beta_hat, &beta0);
        println!(
            "{lambda:>10.5} {:>8} {:>8.3} {:>8.4} {:>10.2e}",
            m.support_size,
            m.f1,
            (&sol.beta_hat - &beta0).norm(),
            sol.kkt_residual
        );
    }
    Ok(())
}
