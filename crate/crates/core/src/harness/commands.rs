//! Bodies of the CLI subcommands, writing their CSV output to any writer.

use std::io::Write;

use nalgebra::DMatrix;

use super::config::ExperimentConfig;
use super::experiment::Prepared;
use crate::acvf::PairContexts;
use crate::bounds::var_bound_quantities;
use crate::error::Result;
use crate::io::{fmt_f64, write_block_acvf, write_counts};
use crate::latent::{estimate_latent_acvf, estimate_with_specs, DiagMode, LatentEstimate};
use crate::link::link_at_one;
use crate::sparse_var::{lasso_solve, LassoProblem};
use crate::var_model::{simulate, transform_counts};

pub const LINK_TABLE_HEADER: [&str; 7] = ["i", "j", "u", "link", "link_deriv", "link_deriv2", "inverse"];
pub const M3_HEADER: [&str; 9] = [
    "column",
    "family",
    "partial_sum",
    "converged",
    "tail_ratio",
    "tail_root_lhs",
    "tail_root_rhs",
    "variance",
    "link_at_one",
];
pub const CONSTANTS_HEADER: [&str; 3] = ["n", "quantity", "value"];
pub const LASSO_HEADER: [&str; 11] = [
    "lambda_index",
    "lambda",
    "lag",
    "row",
    "col",
    "beta_hat",
    "beta_true",
    "objective",
    "kkt_residual",
    "iterations",
    "converged",
];

/// Simulated counts of the standardized model, with the latent series.
pub fn simulate_counts(cfg: &ExperimentConfig, t_len: usize) -> Result<(DMatrix<u64>, DMatrix<f64>)> {
    let prep = Prepared::new(cfg)?;
    let z = simulate(&prep.model, t_len, cfg.master_seed, None)?;
    let x = transform_counts(&z, &cfg.marginals)?;
    Ok((x, z))
}

pub fn simulate_csv<W: Write>(cfg: &ExperimentConfig, t_len: usize, w: W) -> Result<()> {
    let (x, z) = simulate_counts(cfg, t_len)?;
    write_counts(w, &x, Some(&z))
}

fn estimate_counts(cfg: &ExperimentConfig, x: &DMatrix<u64>, l: usize, diag_mode: DiagMode) -> Result<LatentEstimate> {
    if cfg.fit_marginals {
        let families: Vec<_> = cfg.marginals.iter().map(|m| m.fit_family()).collect();
        estimate_latent_acvf(x, l, &families, diag_mode)
    } else {
        estimate_with_specs(x, l, &cfg.marginals, diag_mode)
    }
}

/// Latent block autocovariance estimated from `x`.
pub fn estimate_csv<W: Write>(cfg: &ExperimentConfig, x: &DMatrix<u64>, w: W) -> Result<()> {
    let est = estimate_counts(cfg, x, cfg.l(), cfg.diag_mode)?;
    write_block_acvf(w, &est.acvf_hat)
}

/// LASSO estimates for every penalty of the configured grid.
pub fn lasso_csv<W: Write>(cfg: &ExperimentConfig, x: &DMatrix<u64>, w: W) -> Result<()> {
    let prep = Prepared::new(cfg)?;
    let (d, p) = (prep.model.d(), prep.model.p());
    let est = estimate_counts(cfg, x, p, DiagMode::ForceOne)?;
    let prob = LassoProblem::from_estimate(&est, 0.0)?;
    let n_obs = x.nrows().saturating_sub(p);
    let opts = cfg.lasso_options();
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(LASSO_HEADER)?;
    for (k, lambda) in cfg.lambda.values(prob.q(), n_obs).into_iter().enumerate() {
        let sol = lasso_solve(&prob.with_lambda(lambda)?, &opts)?;
        for idx in 0..prob.q() {
            // beta = vec(B) with B = [A_1'; ..; A_p'] of size (dp) x d
            let (b_row, a_row) = (idx % (d * p), idx / (d * p));
            let (lag, a_col) = (b_row / d, b_row % d);
            wr.write_record([
                k.to_string(),
                fmt_f64(lambda),
                (lag + 1).to_string(),
                (a_row + 1).to_string(),
                (a_col + 1).to_string(),
                fmt_f64(sol.beta_hat[idx]),
                fmt_f64(prep.beta0[idx]),
                fmt_f64(sol.objective),
                fmt_f64(sol.kkt_residual),
                sol.iterations.to_string(),
                sol.converged.to_string(),
            ])?;
        }
    }
    wr.flush()?;
    Ok(())
}

/// Link function, derivatives and inverse for every pair `i <= j` on a
/// uniform grid over `[-u_max, u_max]`.
pub fn link_table_csv<W: Write>(cfg: &ExperimentConfig, points: usize, u_max: f64, w: W) -> Result<()> {
    let ctx = PairContexts::new(&cfg.marginals)?;
    let d = ctx.d();
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(LINK_TABLE_HEADER)?;
    let points = points.max(2);
    for i in 0..d {
        for j in i..d {
            let c = ctx.get(i, j);
            for k in 0..points {
                let u = -u_max + 2.0 * u_max * k as f64 / (points - 1) as f64;
                let l = c.link_eval(u)?;
                let inv = if c.is_diagonal() {
                    c.link_invert_on(l, -1.0, 1.0).unwrap_or(f64::NAN)
                } else {
                    c.link_invert(l)
                };
                wr.write_record([
                    (i + 1).to_string(),
                    (j + 1).to_string(),
                    fmt_f64(u),
                    fmt_f64(l),
                    fmt_f64(c.link_deriv(u)?),
                    fmt_f64(c.link_deriv2(u).unwrap_or(f64::NAN)),
                    fmt_f64(inv),
                ])?;
            }
        }
    }
    wr.flush()?;
    Ok(())
}

/// Moment-condition series and tail identities per marginal.
pub fn m3_check_csv<W: Write>(cfg: &ExperimentConfig, n_cap: usize, w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(M3_HEADER)?;
    for (i, spec) in cfg.marginals.iter().enumerate() {
        let m3 = spec.m3_series(n_cap)?;
        let (lhs, rhs) = spec.tail_root_inequality()?;
        wr.write_record([
            (i + 1).to_string(),
            spec.name().to_string(),
            fmt_f64(m3.partial_sum),
            m3.converged.to_string(),
            fmt_f64(m3.tail_ratio),
            fmt_f64(lhs),
            fmt_f64(rhs),
            fmt_f64(spec.variance()?),
            fmt_f64(link_at_one(spec)?),
        ])?;
    }
    wr.flush()?;
    Ok(())
}

/// Concentration constants at the true latent autocovariance, then the
/// LASSO quantities for every `N` of the grid.
pub fn constants_csv<W: Write>(cfg: &ExperimentConfig, w: W) -> Result<()> {
    let mut cfg = cfg.clone();
    cfg.constants = true;
    let prep = Prepared::new(&cfg)?;
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(CONSTANTS_HEADER)?;
    let q_const = match &prep.constants {
        Some(c) => {
            for (name, v) in named_values(c)? {
                wr.write_record([String::new(), name, v])?;
            }
            c.q_const
        }
        None => {
            wr.write_record([String::new(), "q_const".to_string(), fmt_f64(f64::NAN)])?;
            f64::NAN
        }
    };
    for &n in &cfg.n_grid {
        let v = var_bound_quantities(&prep.model, cfg.s, q_const, n)?;
        for (name, val) in named_values(&v)? {
            wr.write_record([n.to_string(), name, val])?;
        }
    }
    wr.flush()?;
    Ok(())
}

/// Flattens a serializable struct into `(field, value)` pairs.
fn named_values<T: serde::Serialize>(v: &T) -> Result<Vec<(String, String)>> {
    let json = serde_json::to_value(v)?;
    let obj = json.as_object().cloned().unwrap_or_default();
    Ok(obj
        .into_iter()
        .map(|(k, v)| {
            let s = match v {
                serde_json::Value::Number(n) if n.is_f64() => fmt_f64(n.as_f64().unwrap_or(f64::NAN)),
                serde_json::Value::Null => fmt_f64(f64::NAN),
                other => other.to_string(),
            };
            (k, s)
        })
        .collect())
}
