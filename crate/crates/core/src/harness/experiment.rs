use std::io::Write;

use nalgebra::DVector;
use rayon::prelude::*;
use serde::Serialize;

use super::config::ExperimentConfig;
use crate::bounds::{q_of_gamma, var_bound_quantities, BoundConstants};
use crate::error::{Error, Result};
use crate::io::fmt_f64;
use crate::latent::{estimate_latent_acvf, estimate_with_specs, recovery_error, DiagMode};
use crate::marginals::{FitFamily, MarginalSpec};
use crate::rng::stream_seed;
use crate::sparse_var::{beta_from_coeffs, deviation_check, lasso_solve, support_metrics, LassoProblem};
use crate::var_model::{simulate, standardize, transform_counts, LatentAcvf, VarModel};

/// Column names of the per-row CSV, in order.
pub const ROW_HEADER: [&str; 25] = [
    "config_hash",
    "n",
    "replicate",
    "seed",
    "lambda_index",
    "lambda",
    "status",
    "clamp_hits",
    "latent_max_norm",
    "latent_sparse_norm",
    "latent_sparse_lower_bound",
    "latent_frobenius",
    "deviation",
    "lasso_l1_error",
    "lasso_l2_error",
    "support_size",
    "precision",
    "recall",
    "f1",
    "kkt_residual",
    "iterations",
    "converged",
    "alpha",
    "lambda_threshold",
    "q_const",
];

/// Column names of the summary CSV.
pub const SUMMARY_HEADER: [&str; 8] = [
    "config_hash",
    "n",
    "lambda_index",
    "metric",
    "median",
    "q25",
    "q75",
    "count",
];

/// Cell-level metrics summarized per `N`.
pub const CELL_METRICS: [&str; 7] = [
    "latent_max_norm",
    "latent_sparse_norm",
    "latent_frobenius",
    "deviation",
    "clamp_hits",
    "best_f1",
    "best_l2_error",
];

/// LASSO metrics summarized per `(N, lambda_index)`.
pub const LAMBDA_METRICS: [&str; 3] = ["lasso_l1_error", "lasso_l2_error", "f1"];

/// One `(N, replicate, lambda)` cell of an experiment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultRow {
    pub n: usize,
    pub replicate: usize,
    pub seed: u64,
    pub lambda_index: Option<usize>,
    pub lambda: f64,
    /// `ok` or the error that stopped the cell.
    pub status: String,
    pub clamp_hits: f64,
    pub latent_max_norm: f64,
    pub latent_sparse_norm: f64,
    pub latent_sparse_lower_bound: bool,
    pub latent_frobenius: f64,
    pub deviation: f64,
    pub lasso_l1_error: f64,
    pub lasso_l2_error: f64,
    pub support_size: Option<usize>,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub kkt_residual: f64,
    pub iterations: Option<usize>,
    pub converged: Option<bool>,
    pub alpha: f64,
    pub lambda_threshold: f64,
    pub q_const: f64,
}

impl ResultRow {
    fn blank(n: usize, replicate: usize, seed: u64) -> Self {
        Self {
            n,
            replicate,
            seed,
            lambda_index: None,
            lambda: f64::NAN,
            status: "ok".into(),
            clamp_hits: f64::NAN,
            latent_max_norm: f64::NAN,
            latent_sparse_norm: f64::NAN,
            latent_sparse_lower_bound: false,
            latent_frobenius: f64::NAN,
            deviation: f64::NAN,
            lasso_l1_error: f64::NAN,
            lasso_l2_error: f64::NAN,
            support_size: None,
            precision: f64::NAN,
            recall: f64::NAN,
            f1: f64::NAN,
            kkt_residual: f64::NAN,
            iterations: None,
            converged: None,
            alpha: f64::NAN,
            lambda_threshold: f64::NAN,
            q_const: f64::NAN,
        }
    }

    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }

    fn record(&self, hash: &str) -> Vec<String> {
        let opt = |v: Option<usize>| v.map(|x| x.to_string()).unwrap_or_default();
        vec![
            hash.to_string(),
            self.n.to_string(),
            self.replicate.to_string(),
            self.seed.to_string(),
            opt(self.lambda_index),
            fmt_f64(self.lambda),
            self.status.clone(),
            fmt_f64(self.clamp_hits),
            fmt_f64(self.latent_max_norm),
            fmt_f64(self.latent_sparse_norm),
            self.latent_sparse_lower_bound.to_string(),
            fmt_f64(self.latent_frobenius),
            fmt_f64(self.deviation),
            fmt_f64(self.lasso_l1_error),
            fmt_f64(self.lasso_l2_error),
            opt(self.support_size),
            fmt_f64(self.precision),
            fmt_f64(self.recall),
            fmt_f64(self.f1),
            fmt_f64(self.kkt_residual),
            opt(self.iterations),
            self.converged.map(|c| c.to_string()).unwrap_or_default(),
            fmt_f64(self.alpha),
            fmt_f64(self.lambda_threshold),
            fmt_f64(self.q_const),
        ]
    }
}

/// Median and interquartile range of one metric.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub n: usize,
    pub lambda_index: Option<usize>,
    pub metric: String,
    pub median: f64,
    pub q25: f64,
    pub q75: f64,
    pub count: usize,
}

/// Everything fixed before the sweep: truth, marginals and constants.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub config: ExperimentConfig,
    pub hash: String,
    /// Standardized latent model.
    pub model: VarModel,
    /// `Gamma_Z(0..=L)` of the standardized model.
    pub truth: LatentAcvf,
    pub beta0: DVector<f64>,
    pub families: Vec<FitFamily>,
    pub constants: Option<BoundConstants>,
}

impl Prepared {
    pub fn new(config: &ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let l = config.l();
        let st = standardize(&config.build_model()?, l)?;
        let beta0 = beta_from_coeffs(st.model.coeffs());
        let families = config.marginals.iter().map(MarginalSpec::fit_family).collect();
        let constants = if config.constants {
            let c_z = st.acvf.c_z().clamp(1e-6, 1.0 - 1e-6);
            let e = config.constants_eps;
            q_of_gamma(&config.marginals, &st.acvf, config.s, c_z, e, e, e, 1).ok()
        } else {
            None
        };
        Ok(Self {
            config: config.clone(),
            hash: config.hash(),
            model: st.model,
            truth: st.acvf,
            beta0,
            families,
            constants,
        })
    }

    pub fn cell_seed(&self, n: usize, replicate: usize) -> u64 {
        stream_seed(stream_seed(self.config.master_seed, n as u64), replicate as u64)
    }

    /// Rows of one `(N, replicate)` cell, one per penalty value.
    pub fn run_cell(&self, n: usize, replicate: usize) -> Vec<ResultRow> {
        let seed = self.cell_seed(n, replicate);
        let mut base = ResultRow::blank(n, replicate, seed);
        let n_lambda = if self.config.lasso { self.config.lambda.len() } else { 1 };
        if let Some(c) = &self.constants {
            base.q_const = c.q_const;
            if let Ok(v) = var_bound_quantities(&self.model, self.config.s, c.q_const, n) {
                base.alpha = v.alpha;
                base.lambda_threshold = v.lambda_threshold;
            }
        }
        match self.cell_inner(&mut base, n, seed) {
            Ok(rows) => rows,
            Err(e) => (0..n_lambda)
                .map(|k| {
                    let mut r = base.clone();
                    r.status = format!("error: {e}");
                    if self.config.lasso {
                        r.lambda_index = Some(k);
                    }
                    r
                })
                .collect(),
        }
    }

    fn cell_inner(&self, base: &mut ResultRow, n: usize, seed: u64) -> Result<Vec<ResultRow>> {
        let cfg = &self.config;
        let (l, p) = (cfg.l(), self.model.p());
        let z = simulate(&self.model, n + l, seed, None)?;
        let x = transform_counts(&z, &cfg.marginals)?;
        let est = if cfg.fit_marginals {
            estimate_latent_acvf(&x, l, &self.families, cfg.diag_mode)?
        } else {
            estimate_with_specs(&x, l, &cfg.marginals, cfg.diag_mode)?
        };
        let rec = recovery_error(&est.acvf_hat, &self.truth, cfg.s)?;
        base.clamp_hits = est.clamp_hits as f64;
        base.latent_max_norm = rec.max_norm;
        base.latent_sparse_norm = rec.sparse_norm_err;
        base.latent_sparse_lower_bound = rec.sparse_lower_bound;
        base.latent_frobenius = rec.frobenius;
        if !cfg.lasso {
            return Ok(vec![base.clone()]);
        }

        let est_p = if l == p && cfg.diag_mode == DiagMode::ForceOne {
            est
        } else {
            estimate_with_specs(&x, p, &est.theta_hats, DiagMode::ForceOne)?
        };
        let prob = LassoProblem::from_estimate(&est_p, 0.0)?;
        base.deviation = deviation_check(&prob, &self.beta0)?;
        let opts = cfg.lasso_options();
        let rows = cfg
            .lambda
            .values(prob.q(), n)
            .into_iter()
            .enumerate()
            .map(|(k, lambda)| {
                let mut row = base.clone();
                row.lambda_index = Some(k);
                row.lambda = lambda;
                match prob.with_lambda(lambda).and_then(|pr| lasso_solve(&pr, &opts)) {
                    Ok(sol) => {
                        let diff = &sol.beta_hat - &self.beta0;
                        let sm = support_metrics(&sol.beta_hat, &self.beta0);
                        row.lasso_l1_error = diff.abs().sum();
                        row.lasso_l2_error = diff.norm();
                        row.support_size = Some(sm.support_size);
                        row.precision = sm.precision;
                        row.recall = sm.recall;
                        row.f1 = sm.f1;
                        row.kkt_residual = sol.kkt_residual;
                        row.iterations = Some(sol.iterations);
                        row.converged = Some(sol.converged);
                    }
                    Err(e) => row.status = format!("error: {e}"),
                }
                row
            })
            .collect();
        Ok(rows)
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub config: ExperimentConfig,
    pub hash: String,
    pub constants: Option<BoundConstants>,
    /// Ordered by `(N, replicate, lambda_index)`.
    pub rows: Vec<ResultRow>,
}

/// Runs every `(N, replicate)` cell; cells run in parallel on the current
/// rayon pool and rows come back in key order.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentResult> {
    let prep = Prepared::new(config)?;
    let cells: Vec<(usize, usize)> = config
        .n_grid
        .iter()
        .flat_map(|&n| (0..config.replicates).map(move |r| (n, r)))
        .collect();
    let rows: Vec<ResultRow> = cells
        .par_iter()
        .map(|&(n, r)| prep.run_cell(n, r))
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect();
    Ok(ExperimentResult {
        config: config.clone(),
        hash: prep.hash.clone(),
        constants: prep.constants,
        rows,
    })
}

/// As [`run_experiment`] on a dedicated pool of `threads` workers.
pub fn run_experiment_with_threads(config: &ExperimentConfig, threads: usize) -> Result<ExperimentResult> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| Error::Config(e.to_string()))?;
    pool.install(|| run_experiment(config))
}

/// Rows of a single cell, identical to the corresponding rows of a full run.
pub fn replay_cell(config: &ExperimentConfig, n: usize, replicate: usize) -> Result<ExperimentResult> {
    if !config.n_grid.contains(&n) || replicate >= config.replicates {
        return Err(Error::Config(format!(
            "cell {n}:{replicate} is not part of this experiment"
        )));
    }
    let prep = Prepared::new(config)?;
    Ok(ExperimentResult {
        config: config.clone(),
        hash: prep.hash.clone(),
        constants: prep.constants,
        rows: prep.run_cell(n, replicate),
    })
}

/// Quantile with linear interpolation between order statistics.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

fn summarize(values: Vec<f64>, n: usize, lambda_index: Option<usize>, metric: &str) -> SummaryRow {
    let mut v: Vec<f64> = values.into_iter().filter(|x| !x.is_nan()).collect();
    v.sort_by(f64::total_cmp);
    SummaryRow {
        n,
        lambda_index,
        metric: metric.to_string(),
        median: quantile(&v, 0.5),
        q25: quantile(&v, 0.25),
        q75: quantile(&v, 0.75),
        count: v.len(),
    }
}

impl ExperimentResult {
    /// Rows of cell `(n, replicate)`.
    pub fn cell(&self, n: usize, replicate: usize) -> impl Iterator<Item = &ResultRow> {
        self.rows.iter().filter(move |r| r.n == n && r.replicate == replicate)
    }

    /// Value of a cell-level metric for every replicate at `n`.
    pub fn cell_metric(&self, n: usize, metric: &str) -> Vec<f64> {
        (0..self.config.replicates)
            .map(|rep| {
                let rows: Vec<&ResultRow> = self.cell(n, rep).collect();
                let first = rows[0];
                match metric {
                    "latent_max_norm" => first.latent_max_norm,
                    "latent_sparse_norm" => first.latent_sparse_norm,
                    "latent_frobenius" => first.latent_frobenius,
                    "deviation" => first.deviation,
                    "clamp_hits" => first.clamp_hits,
                    "best_f1" => rows
                        .iter()
                        .map(|r| r.f1)
                        .filter(|v| !v.is_nan())
                        .fold(f64::NAN, f64::max),
                    "best_l2_error" => rows
                        .iter()
                        .map(|r| r.lasso_l2_error)
                        .filter(|v| !v.is_nan())
                        .fold(f64::NAN, f64::min),
                    _ => f64::NAN,
                }
            })
            .collect()
    }

    /// Median and IQR per `N` (cell metrics) and per `(N, lambda_index)`.
    pub fn summary(&self) -> Vec<SummaryRow> {
        let mut out = Vec::new();
        for &n in &self.config.n_grid {
            for metric in CELL_METRICS {
                out.push(summarize(self.cell_metric(n, metric), n, None, metric));
            }
            if !self.config.lasso {
                continue;
            }
            for k in 0..self.config.lambda.len() {
                let at_k: Vec<&ResultRow> = self
                    .rows
                    .iter()
                    .filter(|r| r.n == n && r.lambda_index == Some(k))
                    .collect();
                for metric in LAMBDA_METRICS {
                    let vals = at_k
                        .iter()
                        .map(|r| match metric {
                            "lasso_l1_error" => r.lasso_l1_error,
                            "lasso_l2_error" => r.lasso_l2_error,
                            _ => r.f1,
                        })
                        .collect();
                    out.push(summarize(vals, n, Some(k), metric));
                }
            }
        }
        out
    }

    /// Cells that stopped with an error, as `(n, replicate, message)`.
    pub fn failed_cells(&self) -> Vec<(usize, usize, String)> {
        let mut out: Vec<(usize, usize, String)> = Vec::new();
        for r in self.rows.iter().filter(|r| !r.is_ok()) {
            if !out.iter().any(|(n, rep, _)| *n == r.n && *rep == r.replicate) {
                out.push((r.n, r.replicate, r.status.clone()));
            }
        }
        out
    }

    fn write_preamble<W: Write>(&self, w: &mut W) -> Result<()> {
        writeln!(w, "# latent-count experiment")?;
        writeln!(w, "# config_hash: {}", self.hash)?;
        writeln!(w, "# config: {}", self.config.to_json())?;
        Ok(())
    }

    /// Per-row CSV with the configuration echoed as `#` comment lines.
    pub fn write_rows_csv<W: Write>(&self, mut w: W) -> Result<()> {
        self.write_preamble(&mut w)?;
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(ROW_HEADER)?;
        for r in &self.rows {
            wr.write_record(r.record(&self.hash))?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn write_summary_csv<W: Write>(&self, mut w: W) -> Result<()> {
        self.write_preamble(&mut w)?;
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(SUMMARY_HEADER)?;
        for s in self.summary() {
            wr.write_record([
                self.hash.clone(),
                s.n.to_string(),
                s.lambda_index.map(|k| k.to_string()).unwrap_or_default(),
                s.metric.clone(),
                fmt_f64(s.median),
                fmt_f64(s.q25),
                fmt_f64(s.q75),
                s.count.to_string(),
            ])?;
        }
        wr.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
}

/// Least-squares line through `(log n, log value)`.
pub fn fit_log_log(points: &[(f64, f64)]) -> Result<RateFit> {
    if points.len() < 3 {
        return Err(Error::Fit(format!(
            "need at least 3 sample sizes, got {}",
            points.len()
        )));
    }
    if points.iter().any(|&(n, v)| !(n > 0.0) || !(v > 0.0)) {
        return Err(Error::Fit("sample sizes and medians must be positive".into()));
    }
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let slope = sxy / sxx;
    Ok(RateFit {
        slope,
        intercept: my - slope * mx,
    })
}

/// Log-log slope of the median of a cell-level metric against `N`.
pub fn rate_fit(result: &ExperimentResult, metric: &str) -> Result<RateFit> {
    if !CELL_METRICS.contains(&metric) {
        return Err(Error::Fit(format!("unknown metric {metric}")));
    }
    let points: Vec<(f64, f64)> = result
        .config
        .n_grid
        .iter()
        .map(|&n| {
            (
                n as f64,
                summarize(result.cell_metric(n, metric), n, None, metric).median,
            )
        })
        .collect();
    fit_log_log(&points)
}
