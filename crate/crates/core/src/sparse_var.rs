//! LASSO estimation of latent VAR coefficients from estimated latent
//! autocovariances.
//!
//! With `B0 = [A_1'; ...; A_p']` (`pd x d`) and `beta0 = vec(B0)`, the
//! estimator minimizes `-2 beta' gamma + beta' (I_d (x) Gamma) beta + lambda |beta|_1`.
//! The Kronecker structure splits this into `d` problems, one per column of `B`,
//! all sharing the `pd x pd` matrix `Gamma`.
//!
//! Worked reshape for `d = 2`, `p = 1`: `A_1 = [[a, b], [c, e]]` gives
//! `B0 = A_1' = [[a, c], [b, e]]` and `beta0 = (a, b, c, e)`, i.e. `beta0`
//! lists the rows of `A_1` one after another.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::latent::{estimate_latent_acvf, DiagMode, LatentEstimate};
use crate::linalg;
use crate::marginals::FitFamily;
use crate::rng::stream_rng;

#[derive(Debug, Clone, PartialEq)]
pub struct LassoProblem {
    /// `vec` of the `pd x d` lag-covariance stack, length `q = p d^2`.
    pub gamma_hat: DVector<f64>,
    /// `pd x pd` latent block autocovariance.
    pub gamma_big: DMatrix<f64>,
    pub lambda: f64,
    pub d: usize,
    pub p: usize,
}

impl LassoProblem {
    pub fn new(gamma_hat: DVector<f64>, gamma_big: DMatrix<f64>, lambda: f64, d: usize, p: usize) -> Result<Self> {
        let pd = p * d;
        if gamma_big.nrows() != pd || gamma_big.ncols() != pd || gamma_hat.len() != pd * d {
            return Err(Error::Dimension(format!(
                "expected gamma_big {pd}x{pd} and gamma_hat of length {}",
                pd * d
            )));
        }
        if !(lambda >= 0.0) {
            return Err(Error::Domain(format!("lambda must be nonnegative, got {lambda}")));
        }
        Ok(Self {
            gamma_hat,
            gamma_big,
            lambda,
            d,
            p,
        })
    }

    /// Problem built from a latent estimate with `L = p`.
    pub fn from_estimate(est: &LatentEstimate, lambda: f64) -> Result<Self> {
        let acvf = &est.acvf_hat;
        let gamma_hat = DVector::from_column_slice(acvf.gamma_vec.as_slice());
        Self::new(gamma_hat, acvf.big.clone(), lambda, acvf.d, acvf.l)
    }

    pub fn q(&self) -> usize {
        self.p * self.d * self.d
    }

    pub fn with_lambda(&self, lambda: f64) -> Result<Self> {
        Self::new(self.gamma_hat.clone(), self.gamma_big.clone(), lambda, self.d, self.p)
    }

    /// `-2 beta' gamma + beta' (I (x) Gamma) beta + lambda |beta|_1`.
    pub fn objective(&self, beta: &DVector<f64>) -> f64 {
        objective_with(&self.gamma_big, &self.gamma_hat, self.lambda, self.p * self.d, beta)
    }

    /// `(I (x) Gamma) beta`.
    pub fn apply(&self, beta: &DVector<f64>) -> DVector<f64> {
        let pd = self.p * self.d;
        let mut out = DVector::zeros(beta.len());
        for j in 0..self.d {
            let col = &self.gamma_big * beta.rows(j * pd, pd);
            out.rows_mut(j * pd, pd).copy_from(&col);
        }
        out
    }
}

fn objective_with(g: &DMatrix<f64>, gamma: &DVector<f64>, lambda: f64, pd: usize, beta: &DVector<f64>) -> f64 {
    let mut total = 0.0;
    for j in 0..gamma.len() / pd {
        let b = beta.rows(j * pd, pd);
        let c = gamma.rows(j * pd, pd);
        total += -2.0 * b.dot(&c) + (b.transpose() * g * b)[(0, 0)] + lambda * b.abs().sum();
    }
    total
}

/// `vec(B)` for `B = [A_1'; ...; A_p']`.
pub fn beta_from_coeffs(coeffs: &[DMatrix<f64>]) -> DVector<f64> {
    let d = coeffs[0].nrows();
    let p = coeffs.len();
    let mut b = DMatrix::zeros(p * d, d);
    for (u, a) in coeffs.iter().enumerate() {
        b.view_mut((u * d, 0), (d, d)).copy_from(&a.transpose());
    }
    DVector::from_column_slice(b.as_slice())
}

/// Inverse of [`beta_from_coeffs`].
pub fn coeffs_from_beta(beta: &DVector<f64>, d: usize, p: usize) -> Vec<DMatrix<f64>> {
    let b = DMatrix::from_column_slice(p * d, d, beta.as_slice());
    (0..p).map(|u| b.view((u * d, 0), (d, d)).transpose()).collect()
}

/// Counts to LASSO problem: latent estimate with `L = p` and unit diagonal.
pub fn build_problem(x: &DMatrix<u64>, p: usize, families: &[FitFamily], lambda: f64) -> Result<LassoProblem> {
    if x.nrows() <= p + 1 {
        return Err(Error::InsufficientData(format!(
            "T = {} must exceed p + 1 = {}",
            x.nrows(),
            p + 1
        )));
    }
    let est = estimate_latent_acvf(x, p, families, DiagMode::ForceOne)?;
    LassoProblem::from_estimate(&est, lambda)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LassoOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub psd_project: bool,
}

impl Default for LassoOptions {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            max_iter: 100_000,
            psd_project: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LassoSolution {
    pub beta_hat: DVector<f64>,
    pub coeff_hats: Vec<DMatrix<f64>>,
    pub objective: f64,
    /// Largest number of sweeps over the column subproblems.
    pub iterations: usize,
    pub kkt_residual: f64,
    pub converged: bool,
}

/// Clip negative eigenvalues at zero, then rescale to restore the diagonal.
pub fn psd_project(g: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(linalg::symmetrize(g));
    let v = &eig.eigenvectors;
    let clipped = v * DMatrix::from_diagonal(&eig.eigenvalues.map(|l| l.max(0.0))) * v.transpose();
    let clipped = linalg::symmetrize(&clipped);
    let n = g.nrows();
    let scale: Vec<f64> = (0..n)
        .map(|i| {
            let c = clipped[(i, i)];
            if c > 0.0 {
                (g[(i, i)].max(0.0) / c).sqrt()
            } else {
                0.0
            }
        })
        .collect();
    let mut out = DMatrix::from_fn(n, n, |i, j| clipped[(i, j)] * scale[i] * scale[j]);
    for i in 0..n {
        out[(i, i)] = g[(i, i)];
    }
    out
}

/// `S(z, t) = sign(z) max(|z| - t, 0)`.
pub fn soft_threshold(z: f64, t: f64) -> f64 {
    if z > t {
        z - t
    } else if z < -t {
        z + t
    } else {
        0.0
    }
}

struct ColumnResult {
    b: DVector<f64>,
    sweeps: usize,
    converged: bool,
}

fn solve_column(g: &DMatrix<f64>, gamma: &DVector<f64>, lambda: f64, opts: &LassoOptions) -> Result<ColumnResult> {
    let n = gamma.len();
    let mut b = DVector::zeros(n);
    let mut gb = DVector::zeros(n);
    let half = 0.5 * lambda;
    let scale = 1.0 + gamma.amax();
    let mut obj: f64 = 0.0;
    for sweep in 1..=opts.max_iter {
        let mut max_change: f64 = 0.0;
        for k in 0..n {
            let gkk = g[(k, k)];
            let z = gamma[k] - (gb[k] - gkk * b[k]);
            let new = soft_threshold(z, half) / gkk;
            let delta = new - b[k];
            if delta != 0.0 {
                gb.axpy(delta, &g.column(k), 1.0);
                b[k] = new;
                max_change = max_change.max(delta.abs());
            }
        }
        let new_obj = -2.0 * b.dot(gamma) + b.dot(&gb) + lambda * b.abs().sum();
        let diverging = !new_obj.is_finite() || b.amax() > 1e10 * scale;
        if diverging || new_obj > obj + 1e-10 * (1.0 + obj.abs()) {
            return Err(Error::Indefinite);
        }
        obj = new_obj;
        if max_change < opts.tol {
            return Ok(ColumnResult {
                b,
                sweeps: sweep,
                converged: true,
            });
        }
    }
    Ok(ColumnResult {
        b,
        sweeps: opts.max_iter,
        converged: false,
    })
}

/// Cyclic coordinate descent, one independent subproblem per column of `B`.
pub fn lasso_solve(prob: &LassoProblem, opts: &LassoOptions) -> Result<LassoSolution> {
    let pd = prob.p * prob.d;
    if (0..pd).any(|k| !(prob.gamma_big[(k, k)] > 0.0)) {
        return Err(Error::Domain("diagonal of Gamma must be strictly positive".into()));
    }
    let g = if opts.psd_project {
        psd_project(&prob.gamma_big)
    } else {
        linalg::symmetrize(&prob.gamma_big)
    };
    let columns = (0..prob.d)
        .into_par_iter()
        .map(|j| {
            let gamma = prob.gamma_hat.rows(j * pd, pd).into_owned();
            solve_column(&g, &gamma, prob.lambda, opts)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut beta = DVector::zeros(prob.q());
    for (j, c) in columns.iter().enumerate() {
        beta.rows_mut(j * pd, pd).copy_from(&c.b);
    }
    let objective = objective_with(&g, &prob.gamma_hat, prob.lambda, pd, &beta);
    let kkt = kkt_residual_with(&g, &prob.gamma_hat, prob.lambda, pd, &beta);
    Ok(LassoSolution {
        coeff_hats: coeffs_from_beta(&beta, prob.d, prob.p),
        beta_hat: beta,
        objective,
        iterations: columns.iter().map(|c| c.sweeps).max().unwrap_or(0),
        kkt_residual: kkt,
        converged: columns.iter().all(|c| c.converged),
    })
}

fn kkt_residual_with(g: &DMatrix<f64>, gamma: &DVector<f64>, lambda: f64, pd: usize, beta: &DVector<f64>) -> f64 {
    let mut worst: f64 = 0.0;
    for j in 0..gamma.len() / pd {
        let b = beta.rows(j * pd, pd);
        let grad = (g * b - gamma.rows(j * pd, pd)) * 2.0;
        for k in 0..pd {
            let r = if b[k] != 0.0 {
                (grad[k] + lambda * b[k].signum()).abs()
            } else {
                (grad[k].abs() - lambda).max(0.0)
            };
            worst = worst.max(r);
        }
    }
    worst
}

/// Largest violation of the optimality conditions of `prob` at `beta`.
pub fn kkt_residual(prob: &LassoProblem, beta: &DVector<f64>) -> f64 {
    kkt_residual_with(&prob.gamma_big, &prob.gamma_hat, prob.lambda, prob.p * prob.d, beta)
}

/// `|gamma - (I (x) Gamma) beta0|_max`.
pub fn deviation_check(prob: &LassoProblem, beta0: &DVector<f64>) -> Result<f64> {
    if beta0.len() != prob.q() {
        return Err(Error::Dimension(format!(
            "beta0 has length {}, expected {}",
            beta0.len(),
            prob.q()
        )));
    }
    Ok((&prob.gamma_hat - prob.apply(beta0)).amax())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReCheck {
    pub violated: bool,
    pub witness: Option<DVector<f64>>,
    /// Smallest `x'Gx - alpha |x|^2 + tau |x|_1^2` over the unit vectors tried.
    pub margin: f64,
    /// Every support of size `min(2s, dim)` and every sign pattern was covered,
    /// and no orthant admits a violation: the condition holds on all
    /// `2s`-sparse vectors.
    pub certified_sparse: bool,
}

const RE_EXHAUSTIVE_BUDGET: u128 = 200_000;

fn re_margin(g: &DMatrix<f64>, alpha: f64, tau: f64, x: &DVector<f64>) -> f64 {
    let n2 = x.norm_squared();
    if n2 == 0.0 {
        return f64::INFINITY;
    }
    let l1 = x.abs().sum();
    ((x.transpose() * g * x)[(0, 0)] - alpha * n2 + tau * l1 * l1) / n2
}

/// Randomized and enumerative search for a violation of
/// `x'Gx >= alpha |x|^2 - tau |x|_1^2`.
pub fn check_re(g: &DMatrix<f64>, alpha: f64, tau: f64, trials: usize, s: usize) -> ReCheck {
    let dim = g.nrows();
    let g = linalg::symmetrize(g);
    let mut best = (f64::INFINITY, None::<DVector<f64>>);
    let consider = |x: DVector<f64>, best: &mut (f64, Option<DVector<f64>>)| {
        let m = re_margin(&g, alpha, tau, &x);
        if m < best.0 {
            *best = (m, Some(x));
        }
    };

    // coordinate directions
    for i in 0..dim {
        let mut e = DVector::zeros(dim);
        e[i] = 1.0;
        consider(e, &mut best);
    }
    // eigenvector directions of G
    let eig = SymmetricEigen::new(g.clone());
    for k in 0..dim {
        consider(eig.eigenvectors.column(k).into_owned(), &mut best);
    }

    // sparse supports with sign patterns: on a fixed orthant |x|_1 = sigma'x,
    // so the margin there is bounded below by lambda_min(G_S - alpha I + tau sigma sigma')
    let k = (2 * s).min(dim).max(1);
    let combos = linalg::binomial(dim, k).saturating_mul(1u128 << k.min(100));
    let exhaustive = k <= 20 && combos <= RE_EXHAUSTIVE_BUDGET;
    let mut orthant_min = f64::INFINITY;
    let orthant = |idx: &[usize], signs: u64, best: &mut (f64, Option<DVector<f64>>), orthant_min: &mut f64| {
        let kk = idx.len();
        let sigma: Vec<f64> = (0..kk).map(|b| if signs >> b & 1 == 1 { -1.0 } else { 1.0 }).collect();
        let m = DMatrix::from_fn(kk, kk, |a, b| {
            g[(idx[a], idx[b])] - if a == b { alpha } else { 0.0 } + tau * sigma[a] * sigma[b]
        });
        let e = SymmetricEigen::new(m);
        let (pos, &lmin) = e
            .eigenvalues
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .expect("nonempty support");
        *orthant_min = orthant_min.min(lmin);
        let mut x = DVector::zeros(dim);
        let mut sv = DVector::zeros(dim);
        for (a, &i) in idx.iter().enumerate() {
            x[i] = e.eigenvectors[(a, pos)];
            sv[i] = sigma[a];
        }
        consider(x, best);
        consider(sv, best);
    };
    if exhaustive {
        linalg::for_each_subset(dim, k, |idx| {
            // sigma and -sigma give the same matrix
            for signs in 0..(1u64 << (k - 1)) {
                orthant(idx, signs, &mut best, &mut orthant_min);
            }
        });
    } else {
        let mut rng = stream_rng(0x2e, 0);
        for _ in 0..trials {
            let mut idx: Vec<usize> = rand::seq::index::sample(&mut rng, dim, k).into_vec();
            idx.sort_unstable();
            let signs: u64 = rng.random();
            orthant(&idx, signs, &mut best, &mut orthant_min);
        }
    }
    // Gaussian directions
    let mut rng = stream_rng(0x2e, 1);
    for _ in 0..trials {
        let x = DVector::from_fn(dim, |_, _| rng.sample::<f64, _>(StandardNormal));
        consider(x, &mut best);
    }

    let (margin, witness) = best;
    let violated = margin < 0.0;
    ReCheck {
        violated,
        witness: if violated { witness } else { None },
        margin,
        certified_sparse: exhaustive && orthant_min >= -1e-12,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LassoErrorBounds {
    /// Euclidean error bound `16 sqrt(s) lambda / alpha`.
    pub l2: f64,
    /// `l1` error bound `64 s lambda / alpha`.
    pub l1: f64,
    /// Prediction-error bound `128 s lambda^2 / alpha`.
    pub quad: f64,
}

pub fn prop41_bounds(s: usize, lambda: f64, alpha: f64) -> Result<LassoErrorBounds> {
    if s == 0 || !(lambda > 0.0) || !(alpha > 0.0) {
        return Err(Error::Domain("s, lambda and alpha must be positive".into()));
    }
    let s = s as f64;
    Ok(LassoErrorBounds {
        l2: 16.0 * s.sqrt() * lambda / alpha,
        l1: 64.0 * s * lambda / alpha,
        quad: 128.0 * s * lambda * lambda / alpha,
    })
}

/// Geometric grid of `n` points spanning `[lo, hi] * sqrt(log(q) / N)`.
pub fn lambda_grid(q: usize, n_obs: usize, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    let base = ((q as f64).ln().max(0.0) / n_obs as f64).sqrt();
    if n == 1 {
        return vec![lo * base];
    }
    (0..n)
        .map(|k| lo * base * (hi / lo).powf(k as f64 / (n - 1) as f64))
        .collect()
}

/// Default grid: 20 points over `[0.01, 2] * sqrt(log(q) / N)`.
pub fn default_lambda_grid(q: usize, n_obs: usize) -> Vec<f64> {
    lambda_grid(q, n_obs, 20, 0.01, 2.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SupportMetrics {
    pub support_size: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Support recovery of `beta_hat` against the nonzeros of `beta0`.
pub fn support_metrics(beta_hat: &DVector<f64>, beta0: &DVector<f64>) -> SupportMetrics {
    let est: Vec<bool> = beta_hat.iter().map(|&v| v != 0.0).collect();
    let truth: Vec<bool> = beta0.iter().map(|&v| v != 0.0).collect();
    let tp = est.iter().zip(&truth).filter(|(&a, &b)| a && b).count() as f64;
    let n_est = est.iter().filter(|&&a| a).count();
    let n_true = truth.iter().filter(|&&b| b).count() as f64;
    let precision = if n_est == 0 { 1.0 } else { tp / n_est as f64 };
    let recall = if n_true == 0.0 { 1.0 } else { tp / n_true };
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    SupportMetrics {
        support_size: n_est,
        precision,
        recall,
        f1,
    }
}
