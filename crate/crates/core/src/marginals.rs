//! Count marginal distributions.
//!
//! Each [`MarginalSpec`] carries a family and its free parameter vector
//! `theta`. Everything downstream (threshold tables, link functions,
//! moment constants) is computed from a [`Tabulation`]: the pmf over the
//! numerically relevant support together with upper tails `P[X > n]` and
//! their parameter gradients, accumulated from the far tail backwards so
//! that small tail probabilities keep full relative precision.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::normal;

/// Hard cap on the tabulated support.
pub const MAX_SUPPORT: usize = 1_000_000;
/// Term cap for the Conway-Maxwell-Poisson normalizing constant.
pub const CMP_MAX_TERMS: usize = 100_000;
/// Clipping margin for fitted parameters.
pub const FIT_MARGIN: f64 = 1e-6;
/// Tail tolerance used by moment quantities.
pub const MOMENT_TAIL_TOL: f64 = 1e-14;

// log pmf below this underflows to zero
const LOG_UNDERFLOW: f64 = -745.0;

/// Count distribution families and their parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Family {
    Bernoulli {
        p: f64,
    },
    Binomial {
        n_trials: u32,
        p: f64,
    },
    Poisson {
        lambda: f64,
    },
    /// Number of failures before the `r`-th success, success probability `p`.
    NegBinomial {
        r: u32,
        p: f64,
    },
    MixturePoisson {
        weights: Vec<f64>,
        lambdas: Vec<f64>,
    },
    ConwayMaxwellPoisson {
        lambda: f64,
        nu: f64,
    },
}

/// A validated count marginal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Family", into = "Family")]
pub struct MarginalSpec {
    family: Family,
}

impl TryFrom<Family> for MarginalSpec {
    type Error = Error;
    fn try_from(family: Family) -> Result<Self> {
        MarginalSpec::new(family)
    }
}

impl From<MarginalSpec> for Family {
    fn from(spec: MarginalSpec) -> Family {
        spec.family
    }
}

fn check_prob(name: &str, p: f64) -> Result<()> {
    if p > 0.0 && p < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("{name} must lie in (0,1), got {p}")))
    }
}

fn check_pos(name: &str, x: f64) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("{name} must be positive, got {x}")))
    }
}

fn ln_factorial(k: usize) -> f64 {
    libm::lgamma(k as f64 + 1.0)
}

/// Estimator families supported by [`fit_theta`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum FitFamily {
    Bernoulli,
    Binomial { n_trials: u32 },
    Poisson,
    NegBinomial { r: u32 },
    MixturePoisson,
    ConwayMaxwellPoisson,
}

impl MarginalSpec {
    pub fn new(family: Family) -> Result<Self> {
        match &family {
            Family::Bernoulli { p } => check_prob("p", *p)?,
            Family::Binomial { n_trials, p } => {
                if *n_trials == 0 {
                    return Err(Error::Domain("n_trials must be at least 1".into()));
                }
                check_prob("p", *p)?
            }
            Family::Poisson { lambda } => check_pos("lambda", *lambda)?,
            Family::NegBinomial { r, p } => {
                if *r == 0 {
                    return Err(Error::Domain("r must be a positive integer".into()));
                }
                check_prob("p", *p)?
            }
            Family::MixturePoisson { weights, lambdas } => {
                if weights.is_empty() || weights.len() != lambdas.len() {
                    return Err(Error::Domain("mixture needs equally many weights and rates".into()));
                }
                for &w in weights {
                    check_pos("mixture weight", w)?;
                }
                for &l in lambdas {
                    check_pos("mixture rate", l)?;
                }
                let total: f64 = weights.iter().sum();
                if (total - 1.0).abs() > 1e-12 {
                    return Err(Error::Domain(format!("mixture weights must sum to 1, got {total}")));
                }
            }
            Family::ConwayMaxwellPoisson { lambda, nu } => {
                check_pos("lambda", *lambda)?;
                check_pos("nu", *nu)?
            }
        }
        Ok(Self { family })
    }

    pub fn bernoulli(p: f64) -> Result<Self> {
        Self::new(Family::Bernoulli { p })
    }

    pub fn binomial(n_trials: u32, p: f64) -> Result<Self> {
        Self::new(Family::Binomial { n_trials, p })
    }

    pub fn poisson(lambda: f64) -> Result<Self> {
        Self::new(Family::Poisson { lambda })
    }

    pub fn neg_binomial(r: u32, p: f64) -> Result<Self> {
        Self::new(Family::NegBinomial { r, p })
    }

    pub fn mixture_poisson(weights: Vec<f64>, lambdas: Vec<f64>) -> Result<Self> {
        Self::new(Family::MixturePoisson { weights, lambdas })
    }

    pub fn cmp(lambda: f64, nu: f64) -> Result<Self> {
        Self::new(Family::ConwayMaxwellPoisson { lambda, nu })
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    pub fn name(&self) -> &'static str {
        match self.family {
            Family::Bernoulli { .. } => "bernoulli",
            Family::Binomial { .. } => "binomial",
            Family::Poisson { .. } => "poisson",
            Family::NegBinomial { .. } => "neg_binomial",
            Family::MixturePoisson { .. } => "mixture_poisson",
            Family::ConwayMaxwellPoisson { .. } => "conway_maxwell_poisson",
        }
    }

    /// Free parameters; known constants (binomial trials, negative binomial `r`) excluded.
    pub fn theta(&self) -> Vec<f64> {
        match &self.family {
            Family::Bernoulli { p } | Family::Binomial { p, .. } | Family::NegBinomial { p, .. } => {
                vec![*p]
            }
            Family::Poisson { lambda } => vec![*lambda],
            Family::MixturePoisson { weights, lambdas } => weights.iter().chain(lambdas.iter()).copied().collect(),
            Family::ConwayMaxwellPoisson { lambda, nu } => vec![*lambda, *nu],
        }
    }

    /// Same family with a new free-parameter vector.
    pub fn with_theta(&self, theta: &[f64]) -> Result<Self> {
        let k = self.theta().len();
        if theta.len() != k {
            return Err(Error::Dimension(format!(
                "expected {k} parameters, got {}",
                theta.len()
            )));
        }
        let family = match &self.family {
            Family::Bernoulli { .. } => Family::Bernoulli { p: theta[0] },
            Family::Binomial { n_trials, .. } => Family::Binomial {
                n_trials: *n_trials,
                p: theta[0],
            },
            Family::Poisson { .. } => Family::Poisson { lambda: theta[0] },
            Family::NegBinomial { r, .. } => Family::NegBinomial { r: *r, p: theta[0] },
            Family::MixturePoisson { weights, .. } => {
                let m = weights.len();
                Family::MixturePoisson {
                    weights: theta[..m].to_vec(),
                    lambdas: theta[m..].to_vec(),
                }
            }
            Family::ConwayMaxwellPoisson { .. } => Family::ConwayMaxwellPoisson {
                lambda: theta[0],
                nu: theta[1],
            },
        };
        Self::new(family)
    }

    /// The estimator family matching this marginal.
    pub fn fit_family(&self) -> FitFamily {
        match &self.family {
            Family::Bernoulli { .. } => FitFamily::Bernoulli,
            Family::Binomial { n_trials, .. } => FitFamily::Binomial { n_trials: *n_trials },
            Family::Poisson { .. } => FitFamily::Poisson,
            Family::NegBinomial { r, .. } => FitFamily::NegBinomial { r: *r },
            Family::MixturePoisson { .. } => FitFamily::MixturePoisson,
            Family::ConwayMaxwellPoisson { .. } => FitFamily::ConwayMaxwellPoisson,
        }
    }

    /// Largest support point for finite-support families.
    pub fn support_max(&self) -> Option<u64> {
        match &self.family {
            Family::Bernoulli { .. } => Some(1),
            Family::Binomial { n_trials, .. } => Some(*n_trials as u64),
            _ => None,
        }
    }

    /// Closed-form mean (CMP by summation).
    pub fn mean(&self) -> Result<f64> {
        Ok(match &self.family {
            Family::Bernoulli { p } => *p,
            Family::Binomial { n_trials, p } => *n_trials as f64 * p,
            Family::Poisson { lambda } => *lambda,
            Family::NegBinomial { r, p } => *r as f64 * (1.0 - p) / p,
            Family::MixturePoisson { weights, lambdas } => weights.iter().zip(lambdas).map(|(w, l)| w * l).sum(),
            Family::ConwayMaxwellPoisson { .. } => {
                let tab = self.tabulate()?;
                tab.pmf.iter().enumerate().map(|(k, p)| k as f64 * p).sum()
            }
        })
    }

    /// Closed-form variance (CMP by summation).
    pub fn variance(&self) -> Result<f64> {
        Ok(match &self.family {
            Family::Bernoulli { p } => p * (1.0 - p),
            Family::Binomial { n_trials, p } => *n_trials as f64 * p * (1.0 - p),
            Family::Poisson { lambda } => *lambda,
            Family::NegBinomial { r, p } => *r as f64 * (1.0 - p) / (p * p),
            Family::MixturePoisson { weights, lambdas } => {
                let m1: f64 = weights.iter().zip(lambdas).map(|(w, l)| w * l).sum();
                let m2: f64 = weights.iter().zip(lambdas).map(|(w, l)| w * (l + l * l)).sum();
                m2 - m1 * m1
            }
            Family::ConwayMaxwellPoisson { .. } => {
                let tab = self.tabulate()?;
                let m1: f64 = tab.pmf.iter().enumerate().map(|(k, p)| k as f64 * p).sum();
                let m2: f64 = tab.pmf.iter().enumerate().map(|(k, p)| (k * k) as f64 * p).sum();
                m2 - m1 * m1
            }
        })
    }

    fn log_pmf_fn(&self) -> Result<Box<dyn Fn(usize) -> f64 + '_>> {
        Ok(match &self.family {
            Family::Bernoulli { p } => {
                let p = *p;
                Box::new(move |k| match k {
                    0 => (1.0 - p).ln(),
                    1 => p.ln(),
                    _ => f64::NEG_INFINITY,
                })
            }
            Family::Binomial { n_trials, p } => {
                let n = *n_trials as usize;
                let (lp, lq) = (p.ln(), (1.0 - p).ln());
                let lnf = ln_factorial(n);
                Box::new(move |k| {
                    if k > n {
                        f64::NEG_INFINITY
                    } else {
                        lnf - ln_factorial(k) - ln_factorial(n - k) + k as f64 * lp + (n - k) as f64 * lq
                    }
                })
            }
            Family::Poisson { lambda } => {
                let (l, ll) = (*lambda, lambda.ln());
                Box::new(move |k| k as f64 * ll - l - ln_factorial(k))
            }
            Family::NegBinomial { r, p } => {
                let r = *r as f64;
                let (lp, lq) = (p.ln(), (1.0 - p).ln());
                let lgr = libm::lgamma(r);
                Box::new(move |k| libm::lgamma(k as f64 + r) - lgr - ln_factorial(k) + k as f64 * lq + r * lp)
            }
            Family::MixturePoisson { weights, lambdas } => {
                let comps: Vec<(f64, f64, f64)> =
                    weights.iter().zip(lambdas).map(|(w, l)| (w.ln(), *l, l.ln())).collect();
                Box::new(move |k| {
                    let lf = ln_factorial(k);
                    let terms: Vec<f64> = comps.iter().map(|(lw, l, ll)| lw + k as f64 * ll - l - lf).collect();
                    log_sum_exp(&terms)
                })
            }
            Family::ConwayMaxwellPoisson { lambda, nu } => {
                let log_z = cmp_log_normalizer(*lambda, *nu)?;
                let (ll, nu) = (lambda.ln(), *nu);
                Box::new(move |k| k as f64 * ll - nu * ln_factorial(k) - log_z)
            }
        })
    }

    /// Point up to which the pmf is still increasing or multimodal.
    fn mode_bound(&self) -> f64 {
        match &self.family {
            Family::Bernoulli { .. } => 1.0,
            Family::Binomial { n_trials, .. } => *n_trials as f64,
            Family::Poisson { lambda } => *lambda,
            Family::NegBinomial { r, p } => *r as f64 * (1.0 - p) / p,
            Family::MixturePoisson { lambdas, .. } => lambdas.iter().cloned().fold(0.0, f64::max),
            Family::ConwayMaxwellPoisson { lambda, nu } => lambda.powf(1.0 / nu),
        }
    }

    /// Tabulate pmf, tails and gradients with respect to `theta`.
    pub fn tabulate(&self) -> Result<Tabulation> {
        self.tabulate_with(false)
    }

    /// Like [`tabulate`](Self::tabulate); with `include_fixed_r` the negative
    /// binomial gradient also covers `r` (used by the series check only).
    pub fn tabulate_with(&self, include_fixed_r: bool) -> Result<Tabulation> {
        let log_pmf = self.log_pmf_fn()?;
        let mut pmf = Vec::new();
        match self.support_max() {
            Some(n) => {
                for k in 0..=n as usize {
                    pmf.push(log_pmf(k).exp());
                }
            }
            None => {
                let mode = self.mode_bound();
                let mut prev = f64::NEG_INFINITY;
                let mut k = 0usize;
                loop {
                    let lp = log_pmf(k);
                    if lp < LOG_UNDERFLOW && (k as f64) > mode && lp <= prev {
                        break;
                    }
                    pmf.push(lp.exp());
                    prev = lp;
                    k += 1;
                    if k > MAX_SUPPORT {
                        let tail = 1.0 - pmf.iter().sum::<f64>();
                        return Err(Error::Truncation {
                            n_max: MAX_SUPPORT,
                            tail_mass: tail.max(0.0),
                        });
                    }
                }
            }
        }
        let kmax = pmf.len();
        // per-parameter pmf derivatives
        let dpmf: Vec<Vec<f64>> = match &self.family {
            Family::Bernoulli { .. } => vec![vec![-1.0, 1.0]],
            Family::Binomial { n_trials, p } => {
                let n = *n_trials as f64;
                vec![pmf
                    .iter()
                    .enumerate()
                    .map(|(k, &f)| f * (k as f64 / p - (n - k as f64) / (1.0 - p)))
                    .collect()]
            }
            Family::Poisson { lambda } => vec![pmf
                .iter()
                .enumerate()
                .map(|(k, &f)| f * (k as f64 / lambda - 1.0))
                .collect()],
            Family::NegBinomial { r, p } => {
                let rf = *r as f64;
                let mut out = vec![pmf
                    .iter()
                    .enumerate()
                    .map(|(k, &f)| f * (rf / p - k as f64 / (1.0 - p)))
                    .collect::<Vec<_>>()];
                if include_fixed_r {
                    // d/dr log C(k+r-1, k) = sum_{j<k} 1/(r+j)
                    let lp = p.ln();
                    let mut harmonic = 0.0;
                    let mut dr = Vec::with_capacity(kmax);
                    for (k, &f) in pmf.iter().enumerate() {
                        dr.push(f * (harmonic + lp));
                        harmonic += 1.0 / (rf + k as f64);
                    }
                    out.push(dr);
                }
                out
            }
            Family::MixturePoisson { weights, lambdas } => {
                let mut out = Vec::with_capacity(2 * weights.len());
                let comp_pmf: Vec<Vec<f64>> = lambdas
                    .iter()
                    .map(|&l| {
                        (0..kmax)
                            .map(|k| (k as f64 * l.ln() - l - ln_factorial(k)).exp())
                            .collect()
                    })
                    .collect();
                for cp in &comp_pmf {
                    out.push(cp.clone());
                }
                for ((cp, w), l) in comp_pmf.iter().zip(weights).zip(lambdas) {
                    out.push(
                        cp.iter()
                            .enumerate()
                            .map(|(k, f)| w * f * (k as f64 / l - 1.0))
                            .collect(),
                    );
                }
                out
            }
            Family::ConwayMaxwellPoisson { lambda, .. } => {
                let mean: f64 = pmf.iter().enumerate().map(|(k, p)| k as f64 * p).sum();
                let mean_lf: f64 = pmf.iter().enumerate().map(|(k, p)| ln_factorial(k) * p).sum();
                vec![
                    pmf.iter()
                        .enumerate()
                        .map(|(k, &f)| f * (k as f64 - mean) / lambda)
                        .collect(),
                    pmf.iter()
                        .enumerate()
                        .map(|(k, &f)| f * (mean_lf - ln_factorial(k)))
                        .collect(),
                ]
            }
        };

        let mut sf = vec![0.0; kmax];
        let mut acc = 0.0;
        for k in (0..kmax).rev() {
            sf[k] = acc;
            acc += pmf[k];
        }
        let mut cdf = vec![0.0; kmax];
        let mut acc = 0.0;
        for k in 0..kmax {
            acc += pmf[k];
            cdf[k] = if sf[k] < 0.5 { 1.0 - sf[k] } else { acc };
        }
        if self.support_max().is_some() {
            cdf[kmax - 1] = 1.0;
        }
        let grad_sf: Vec<Vec<f64>> = dpmf
            .iter()
            .map(|d| {
                let mut fwd = vec![0.0; kmax];
                let mut a = 0.0;
                for k in 0..kmax {
                    a += d[k];
                    fwd[k] = a;
                }
                let mut out = vec![0.0; kmax];
                let mut b = 0.0;
                for k in (0..kmax).rev() {
                    // d P[X>k] = -d P[X<=k]; pick the better-conditioned side
                    out[k] = if cdf[k] < 0.5 { -fwd[k] } else { b };
                    b += d[k];
                }
                if self.support_max().is_some() {
                    out[kmax - 1] = 0.0;
                }
                out
            })
            .collect();

        Ok(Tabulation {
            pmf,
            cdf,
            sf,
            grad_sf,
            finite: self.support_max().is_some(),
        })
    }

    /// `P[X <= n]`; `n = -1` gives 0.
    pub fn cdf(&self, n: i64) -> Result<f64> {
        if n < -1 {
            return Err(Error::Domain(format!("cdf needs n >= -1, got {n}")));
        }
        if n == -1 {
            return Ok(0.0);
        }
        let tab = self.tabulate()?;
        Ok(tab.cdf.get(n as usize).copied().unwrap_or(1.0))
    }

    /// `P[X > n]`.
    pub fn sf(&self, n: u64) -> Result<f64> {
        let tab = self.tabulate()?;
        Ok(tab.sf.get(n as usize).copied().unwrap_or(0.0))
    }

    /// Smallest `x` with `F(x) >= u`.
    pub fn quantile(&self, u: f64) -> Result<u64> {
        if !(u > 0.0 && u < 1.0) {
            return Err(Error::Domain(format!("quantile needs u in (0,1), got {u}")));
        }
        let tab = self.tabulate()?;
        Ok(tab.quantile(u))
    }

    /// Partial derivatives of `C_n(theta)` with respect to the free parameters.
    pub fn cdf_grad(&self, n: u64) -> Result<Vec<f64>> {
        let tab = self.tabulate()?;
        Ok(tab.cdf_grad(n as usize))
    }

    /// `Q_n = Phi^{-1}(C_n)` for `n = 0..n_max` with `1 - C_{n_max} < tail_tol`.
    pub fn threshold_table(&self, tail_tol: f64) -> Result<ThresholdTable> {
        if !(tail_tol > 0.0 && tail_tol < 1.0) {
            return Err(Error::Domain(format!("tail_tol must lie in (0,1), got {tail_tol}")));
        }
        let tab = self.tabulate()?;
        ThresholdTable::from_tabulation(&tab, tail_tol)
    }

    /// `m^(k)(u) = (2 pi)^{-1/2} sum_n exp(-Q_n^2 / (2u)) |Q_n|^k`.
    pub fn moment_m(&self, k: u32, u: f64) -> Result<f64> {
        check_pos("u", u)?;
        let table = self.threshold_table(MOMENT_TAIL_TOL)?;
        Ok(table.moment_m(k, u))
    }

    /// `mu^(k)(u)`: as `m^(k)` with each term weighted by `||grad_theta Q_n||_1`.
    pub fn moment_mu(&self, k: u32, u: f64) -> Result<f64> {
        check_pos("u", u)?;
        let tab = self.tabulate()?;
        let table = ThresholdTable::from_tabulation(&tab, MOMENT_TAIL_TOL)?;
        let mut total = 0.0;
        for (n, &q) in table.q_values.iter().enumerate() {
            let g1 = tab.grad_l1(n);
            if g1 == 0.0 {
                continue;
            }
            if k > 0 && q == 0.0 {
                continue;
            }
            // exp(-q^2/(2u)) / phi(q) = sqrt(2 pi) exp(q^2 (1 - 1/u) / 2)
            let mut log_term = 0.5 * q * q * (1.0 - 1.0 / u) + g1.ln();
            if k > 0 {
                log_term += k as f64 * q.abs().ln();
            }
            total += log_term.exp();
        }
        Ok(total)
    }

    /// `Delta = sum_n n ||grad_theta C_n||_1`.
    pub fn delta_big(&self) -> Result<f64> {
        let tab = self.tabulate()?;
        Ok((0..tab.len()).map(|n| n as f64 * tab.grad_l1(n)).sum())
    }

    /// Partial sums of `sum_n P[X>n]^{-1/2} sum_j |d P[X>n] / d theta_j|`.
    pub fn m3_series(&self, n_cap: usize) -> Result<M3Series> {
        if n_cap < 1 {
            return Err(Error::Domain("n_cap must be at least 1".into()));
        }
        let tab = self.tabulate_with(true)?;
        const BLOCK: usize = 10;
        let mut partial = 0.0;
        let mut block = 0.0;
        let mut prev_block = f64::NAN;
        let mut ratio = f64::NAN;
        let mut last_term = f64::INFINITY;
        let mut converged = false;
        let limit = n_cap.min(tab.len());
        let mut ended = false;
        for n in 0..limit {
            let s = tab.sf[n];
            if s <= 0.0 {
                ended = true;
                break;
            }
            let g: f64 = tab.grad_sf.iter().map(|d| d[n].abs()).sum();
            let term = g / s.sqrt();
            partial += term;
            block += term;
            last_term = term;
            if (n + 1) % BLOCK == 0 {
                if prev_block.is_finite() && prev_block > 0.0 {
                    ratio = block / prev_block;
                    if ratio < 0.9 && last_term < 1e-12 {
                        converged = true;
                        break;
                    }
                }
                prev_block = block;
                block = 0.0;
            }
        }
        if tab.finite {
            converged = ended || limit == tab.len();
            ratio = 0.0;
        } else if !converged && ended && last_term < 1e-12 {
            // tail probabilities underflowed after the terms became negligible
            converged = true;
        }
        Ok(M3Series {
            partial_sum: partial,
            converged,
            tail_ratio: ratio,
        })
    }

    /// Both sides of `sum_n P[X>n]^{1/2} <= sqrt(pi^2/6) (E X^3)^{1/2} + 1`.
    pub fn tail_root_inequality(&self) -> Result<(f64, f64)> {
        let tab = self.tabulate()?;
        let lhs: f64 = tab.sf.iter().map(|s| s.sqrt()).sum();
        let m3: f64 = tab.pmf.iter().enumerate().map(|(k, p)| (k as f64).powi(3) * p).sum();
        let c = (std::f64::consts::PI.powi(2) / 6.0).sqrt();
        Ok((lhs, c * m3.sqrt() + 1.0))
    }

    /// Variance through the tail-sum identity `sum (2n+1) P[X>n] - (sum P[X>n])^2`.
    pub fn variance_from_tails(&self) -> Result<f64> {
        let tab = self.tabulate()?;
        let mut s1 = 0.0;
        let mut s2 = 0.0;
        for (n, &s) in tab.sf.iter().enumerate() {
            s1 += (2 * n + 1) as f64 * s;
            s2 += s;
        }
        Ok(s1 - s2 * s2)
    }
}

fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// `ln Z(lambda, nu)`, truncated once a term drops below `1e-16` of the running sum.
pub fn cmp_log_normalizer(lambda: f64, nu: f64) -> Result<f64> {
    let ll = lambda.ln();
    let mode = lambda.powf(1.0 / nu);
    let mut log_sum = f64::NEG_INFINITY;
    for j in 0..CMP_MAX_TERMS {
        let t = j as f64 * ll - nu * ln_factorial(j);
        log_sum = if log_sum == f64::NEG_INFINITY {
            t
        } else {
            let m = log_sum.max(t);
            m + ((log_sum - m).exp() + (t - m).exp()).ln()
        };
        if (j as f64) > mode && t - log_sum < (1e-16f64).ln() {
            return Ok(log_sum);
        }
    }
    Err(Error::Truncation {
        n_max: CMP_MAX_TERMS,
        tail_mass: f64::NAN,
    })
}

/// Tabulated pmf, CDF, upper tails and tail gradients over the relevant support.
#[derive(Debug, Clone)]
pub struct Tabulation {
    pub pmf: Vec<f64>,
    pub cdf: Vec<f64>,
    /// `P[X > n]`.
    pub sf: Vec<f64>,
    /// `grad_sf[j][n] = d P[X > n] / d theta_j`.
    pub grad_sf: Vec<Vec<f64>>,
    pub finite: bool,
}

impl Tabulation {
    pub fn len(&self) -> usize {
        self.pmf.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pmf.is_empty()
    }

    pub fn cdf_grad(&self, n: usize) -> Vec<f64> {
        self.grad_sf
            .iter()
            .map(|d| d.get(n).map(|v| -v).unwrap_or(0.0))
            .collect()
    }

    /// `||grad_theta C_n||_1`.
    pub fn grad_l1(&self, n: usize) -> f64 {
        self.grad_sf
            .iter()
            .map(|d| d.get(n).map(|v| v.abs()).unwrap_or(0.0))
            .sum()
    }

    pub fn quantile(&self, u: f64) -> u64 {
        if u <= 0.5 {
            self.cdf.partition_point(|&c| c < u) as u64
        } else {
            let tail = 1.0 - u;
            self.sf.partition_point(|&s| s > tail) as u64
        }
    }
}

/// `Q_n = Phi^{-1}(C_n)`; saturated entries (`C_n = 1`) are dropped.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdTable {
    pub q_values: Vec<f64>,
    pub tail_tol: f64,
    pub n_max: usize,
}

impl ThresholdTable {
    pub fn from_tabulation(tab: &Tabulation, tail_tol: f64) -> Result<Self> {
        let mut q_values = Vec::new();
        for n in 0..tab.len() {
            if n > MAX_SUPPORT {
                return Err(Error::Truncation {
                    n_max: MAX_SUPPORT,
                    tail_mass: tab.sf[n],
                });
            }
            let s = tab.sf[n];
            if s <= 0.0 {
                break;
            }
            let c = tab.cdf[n];
            let q = if c <= 0.5 { normal::ppf(c) } else { normal::isf(s) };
            if q.is_finite() {
                q_values.push(q);
            }
            if s < tail_tol {
                break;
            }
        }
        if !tab.finite && tab.sf.get(q_values.len().saturating_sub(1)).copied().unwrap_or(0.0) >= tail_tol {
            return Err(Error::Truncation {
                n_max: q_values.len(),
                tail_mass: tab.sf[q_values.len().saturating_sub(1)],
            });
        }
        let n_max = q_values.len().saturating_sub(1);
        Ok(Self {
            q_values,
            tail_tol,
            n_max,
        })
    }

    pub fn len(&self) -> usize {
        self.q_values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.q_values.is_empty()
    }

    pub fn moment_m(&self, k: u32, u: f64) -> f64 {
        normal::INV_SQRT_2PI
            * self
                .q_values
                .iter()
                .map(|&q| (-q * q / (2.0 * u)).exp() * q.abs().powi(k as i32))
                .sum::<f64>()
    }

    /// Count value for a latent standard normal draw: `#{n : Q_n < z}`.
    pub fn count_for(&self, z: f64) -> u64 {
        self.q_values.partition_point(|&q| q < z) as u64
    }
}

/// Result of the Assumption-M3 series check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct M3Series {
    pub partial_sum: f64,
    pub converged: bool,
    pub tail_ratio: f64,
}

/// Moment estimate of the marginal parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct FittedMarginal {
    pub spec: MarginalSpec,
    /// Set when the raw estimate sat on the boundary and was clipped.
    pub clipped: bool,
}

/// Sample-mean estimate of `theta`, clipped into the open parameter domain.
pub fn fit_theta(samples: &[u64], family: FitFamily) -> Result<FittedMarginal> {
    if samples.is_empty() {
        return Err(Error::InsufficientData("cannot fit an empty sample".into()));
    }
    let mean = samples.iter().map(|&x| x as f64).sum::<f64>() / samples.len() as f64;
    let clip_prob = |p: f64| -> (f64, bool) {
        if p < FIT_MARGIN {
            (FIT_MARGIN, true)
        } else if p > 1.0 - FIT_MARGIN {
            (1.0 - FIT_MARGIN, true)
        } else {
            (p, false)
        }
    };
    let (spec, clipped) = match family {
        FitFamily::Bernoulli => {
            let (p, c) = clip_prob(mean);
            (MarginalSpec::bernoulli(p)?, c)
        }
        FitFamily::Binomial { n_trials } => {
            let (p, c) = clip_prob(mean / n_trials as f64);
            (MarginalSpec::binomial(n_trials, p)?, c)
        }
        FitFamily::Poisson => {
            let c = mean < FIT_MARGIN;
            (MarginalSpec::poisson(mean.max(FIT_MARGIN))?, c)
        }
        FitFamily::NegBinomial { r } => {
            let (p, c) = clip_prob(r as f64 / (r as f64 + mean));
            (MarginalSpec::neg_binomial(r, p)?, c)
        }
        FitFamily::MixturePoisson => return Err(Error::UnsupportedFit("mixture_poisson".into())),
        FitFamily::ConwayMaxwellPoisson => return Err(Error::UnsupportedFit("conway_maxwell_poisson".into())),
    };
    Ok(FittedMarginal { spec, clipped })
}
