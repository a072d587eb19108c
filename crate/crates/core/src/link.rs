//! The link function between latent correlations and count covariances.
//!
//! For marginals `i, j` the link `l_ij(u) = sum_k c_ik c_jk u^k / k!` maps a
//! latent Gaussian correlation `u` to the covariance of the observed counts.
//! Its derivative is a positive double sum over the threshold tables,
//!
//! ```text
//! l'(u) = S1(u) / (2 pi sqrt(1 - u^2)),
//! S1(u) = sum_{n0,n1} exp(-(Q_n0^2 + Q_n1^2 - 2 u Q_n0 Q_n1) / (2 (1 - u^2))),
//! ```
//!
//! and `l` itself is evaluated by integrating `l'` from 0. The integration
//! runs in the angle `u = sin(phi)`, where `l'(u) du = S1(sin phi) dphi / 2pi`
//! has no endpoint singularity, so `l(+-1)` is reachable for every pair.
//! The Hermite series is kept as an independent oracle.

use crate::error::{Error, Result};
use crate::marginals::{MarginalSpec, ThresholdTable, MOMENT_TAIL_TOL};
use crate::normal::{INV_2PI, INV_SQRT_2PI};
use crate::quadrature;

/// Default clamp for off-diagonal inversion.
pub const DEFAULT_U_CLAMP: f64 = 1.0 - 1e-6;
/// Absolute tolerance of the link quadrature.
pub const QUAD_TOL: f64 = 1e-12;

const EXP_FLOOR: f64 = -745.0;

/// Everything needed to evaluate `l_ij`, its derivatives and its inverse.
#[derive(Debug, Clone)]
pub struct LinkContext {
    spec_i: MarginalSpec,
    spec_j: MarginalSpec,
    table_i: ThresholdTable,
    table_j: ThresholdTable,
    u_clamp: f64,
    same_series: bool,
    ell_lo: f64,
    ell_hi: f64,
}

impl LinkContext {
    /// Context for two distinct series.
    pub fn new(spec_i: MarginalSpec, spec_j: MarginalSpec) -> Result<Self> {
        Self::build(spec_i, spec_j, DEFAULT_U_CLAMP, false)
    }

    /// Context for a series paired with itself (`l_ii`).
    pub fn diagonal(spec: MarginalSpec) -> Result<Self> {
        Self::build(spec.clone(), spec, DEFAULT_U_CLAMP, true)
    }

    pub fn with_u_clamp(self, u_clamp: f64) -> Result<Self> {
        Self::build(self.spec_i, self.spec_j, u_clamp, self.same_series)
    }

    fn build(spec_i: MarginalSpec, spec_j: MarginalSpec, u_clamp: f64, same_series: bool) -> Result<Self> {
        if !(u_clamp > 0.0 && u_clamp <= 1.0) {
            return Err(Error::Domain(format!("u_clamp must lie in (0,1], got {u_clamp}")));
        }
        let table_i = spec_i.threshold_table(MOMENT_TAIL_TOL)?;
        let table_j = if same_series {
            table_i.clone()
        } else {
            spec_j.threshold_table(MOMENT_TAIL_TOL)?
        };
        let mut ctx = Self {
            spec_i,
            spec_j,
            table_i,
            table_j,
            u_clamp,
            same_series,
            ell_lo: 0.0,
            ell_hi: 0.0,
        };
        ctx.ell_lo = ctx.integrate_phi(0.0, -u_clamp.asin())?;
        ctx.ell_hi = ctx.integrate_phi(0.0, u_clamp.asin())?;
        Ok(ctx)
    }

    pub fn spec_i(&self) -> &MarginalSpec {
        &self.spec_i
    }

    pub fn spec_j(&self) -> &MarginalSpec {
        &self.spec_j
    }

    pub fn table_i(&self) -> &ThresholdTable {
        &self.table_i
    }

    pub fn table_j(&self) -> &ThresholdTable {
        &self.table_j
    }

    pub fn u_clamp(&self) -> f64 {
        self.u_clamp
    }

    pub fn is_diagonal(&self) -> bool {
        self.same_series
    }

    /// `(l(-u_clamp), l(u_clamp))`.
    pub fn range(&self) -> (f64, f64) {
        (self.ell_lo, self.ell_hi)
    }

    /// Exponent of one kernel term at `u = s`, `sqrt(1 - u^2) = c`, written
    /// so that no cancellation occurs as `|u| -> 1`.
    #[inline]
    fn exponent(a: f64, b: f64, s: f64, c: f64) -> f64 {
        let c2 = c * c;
        if s >= 0.0 {
            let d = a - b;
            -(d * d / (2.0 * c2) + a * b / (1.0 + s))
        } else {
            let d = a + b;
            -(d * d / (2.0 * c2) - a * b / (1.0 - s))
        }
    }

    /// `S1(u)` evaluated at `u = s`, `sqrt(1-u^2) = c`.
    fn s1(&self, s: f64, c: f64) -> f64 {
        let mut total = 0.0;
        for &a in &self.table_i.q_values {
            for &b in &self.table_j.q_values {
                let e = Self::exponent(a, b, s, c);
                if e > EXP_FLOOR {
                    total += e.exp();
                }
            }
        }
        total
    }

    /// `(S1, S2^G, S3^g)` at `u`.
    fn s123(&self, u: f64) -> (f64, f64, f64) {
        let c = ((1.0 - u) * (1.0 + u)).sqrt();
        let (mut s1, mut s2, mut s3) = (0.0, 0.0, 0.0);
        for &a in &self.table_i.q_values {
            for &b in &self.table_j.q_values {
                let e = Self::exponent(a, b, u, c);
                if e > EXP_FLOOR {
                    let w = e.exp();
                    // G = a^2 + b^2 - 2uab = -2 (1-u^2) * exponent
                    let g = -2.0 * c * c * e;
                    s1 += w;
                    s2 += w * g;
                    s3 += w * a * b;
                }
            }
        }
        (s1, s2, s3)
    }

    fn integrate_phi(&self, phi0: f64, phi1: f64) -> Result<f64> {
        let v = quadrature::integrate(|p| self.s1(p.sin(), p.cos()), phi0, phi1, QUAD_TOL / INV_2PI)?;
        Ok(v * INV_2PI)
    }

    fn check_open(&self, u: f64) -> Result<()> {
        let margin = if self.same_series { 1e-6 } else { 1e-9 };
        if u.abs() <= 1.0 - margin {
            Ok(())
        } else {
            Err(Error::Domain(format!("|u| must not exceed 1 - {margin:e}, got {u}")))
        }
    }

    /// `l'(u)`.
    pub fn link_deriv(&self, u: f64) -> Result<f64> {
        self.check_open(u)?;
        let c = ((1.0 - u) * (1.0 + u)).sqrt();
        Ok(INV_2PI * self.s1(u, c) / c)
    }

    /// `l''(u)` from the three kernel sums.
    pub fn link_deriv2(&self, u: f64) -> Result<f64> {
        if u.abs() > 1.0 - 1e-6 {
            return Err(Error::Domain(format!("|u| must not exceed 1 - 1e-6, got {u}")));
        }
        let (s1, s2, s3) = self.s123(u);
        let w = (1.0 - u) * (1.0 + u);
        let w32 = w * w.sqrt();
        Ok(INV_2PI * (u * s1 / w32 - u * s2 / (w32 * w) + s3 / w32))
    }

    /// `l(u)` for `|u| <= 1`.
    pub fn link_eval(&self, u: f64) -> Result<f64> {
        if !(u.abs() <= 1.0) {
            return Err(Error::Domain(format!("link needs |u| <= 1, got {u}")));
        }
        if u == 0.0 {
            return Ok(0.0);
        }
        if self.same_series && u == 1.0 {
            return link_at_one(&self.spec_i);
        }
        self.integrate_phi(0.0, u.asin())
    }

    /// `g(x) = l^{-1}(x)` with values clamped to `[-u_clamp, u_clamp]`.
    pub fn link_invert(&self, x: f64) -> f64 {
        if x >= self.ell_hi {
            return self.u_clamp;
        }
        if x <= self.ell_lo {
            return -self.u_clamp;
        }
        if x == 0.0 {
            return 0.0;
        }
        let phi_c = self.u_clamp.asin();
        self.solve_phi(x, -phi_c, self.ell_lo, phi_c, self.ell_hi)
    }

    /// Inverse restricted to `[lo, hi]` with clamping at both ends; used for
    /// the diagonal lag-0 entries where the admissible range is `[0, 1]`.
    pub fn link_invert_on(&self, x: f64, lo: f64, hi: f64) -> Result<f64> {
        if !(lo < hi && lo >= -1.0 && hi <= 1.0) {
            return Err(Error::Domain(format!("bad inversion interval [{lo}, {hi}]")));
        }
        let f_lo = self.link_eval(lo)?;
        let f_hi = self.link_eval(hi)?;
        if x >= f_hi {
            return Ok(hi);
        }
        if x <= f_lo {
            return Ok(lo);
        }
        Ok(self.solve_phi(x, lo.asin(), f_lo, hi.asin(), f_hi))
    }

    /// Root of `l(sin phi) = x` on a bracket, bisection-safeguarded Newton in
    /// `phi` (the Newton slope `l'(u) cos(phi) = S1 / 2pi` stays finite).
    fn solve_phi(&self, x: f64, mut a: f64, fa: f64, mut b: f64, fb: f64) -> f64 {
        debug_assert!(fa <= x && x <= fb);
        // start from the point 0 where l = 0, which is always inside
        let (mut phi, mut f) = if a < 0.0 && b > 0.0 {
            (0.0, 0.0)
        } else if (x - fa) < (fb - x) {
            (a, fa)
        } else {
            (b, fb)
        };
        for _ in 0..200 {
            let r = f - x;
            if r.abs() < 1e-14 {
                break;
            }
            if r < 0.0 {
                a = a.max(phi);
            } else {
                b = b.min(phi);
            }
            if b - a < 1e-15 {
                break;
            }
            let slope = INV_2PI * self.s1(phi.sin(), phi.cos());
            let mut next = if slope > 0.0 { phi - r / slope } else { f64::NAN };
            if !(next > a && next < b) {
                next = 0.5 * (a + b);
            }
            let step = match self.integrate_phi(phi, next) {
                Ok(v) => v,
                Err(Error::Accuracy { estimate, .. }) => estimate,
                Err(_) => f64::NAN,
            };
            if !step.is_finite() {
                next = 0.5 * (a + b);
                f = self.integrate_phi(0.0, next).unwrap_or(f64::NAN);
            } else {
                f += step;
            }
            phi = next;
        }
        phi.sin()
    }

    /// `(g'(x), g''(x))` for `x` strictly inside the clamped range.
    pub fn inverse_link_derivs(&self, x: f64) -> Result<(f64, f64)> {
        if !(x > self.ell_lo && x < self.ell_hi) {
            return Err(Error::Domain(format!(
                "x = {x} outside ({}, {})",
                self.ell_lo, self.ell_hi
            )));
        }
        let u = self.link_invert(x);
        let d1 = self.link_deriv(u)?;
        let d2 = self.link_deriv2(u)?;
        Ok((1.0 / d1, -d2 / (d1 * d1 * d1)))
    }
}

/// `l_ii(1) = Var[X]` via `sum (2n+1) P[X>n] - (sum P[X>n])^2`.
pub fn link_at_one(spec: &MarginalSpec) -> Result<f64> {
    spec.variance_from_tails()
}

/// Hermite coefficients `c_1..c_K` of `G = F^{-1} o Phi`.
#[derive(Debug, Clone, PartialEq)]
pub struct HermiteCoeffs {
    pub values: Vec<f64>,
    /// `c_k / sqrt((k-1)!)`, the overflow-free form.
    pub scaled: Vec<f64>,
}

impl HermiteCoeffs {
    pub fn k(&self) -> usize {
        self.values.len()
    }

    /// `sum_{k<=K} c_k^2 / k!`.
    pub fn variance_partial_sum(&self) -> f64 {
        self.scaled
            .iter()
            .enumerate()
            .map(|(i, s)| s * s / (i + 1) as f64)
            .sum()
    }
}

/// Coefficients `c_1..c_K` from the threshold table, with the three-term
/// recurrence run on `H_k / sqrt(k!)` per table entry.
pub fn hermite_coeffs(table: &ThresholdTable, k_max: usize) -> Result<HermiteCoeffs> {
    let mut scaled = vec![0.0; k_max];
    for &q in &table.q_values {
        let w = INV_SQRT_2PI * (-0.5 * q * q).exp();
        // h_m = H_m(q) / sqrt(m!)
        let mut h_prev = 0.0;
        let mut h = 1.0;
        for (m, slot) in scaled.iter_mut().enumerate() {
            *slot += w * h;
            let next = (q * h - (m as f64).sqrt() * h_prev) / ((m + 1) as f64).sqrt();
            h_prev = h;
            h = next;
        }
    }
    let mut values = Vec::with_capacity(k_max);
    for (m, &s) in scaled.iter().enumerate() {
        let log_mag = s.abs().ln() + 0.5 * libm::lgamma(m as f64 + 1.0);
        if log_mag > 300.0 * std::f64::consts::LN_10 {
            return Err(Error::Overflow(format!(
                "Hermite coefficient c_{} exceeds 1e300",
                m + 1
            )));
        }
        values.push(s * (0.5 * libm::lgamma(m as f64 + 1.0)).exp());
    }
    Ok(HermiteCoeffs { values, scaled })
}

/// Single coefficient `c_k`, `k >= 1`.
pub fn hermite_coeff(table: &ThresholdTable, k: usize) -> Result<f64> {
    if k == 0 {
        return Err(Error::Domain("Hermite coefficient index starts at 1".into()));
    }
    Ok(hermite_coeffs(table, k)?.values[k - 1])
}

/// Truncated series `sum_{k<=K} c_ik c_jk u^k / k!`.
pub fn hermite_link_series(ci: &HermiteCoeffs, cj: &HermiteCoeffs, u: f64) -> f64 {
    let mut total = 0.0;
    let mut pow = 1.0;
    for (m, (a, b)) in ci.scaled.iter().zip(&cj.scaled).enumerate() {
        pow *= u;
        // c_k^2/k! = scaled^2 / k with k = m + 1
        total += a * b * pow / (m + 1) as f64;
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn bern_half() -> LinkContext {
        let b = MarginalSpec::bernoulli(0.5).unwrap();
        LinkContext::new(b.clone(), b).unwrap()
    }

    #[test]
    fn hermite_anchors() {
        let t = MarginalSpec::bernoulli(0.5).unwrap().threshold_table(1e-14).unwrap();
        assert_abs_diff_eq!(hermite_coeff(&t, 1).unwrap(), INV_SQRT_2PI, epsilon = 1e-15);
        assert_abs_diff_eq!(hermite_coeff(&t, 2).unwrap(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(hermite_coeff(&t, 3).unwrap(), -INV_SQRT_2PI, epsilon = 1e-15);
        assert!(hermite_coeff(&t, 0).is_err());
    }

    #[test]
    fn derivative_anchors() {
        let ctx = bern_half();
        assert_abs_diff_eq!(ctx.link_deriv(0.0).unwrap(), 1.0 / (2.0 * PI), epsilon = 1e-15);
        assert_abs_diff_eq!(ctx.link_deriv(0.5).unwrap(), 0.183_776_298_473_930_7, epsilon = 1e-12);
        assert_abs_diff_eq!(ctx.link_deriv2(0.0).unwrap(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(ctx.link_deriv2(0.5).unwrap(), 0.122_517_532_3, epsilon = 1e-10);
        assert!(ctx.link_deriv(1.0).is_err());
        assert!(ctx.link_deriv2(0.999_999_9).is_err());
    }

    #[test]
    fn derivative_at_zero_separates() {
        // at u = 0 the kernel factorizes into m_i^(0)(1) m_j^(0)(1) * 2 pi
        let a = MarginalSpec::poisson(2.0).unwrap();
        let b = MarginalSpec::binomial(3, 0.4).unwrap();
        let ctx = LinkContext::new(a.clone(), b.clone()).unwrap();
        let expect = a.moment_m(0, 1.0).unwrap() * b.moment_m(0, 1.0).unwrap();
        assert_abs_diff_eq!(ctx.link_deriv(0.0).unwrap(), expect, epsilon = 1e-12);
    }

    #[test]
    fn eval_anchors() {
        let ctx = bern_half();
        assert_eq!(ctx.link_eval(0.0).unwrap(), 0.0);
        assert_abs_diff_eq!(ctx.link_eval(0.5).unwrap(), 1.0 / 12.0, epsilon = 1e-12);
        assert_abs_diff_eq!(ctx.link_eval(1.0).unwrap(), 0.25, epsilon = 1e-12);
        assert_abs_diff_eq!(ctx.link_eval(-1.0).unwrap(), -0.25, epsilon = 1e-12);
        let diag = LinkContext::diagonal(MarginalSpec::bernoulli(0.5).unwrap()).unwrap();
        assert_abs_diff_eq!(diag.link_eval(1.0).unwrap(), 0.25, epsilon = 1e-15);
        assert!(ctx.link_eval(1.5).is_err());
    }

    #[test]
    fn link_at_one_anchors() {
        assert_abs_diff_eq!(
            link_at_one(&MarginalSpec::bernoulli(0.3).unwrap()).unwrap(),
            0.21,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            link_at_one(&MarginalSpec::poisson(2.0).unwrap()).unwrap(),
            2.0,
            epsilon = 1e-10
        );
        assert_abs_diff_eq!(
            link_at_one(&MarginalSpec::binomial(4, 0.5).unwrap()).unwrap(),
            1.0,
            epsilon = 1e-14
        );
    }

    #[test]
    fn diagonal_quadrature_reaches_variance() {
        let spec = MarginalSpec::poisson(1.5).unwrap();
        let ctx = LinkContext::diagonal(spec.clone()).unwrap();
        let by_quad = ctx.integrate_phi(0.0, std::f64::consts::FRAC_PI_2).unwrap();
        assert_abs_diff_eq!(by_quad, 1.5, epsilon = 1e-9);
    }

    #[test]
    fn invert_anchors() {
        let ctx = bern_half();
        assert_abs_diff_eq!(ctx.link_invert(1.0 / 12.0), 0.5, epsilon = 1e-9);
        assert_eq!(ctx.link_invert(0.0), 0.0);
        assert_eq!(ctx.link_invert(0.3), ctx.u_clamp());
        assert_eq!(ctx.link_invert(-7.0), -ctx.u_clamp());
    }

    #[test]
    fn inverse_derivative_anchors() {
        let ctx = bern_half();
        let (g1, g2) = ctx.inverse_link_derivs(0.0).unwrap();
        assert_abs_diff_eq!(g1, 2.0 * PI, epsilon = 1e-12);
        assert_abs_diff_eq!(g2, 0.0, epsilon = 1e-12);
        let ctx = LinkContext::new(
            MarginalSpec::poisson(1.0).unwrap(),
            MarginalSpec::bernoulli(0.3).unwrap(),
        )
        .unwrap();
        let x = 0.1;
        let (g1, _) = ctx.inverse_link_derivs(x).unwrap();
        assert_abs_diff_eq!(g1 * ctx.link_deriv(ctx.link_invert(x)).unwrap(), 1.0, epsilon = 1e-10);
        assert!(ctx.inverse_link_derivs(10.0).is_err());
    }

    #[test]
    fn hermite_series_agrees_where_truncation_is_negligible() {
        let a = MarginalSpec::poisson(3.0).unwrap();
        let b = MarginalSpec::neg_binomial(2, 0.5).unwrap();
        let ctx = LinkContext::new(a.clone(), b.clone()).unwrap();
        let ca = hermite_coeffs(ctx.table_i(), 120).unwrap();
        let cb = hermite_coeffs(ctx.table_j(), 120).unwrap();
        for &u in &[-0.8, -0.5, -0.1, 0.2, 0.6, 0.8] {
            let quad = ctx.link_eval(u).unwrap();
            let series = hermite_link_series(&ca, &cb, u);
            assert!((quad - series).abs() < 1e-8, "u={u}: {quad} vs {series}");
        }
    }
}
