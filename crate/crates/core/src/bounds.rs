//! Theoretical constants of the concentration bounds and of the LASSO
//! analysis for a latent VAR.
//!
//! Suprema over the parameter box `Theta(eps) = {theta : |theta - theta_i|_max <= eps}`
//! are approximated on a tensor grid; such values lower-bound the true
//! suprema and are flagged with `grid_sup`.

use std::f64::consts::PI;

use nalgebra::{Complex, DMatrix, SymmetricEigen};
use serde::Serialize;

use crate::acvf::{sparse_norm, theoretical_count_acvf, BlockAcvf, PairContexts, SparseNormMode};
use crate::error::{Error, Result};
use crate::linalg;
use crate::marginals::{Family, MarginalSpec, ThresholdTable, MOMENT_TAIL_TOL};
use crate::normal::INV_SQRT_2PI;
use crate::var_model::{check_causal, LatentAcvf, VarModel};

/// Default number of grid points per parameter.
pub const DEFAULT_GRID: usize = 5;
/// Cap on `c(delta_tilde)`.
pub const C_CAP: f64 = 1.0 - 1e-6;
const MAX_GRID_POINTS: usize = 100_000;
const FREQ_GRID: usize = 2048;
const SPECTRAL_FREQ_GRID: usize = 256;
const SPECTRAL_SUPPORT_BUDGET: u128 = 100_000;

/// Threshold-table data of one marginal at one grid point.
#[derive(Debug, Clone)]
struct GridPoint {
    q: Vec<f64>,
    grad_l1: Vec<f64>,
    delta: f64,
}

impl GridPoint {
    fn new(spec: &MarginalSpec) -> Result<Self> {
        let tab = spec.tabulate()?;
        let table = ThresholdTable::from_tabulation(&tab, MOMENT_TAIL_TOL)?;
        let grad_l1 = (0..table.len()).map(|n| tab.grad_l1(n)).collect();
        let delta = (0..tab.len()).map(|n| n as f64 * tab.grad_l1(n)).sum();
        Ok(Self {
            q: table.q_values,
            grad_l1,
            delta,
        })
    }

    fn m(&self, k: u32, u: f64) -> f64 {
        INV_SQRT_2PI
            * self
                .q
                .iter()
                .map(|&q| (-q * q / (2.0 * u)).exp() * q.abs().powi(k as i32))
                .sum::<f64>()
    }

    fn mu(&self, k: u32, u: f64) -> f64 {
        self.q
            .iter()
            .zip(&self.grad_l1)
            .filter(|&(&q, &g)| g > 0.0 && (k == 0 || q != 0.0))
            .map(|(&q, &g)| (0.5 * q * q * (1.0 - 1.0 / u)).exp() * g * q.abs().powi(k as i32))
            .sum()
    }
}

/// Grid over `Theta(eps)` for every marginal of a panel.
#[derive(Debug, Clone)]
pub struct MomentGrid {
    points: Vec<Vec<GridPoint>>,
    eps: f64,
    grid: usize,
}

fn linspace(center: f64, eps: f64, n: usize) -> Vec<f64> {
    if n <= 1 || eps == 0.0 {
        return vec![center];
    }
    (0..n)
        .map(|k| center - eps + 2.0 * eps * k as f64 / (n - 1) as f64)
        .collect()
}

fn box_specs(spec: &MarginalSpec, eps: f64, grid: usize) -> Result<Vec<MarginalSpec>> {
    let theta = spec.theta();
    let n_weights = match spec.family() {
        Family::MixturePoisson { weights, .. } => weights.len(),
        _ => 0,
    };
    // every corner of the box must be admissible
    for (j, &t) in theta.iter().enumerate() {
        for v in [t - eps, t + eps] {
            let ok = if j < n_weights {
                v > 0.0 && v < 1.0
            } else {
                let mut probe = theta.clone();
                probe[j] = v;
                if n_weights > 0 {
                    let s: f64 = probe[..n_weights].iter().sum();
                    probe[..n_weights].iter_mut().for_each(|w| *w /= s);
                }
                spec.with_theta(&probe).is_ok()
            };
            if !ok {
                return Err(Error::Domain(format!(
                    "Theta(eps) box with eps = {eps} leaves the {} parameter domain",
                    spec.name()
                )));
            }
        }
    }
    let axes: Vec<Vec<f64>> = theta.iter().map(|&t| linspace(t, eps, grid)).collect();
    let total: usize = axes.iter().map(Vec::len).product();
    if total > MAX_GRID_POINTS {
        return Err(Error::Budget {
            needed: total as u128,
            budget: MAX_GRID_POINTS as u128,
        });
    }
    let mut out = Vec::with_capacity(total);
    let mut idx = vec![0usize; axes.len()];
    loop {
        let mut point: Vec<f64> = idx.iter().zip(&axes).map(|(&i, a)| a[i]).collect();
        if n_weights > 0 {
            // weights are renormalized onto the simplex
            let s: f64 = point[..n_weights].iter().sum();
            point[..n_weights].iter_mut().for_each(|w| *w /= s);
        }
        out.push(spec.with_theta(&point)?);
        let mut pos = 0;
        loop {
            if pos == idx.len() {
                return Ok(out);
            }
            idx[pos] += 1;
            if idx[pos] < axes[pos].len() {
                break;
            }
            idx[pos] = 0;
            pos += 1;
        }
    }
}

impl MomentGrid {
    pub fn new(specs: &[MarginalSpec], eps: f64, grid: usize) -> Result<Self> {
        if !(eps >= 0.0) {
            return Err(Error::Domain(format!("eps must be nonnegative, got {eps}")));
        }
        let points = specs
            .iter()
            .map(|spec| {
                box_specs(spec, eps, grid)?
                    .iter()
                    .map(GridPoint::new)
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { points, eps, grid })
    }

    /// True when some sup was taken over more than the centre point.
    pub fn grid_sup(&self) -> bool {
        self.eps > 0.0 && self.grid > 1
    }

    fn sup(&self, f: impl Fn(&GridPoint) -> f64) -> f64 {
        self.points.iter().flatten().map(f).fold(f64::NEG_INFINITY, f64::max)
    }

    /// `M(c, eps)`.
    pub fn m_big(&self, c: f64) -> f64 {
        self.sup(|g| g.m(0, 1.0 + c).max(g.m(3, 1.0 + c)))
    }

    /// `mu(c, eps)`.
    pub fn mu_big(&self, c: f64) -> f64 {
        self.sup(|g| g.mu(0, 1.0 + c).max(g.mu(3, 1.0 + c)))
    }

    /// `M_1(c, eps)`.
    pub fn m1(&self, c: f64) -> f64 {
        self.sup(|g| g.m(0, 1.0 - c).powi(-2))
    }

    /// `M_2(c, eps)`.
    pub fn m2(&self, c: f64) -> f64 {
        let v = 1.0 / (1.0 - c);
        self.sup(|g| {
            let den = g.m(0, 1.0 - c).powi(4);
            g.m(0, v).powi(2).max(g.m(2, v).powi(2)) / den
        })
    }

    /// `Delta(eps)`.
    pub fn delta_eps(&self) -> f64 {
        self.sup(|g| g.delta)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MomentSuprema {
    pub m_big: f64,
    pub mu_big: f64,
    pub m1: f64,
    pub m2: f64,
    pub delta_eps: f64,
    pub grid_sup: bool,
}

fn check_c(c: f64) -> Result<()> {
    if c > 0.0 && c < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("c_Z must lie in (0,1), got {c}")))
    }
}

/// `M, mu, M_1, M_2` at `c_z` and `Delta(eps)`.
pub fn moment_suprema(specs: &[MarginalSpec], c_z: f64, eps: f64, grid: usize) -> Result<MomentSuprema> {
    check_c(c_z)?;
    let g = MomentGrid::new(specs, eps, grid)?;
    Ok(MomentSuprema {
        m_big: g.m_big(c_z),
        mu_big: g.mu_big(c_z),
        m1: g.m1(c_z),
        m2: g.m2(c_z),
        delta_eps: g.delta_eps(),
        grid_sup: g.grid_sup(),
    })
}

/// Inputs and composites of the concentration constant `Q(Gamma_Z)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundConstants {
    pub c_z: f64,
    pub eps: f64,
    pub delta_tilde: f64,
    pub eps_tilde: f64,
    pub s: usize,
    pub gamma_norm_s: f64,
    pub gamma_norm_lower_bound: bool,
    pub m_big: f64,
    pub mu_big: f64,
    pub m1: f64,
    pub m2: f64,
    pub delta_eps: f64,
    pub c_delta: f64,
    pub c_delta_capped: bool,
    pub c_u: f64,
    pub d_const: f64,
    pub r_const: f64,
    pub s_const: f64,
    pub t_const: f64,
    pub u_const: f64,
    pub q_const: f64,
    pub q1: f64,
    pub q2: f64,
    pub grid_sup: bool,
}

/// `c(dt)`: the largest `|g_ij(Gamma_X,ij(h) +- 2 dt)|` outside the lag-0
/// diagonal, capped at [`C_CAP`].
pub fn c_of_delta(count_acvf: &BlockAcvf, ctx: &PairContexts, delta_tilde: f64) -> (f64, bool) {
    let mut c: f64 = 0.0;
    let mut capped = false;
    for (h, g) in count_acvf.lags.iter().enumerate() {
        for i in 0..count_acvf.d {
            for j in 0..count_acvf.d {
                if h == 0 && i == j {
                    continue;
                }
                let link = ctx.get(i, j);
                for x in [g[(i, j)] + 2.0 * delta_tilde, g[(i, j)] - 2.0 * delta_tilde] {
                    let u = link.link_invert(x).abs();
                    if u >= link.u_clamp() {
                        capped = true;
                    }
                    c = c.max(u.min(C_CAP));
                }
            }
        }
    }
    (c, capped)
}

fn t_const(grid: &MomentGrid, c: f64) -> f64 {
    6.0 / (1.0 - c * c) * grid.m1(c) * grid.m2(c)
}

/// Sparse norm with heuristic fallback past the exact budget.
pub fn sparse_norm_auto(a: &DMatrix<f64>, s: usize) -> Result<(f64, bool)> {
    match sparse_norm(a, s, SparseNormMode::Exact) {
        Ok(v) => Ok((v.value, v.lower_bound)),
        Err(Error::Budget { .. }) => {
            let v = sparse_norm(a, s, SparseNormMode::Heuristic)?;
            Ok((v.value, v.lower_bound))
        }
        Err(e) => Err(e),
    }
}

/// All constants of `Q(Gamma_Z) = 4 max{D, 4R, 2U, T} max{S^2, 1}`.
#[allow(clippy::too_many_arguments)]
pub fn q_of_gamma(
    specs: &[MarginalSpec],
    acvf_z: &LatentAcvf,
    s: usize,
    c_z: f64,
    eps: f64,
    delta_tilde: f64,
    eps_tilde: f64,
    grid: usize,
) -> Result<BoundConstants> {
    check_c(c_z)?;
    if specs.len() != acvf_z.d() {
        return Err(Error::Dimension(format!(
            "{} specs for dimension {}",
            specs.len(),
            acvf_z.d()
        )));
    }
    let g = MomentGrid::new(specs, eps, grid)?;
    let g0 = MomentGrid::new(specs, 0.0, 1)?;
    let big = BlockAcvf::from_lags(acvf_z.lags.clone(), 0)?;
    let (norm, norm_lb) = sparse_norm_auto(&big.big, s)?;

    let count = theoretical_count_acvf(acvf_z, specs)?;
    let ctx = PairContexts::new(specs)?;

    let one_minus = 1.0 - c_z * c_z;
    let d_const = g.m1(0.5).sqrt() * 2.0 * (3.0 * g.delta_eps()).max(1.0);
    let r_of =
        |grid: &MomentGrid| (8.0 * PI * grid.m1(0.0) + 24.0 * PI / (one_minus * one_minus) * grid.m2(c_z)) * norm;
    let r_const = r_of(&g);
    let m_big = g.m_big(c_z);
    let mu_big = g.mu_big(c_z);
    let s_const = 12.0 / one_minus.powf(3.5) * m_big * mu_big * norm;
    let s2 = (s_const * s_const).max(1.0);

    let (c_delta, capped_t) = c_of_delta(&count, &ctx, delta_tilde);
    let t = t_const(&g, c_delta);
    let (c_u, capped_u) = c_of_delta(&count, &ctx, s2 * eps_tilde);
    let u = t_const(&g, c_u);

    let q_const = 4.0 * d_const.max(4.0 * r_const).max(2.0 * u).max(t) * s2;
    let q1 = 4.0 * (4.0 * r_const).max(2.0 * u).max(t) * s2;
    let q2 = (2.0 * r_of(&g0)).max(t_const(&g0, c_delta));

    Ok(BoundConstants {
        c_z,
        eps,
        delta_tilde,
        eps_tilde,
        s,
        gamma_norm_s: norm,
        gamma_norm_lower_bound: norm_lb,
        m_big,
        mu_big,
        m1: g.m1(c_z),
        m2: g.m2(c_z),
        delta_eps: g.delta_eps(),
        c_delta,
        c_delta_capped: capped_t || capped_u,
        c_u,
        d_const,
        r_const,
        s_const,
        t_const: t,
        u_const: u,
        q_const,
        q1,
        q2,
        grid_sup: g.grid_sup(),
    })
}

/// Quantities of the LASSO analysis for a causal latent VAR.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VarBoundQuantities {
    pub mu_max: f64,
    pub lambda_min_noise: f64,
    pub alpha: f64,
    pub nu: f64,
    pub tau: f64,
    pub q_beta0: f64,
    pub lambda_threshold: f64,
    /// `c0(s) = s`.
    pub c0_s: f64,
    /// `2 pi sup_w ||f_Z(w)||_s`, the spectral alternative for `c0(s)`.
    pub c0_spectral: f64,
    /// Set when the spectral value used the full spectral norm (support budget exceeded).
    pub c0_spectral_full_norm: bool,
    pub q: usize,
    pub n: usize,
}

fn poly_at(model: &VarModel, w: f64) -> DMatrix<Complex<f64>> {
    // A(z) = I - sum_j A_j z^j at z = e^{iw}
    let d = model.d();
    let mut m = DMatrix::<Complex<f64>>::identity(d, d);
    for (j, a) in model.coeffs().iter().enumerate() {
        let z = Complex::from_polar(1.0, w * (j + 1) as f64);
        m -= a.map(|v| Complex::new(v, 0.0)) * z;
    }
    m
}

fn sigma_max_sq(model: &VarModel, w: f64) -> f64 {
    let sv = poly_at(model, w).singular_values();
    let s = sv.iter().fold(0.0, |acc: f64, v| acc.max(*v));
    s * s
}

/// `mu_max(A) = max_w sigma_max(A(e^{iw}))^2`: grid maximum refined by golden section.
pub fn mu_max(model: &VarModel) -> f64 {
    let step = PI / FREQ_GRID as f64;
    let (mut best_w, mut best) = (0.0, f64::NEG_INFINITY);
    for k in 0..=FREQ_GRID {
        let w = k as f64 * step;
        let v = sigma_max_sq(model, w);
        if v > best {
            best = v;
            best_w = w;
        }
    }
    let (mut a, mut b) = ((best_w - step).max(0.0), (best_w + step).min(PI));
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..60 {
        let x1 = b - ratio * (b - a);
        let x2 = a + ratio * (b - a);
        if sigma_max_sq(model, x1) >= sigma_max_sq(model, x2) {
            b = x2;
        } else {
            a = x1;
        }
    }
    best.max(sigma_max_sq(model, 0.5 * (a + b)))
}

fn hermitian_sparse_norm(m: &DMatrix<Complex<f64>>, s: usize) -> (f64, bool) {
    let d = m.nrows();
    let k = (2 * s).min(d);
    let lmax = |sub: DMatrix<Complex<f64>>| {
        SymmetricEigen::new(sub)
            .eigenvalues
            .iter()
            .fold(0.0, |acc: f64, v| acc.max(v.abs()))
    };
    if k == d || linalg::binomial(d, k) > SPECTRAL_SUPPORT_BUDGET {
        return (lmax(m.clone()), k != d);
    }
    let mut best: f64 = 0.0;
    linalg::for_each_subset(d, k, |idx| {
        let sub = DMatrix::from_fn(k, k, |a, b| m[(idx[a], idx[b])]);
        best = best.max(lmax(sub));
    });
    (best, false)
}

/// `2 pi sup_w ||f_Z(w)||_s` with `2 pi f_Z(w) = A(e^{-iw})^{-1} Sigma A(e^{-iw})^{-*}`.
pub fn spectral_c0(model: &VarModel, s: usize) -> Result<(f64, bool)> {
    let sigma = model.noise_cov().map(|v| Complex::new(v, 0.0));
    let mut best: f64 = 0.0;
    let mut full = false;
    for k in 0..=SPECTRAL_FREQ_GRID {
        let w = PI * k as f64 / SPECTRAL_FREQ_GRID as f64;
        let inv = poly_at(model, -w)
            .try_inverse()
            .ok_or_else(|| Error::Degenerate("VAR polynomial is singular on the unit circle".into()))?;
        let f = &inv * &sigma * inv.adjoint();
        let f = (&f + f.adjoint()) * Complex::new(0.5, 0.0);
        let (v, flag) = hermitian_sparse_norm(&f, s);
        best = best.max(v);
        full |= flag;
    }
    Ok((best, full))
}

/// `alpha, tau, nu, Q(beta0)` and the penalty threshold for sample size `n`.
pub fn var_bound_quantities(model: &VarModel, s: usize, q_gamma: f64, n: usize) -> Result<VarBoundQuantities> {
    let causal = check_causal(model);
    if !causal.causal {
        return Err(Error::NotCausal(causal.spectral_radius));
    }
    if n == 0 || s == 0 {
        return Err(Error::Domain("n and s must be positive".into()));
    }
    let (p, d) = (model.p(), model.d());
    let mu = mu_max(model);
    let lmin = linalg::min_eigenvalue(model.noise_cov()).max(0.0);
    let c0 = s as f64;
    let alpha = lmin / (2.0 * mu);
    let nu = lmin / (54.0 * mu * q_gamma * c0);
    let tau = alpha * nu.powi(-2).max(1.0) * ((d * p) as f64).ln() / n as f64;
    let b0 = model.stacked_transpose();
    let col_max = (0..d).map(|j| b0.column(j).norm()).fold(1.0, f64::max);
    let q_beta0 = 2.0 * col_max * q_gamma * c0;
    let q = p * d * d;
    let lambda_threshold = 4.0 * q_beta0 * ((q as f64).ln() / n as f64).sqrt();
    let (c0_spectral, full) = spectral_c0(model, s)?;
    Ok(VarBoundQuantities {
        mu_max: mu,
        lambda_min_noise: lmin,
        alpha,
        nu,
        tau,
        q_beta0,
        lambda_threshold,
        c0_s: c0,
        c0_spectral,
        c0_spectral_full_norm: full,
        q,
        n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn bern_panel(d: usize) -> Vec<MarginalSpec> {
        vec![MarginalSpec::bernoulli(0.5).unwrap(); d]
    }

    #[test]
    fn bernoulli_suprema() {
        for &c in &[0.1, 0.5, 0.9] {
            let m = moment_suprema(&bern_panel(2), c, 0.0, DEFAULT_GRID).unwrap();
            assert_abs_diff_eq!(m.m_big, INV_SQRT_2PI, epsilon = 1e-12);
            assert_abs_diff_eq!(m.m1, 2.0 * PI, epsilon = 1e-10);
            assert_abs_diff_eq!(m.mu_big, 1.0, epsilon = 1e-12);
            assert_eq!(m.delta_eps, 0.0);
            assert!(!m.grid_sup);
        }
        assert!(moment_suprema(&bern_panel(1), 1.0, 0.0, 1).is_err());
        assert!(moment_suprema(&bern_panel(1), 0.5, 0.6, 3).is_err());
    }

    #[test]
    fn suprema_grow_with_eps() {
        let specs = vec![
            MarginalSpec::poisson(2.0).unwrap(),
            MarginalSpec::binomial(4, 0.3).unwrap(),
        ];
        let mut prev = moment_suprema(&specs, 0.4, 0.0, 5).unwrap();
        for &eps in &[0.02, 0.05, 0.1] {
            let m = moment_suprema(&specs, 0.4, eps, 5).unwrap();
            assert!(m.grid_sup);
            assert!(m.m_big >= prev.m_big && m.mu_big >= prev.mu_big);
            assert!(m.m1 >= prev.m1 && m.m2 >= prev.m2 && m.delta_eps >= prev.delta_eps);
            prev = m;
        }
    }

    #[test]
    fn mixture_box_renormalizes_weights() {
        let mix = MarginalSpec::mixture_poisson(vec![0.4, 0.6], vec![1.0, 3.0]).unwrap();
        let g = MomentGrid::new(&[mix], 0.05, 3).unwrap();
        assert_eq!(g.points[0].len(), 81);
        assert!(g.delta_eps().is_finite());
    }

    #[test]
    fn q_of_gamma_composition() {
        let acvf = LatentAcvf {
            lags: vec![DMatrix::identity(2, 2), DMatrix::zeros(2, 2)],
            standardized: true,
        };
        let c = 0.5;
        let b = q_of_gamma(&bern_panel(2), &acvf, 1, c, 0.0, 0.01, 0.01, 1).unwrap();
        assert_abs_diff_eq!(b.gamma_norm_s, 1.0, epsilon = 1e-12);
        let s_expect = 12.0 / (1.0 - c * c).powf(3.5) * INV_SQRT_2PI * 1.0;
        assert_abs_diff_eq!(b.s_const, s_expect, epsilon = 1e-10);
        let s2 = (b.s_const * b.s_const).max(1.0);
        let q = 4.0 * b.d_const.max(4.0 * b.r_const).max(2.0 * b.u_const).max(b.t_const) * s2;
        assert_eq!(b.q_const, q);
        assert!(b.q_const >= b.q1 && b.q_const >= 4.0 * b.q2);
        // D = sqrt(2 pi) * 2 for Bernoulli
        assert_abs_diff_eq!(b.d_const, 2.0 * (2.0 * PI).sqrt(), epsilon = 1e-10);
    }

    #[test]
    fn r_const_monotone_in_c() {
        let specs = vec![
            MarginalSpec::poisson(1.0).unwrap(),
            MarginalSpec::bernoulli(0.3).unwrap(),
        ];
        let acvf = LatentAcvf {
            lags: vec![DMatrix::identity(2, 2), DMatrix::identity(2, 2) * 0.2],
            standardized: true,
        };
        let mut prev = 0.0;
        for k in 1..10 {
            let c = 0.1 * k as f64;
            let b = q_of_gamma(&specs, &acvf, 1, c, 0.0, 0.01, 0.01, 1).unwrap();
            assert!(b.r_const >= prev);
            prev = b.r_const;
        }
    }

    #[test]
    fn var_quantities_anchors() {
        let m = VarModel::new(vec![DMatrix::identity(2, 2) * 0.5], DMatrix::identity(2, 2) * 0.75).unwrap();
        assert_abs_diff_eq!(mu_max(&m), 2.25, epsilon = 1e-10);
        let v = var_bound_quantities(&m, 1, 10.0, 1000).unwrap();
        assert_abs_diff_eq!(v.alpha, 1.0 / 6.0, epsilon = 1e-10);
        assert_eq!(v.q, 4);
        // unit-norm columns of B0 are dominated by the floor of 1
        assert_abs_diff_eq!(v.q_beta0, 2.0 * 10.0, epsilon = 1e-12);
        assert_abs_diff_eq!(
            v.lambda_threshold,
            4.0 * 20.0 * (4f64.ln() / 1000.0).sqrt(),
            epsilon = 1e-12
        );
        // AR(1) spectral peak at w = 0: 0.75 / (1 - 0.5)^2
        assert_abs_diff_eq!(v.c0_spectral, 3.0, epsilon = 1e-10);

        let w = VarModel::new(
            vec![DMatrix::zeros(2, 2)],
            DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![0.5, 2.0])),
        )
        .unwrap();
        assert_abs_diff_eq!(mu_max(&w), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(
            var_bound_quantities(&w, 1, 1.0, 10).unwrap().alpha,
            0.25,
            epsilon = 1e-12
        );
        let bad = VarModel::new(vec![DMatrix::identity(1, 1)], DMatrix::identity(1, 1)).unwrap();
        assert!(var_bound_quantities(&bad, 1, 1.0, 10).is_err());
    }
}
