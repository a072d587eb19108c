//! Latent Gaussian VAR(p) process and the count transform `X = G(Z)`.

use nalgebra::DMatrix;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, max_abs};
use crate::marginals::{MarginalSpec, MOMENT_TAIL_TOL};

/// Spectral radius at or above `1 - CAUSAL_MARGIN` counts as non-causal.
pub const CAUSAL_MARGIN: f64 = 1e-9;
const LYAP_TOL: f64 = 1e-12;
const LYAP_MAX_ITER: usize = 200;
const LYAP_RESIDUAL_TOL: f64 = 1e-9;

/// `Z_t = sum_u A_u Z_{t-u} + eps_t`, `eps_t ~ N(0, noise_cov)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "VarModelRepr", into = "VarModelRepr")]
pub struct VarModel {
    coeffs: Vec<DMatrix<f64>>,
    noise_cov: DMatrix<f64>,
}

#[derive(Serialize, Deserialize)]
struct VarModelRepr {
    coeffs: Vec<Vec<Vec<f64>>>,
    noise_cov: Vec<Vec<f64>>,
}

impl TryFrom<VarModelRepr> for VarModel {
    type Error = Error;
    fn try_from(r: VarModelRepr) -> Result<Self> {
        let coeffs = r
            .coeffs
            .iter()
            .map(|a| linalg::from_rows(a))
            .collect::<Result<Vec<_>>>()?;
        VarModel::new(coeffs, linalg::from_rows(&r.noise_cov)?)
    }
}

impl From<VarModel> for VarModelRepr {
    fn from(m: VarModel) -> Self {
        Self {
            coeffs: m.coeffs.iter().map(linalg::to_rows).collect(),
            noise_cov: linalg::to_rows(&m.noise_cov),
        }
    }
}

/// Outcome of the companion-matrix stability check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CausalCheck {
    pub causal: bool,
    pub spectral_radius: f64,
}

/// Latent autocovariances `Gamma_Z(0..=L)` with `Gamma(h) = E[Z_t Z_{t-h}']`.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentAcvf {
    pub lags: Vec<DMatrix<f64>>,
    pub standardized: bool,
}

impl LatentAcvf {
    pub fn d(&self) -> usize {
        self.lags.first().map_or(0, |m| m.nrows())
    }

    pub fn max_lag(&self) -> usize {
        self.lags.len().saturating_sub(1)
    }

    /// `Gamma(h)` for any integer lag, using `Gamma(-h) = Gamma(h)'`.
    pub fn at(&self, h: i64) -> DMatrix<f64> {
        if h >= 0 {
            self.lags[h as usize].clone()
        } else {
            self.lags[(-h) as usize].transpose()
        }
    }

    /// Largest absolute entry outside the lag-0 diagonal.
    pub fn c_z(&self) -> f64 {
        let mut c: f64 = 0.0;
        for (h, m) in self.lags.iter().enumerate() {
            for i in 0..m.nrows() {
                for j in 0..m.ncols() {
                    if h > 0 || i != j {
                        c = c.max(m[(i, j)].abs());
                    }
                }
            }
        }
        c
    }
}

/// A standardized model together with its unit-variance autocovariances.
#[derive(Debug, Clone)]
pub struct Standardized {
    pub model: VarModel,
    pub acvf: LatentAcvf,
}

impl VarModel {
    pub fn new(coeffs: Vec<DMatrix<f64>>, noise_cov: DMatrix<f64>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::Dimension("VAR order must be at least 1".into()));
        }
        let d = noise_cov.nrows();
        linalg::check_symmetric(&noise_cov, 1e-12, "noise covariance")?;
        if d == 0 {
            return Err(Error::Dimension("dimension must be at least 1".into()));
        }
        for (u, a) in coeffs.iter().enumerate() {
            if a.nrows() != d || a.ncols() != d {
                return Err(Error::Dimension(format!(
                    "A_{} is {}x{}, expected {d}x{d}",
                    u + 1,
                    a.nrows(),
                    a.ncols()
                )));
            }
        }
        let lmin = linalg::min_eigenvalue(&noise_cov);
        if lmin < -1e-10 {
            return Err(Error::Domain(format!(
                "noise covariance is not PSD (min eigenvalue {lmin:e})"
            )));
        }
        Ok(Self { coeffs, noise_cov })
    }

    pub fn p(&self) -> usize {
        self.coeffs.len()
    }

    pub fn d(&self) -> usize {
        self.noise_cov.nrows()
    }

    pub fn coeffs(&self) -> &[DMatrix<f64>] {
        &self.coeffs
    }

    pub fn noise_cov(&self) -> &DMatrix<f64> {
        &self.noise_cov
    }

    /// `pd x pd` companion matrix.
    pub fn companion(&self) -> DMatrix<f64> {
        let (p, d) = (self.p(), self.d());
        let mut f = DMatrix::zeros(p * d, p * d);
        for (u, a) in self.coeffs.iter().enumerate() {
            f.view_mut((0, u * d), (d, d)).copy_from(a);
        }
        for r in 1..p {
            for i in 0..d {
                f[(r * d + i, (r - 1) * d + i)] = 1.0;
            }
        }
        f
    }

    /// Stacked `B0 = [A_1'; ...; A_p']`, a `pd x d` matrix.
    pub fn stacked_transpose(&self) -> DMatrix<f64> {
        let (p, d) = (self.p(), self.d());
        let mut b = DMatrix::zeros(p * d, d);
        for (u, a) in self.coeffs.iter().enumerate() {
            b.view_mut((u * d, 0), (d, d)).copy_from(&a.transpose());
        }
        b
    }
}

pub fn check_causal(model: &VarModel) -> CausalCheck {
    let radius = model
        .companion()
        .complex_eigenvalues()
        .iter()
        .fold(0.0, |acc: f64, z| acc.max(z.norm()));
    CausalCheck {
        causal: radius < 1.0 - CAUSAL_MARGIN,
        spectral_radius: radius,
    }
}

fn require_causal(model: &VarModel) -> Result<()> {
    let c = check_causal(model);
    if c.causal {
        Ok(())
    } else {
        Err(Error::NotCausal(c.spectral_radius))
    }
}

/// `Gamma(0..=max_lag)` of the stationary solution.
pub fn stationary_acvf(model: &VarModel, max_lag: usize) -> Result<LatentAcvf> {
    require_causal(model)?;
    let (p, d) = (model.p(), model.d());
    let f = model.companion();
    let mut q = DMatrix::zeros(p * d, p * d);
    q.view_mut((0, 0), (d, d)).copy_from(model.noise_cov());

    // doubling: P_{k+1} = P_k + A_k P_k A_k', A_{k+1} = A_k^2
    let mut pm = q.clone();
    let mut a = f.clone();
    for _ in 0..LYAP_MAX_ITER {
        let inc = &a * &pm * a.transpose();
        let size = max_abs(&inc);
        pm += inc;
        a = &a * &a;
        if size < LYAP_TOL {
            break;
        }
    }
    pm = linalg::symmetrize(&pm);
    let residual = max_abs(&(&pm - &f * &pm * f.transpose() - &q));
    if residual > LYAP_RESIDUAL_TOL {
        return Err(Error::Accuracy {
            estimate: residual,
            error: residual,
        });
    }

    let mut lags: Vec<DMatrix<f64>> = Vec::with_capacity(max_lag + 1);
    for h in 0..=max_lag.min(p - 1) {
        lags.push(pm.view((0, h * d), (d, d)).into_owned());
    }
    for h in p..=max_lag {
        let mut g = DMatrix::zeros(d, d);
        for (u, au) in model.coeffs().iter().enumerate() {
            let k = h as i64 - (u as i64 + 1);
            let prev = if k >= 0 {
                lags[k as usize].clone()
            } else {
                lags[(-k) as usize].transpose()
            };
            g += au * prev;
        }
        lags.push(g);
    }
    Ok(LatentAcvf {
        lags,
        standardized: false,
    })
}

/// Rescale so that every component has unit stationary variance.
pub fn standardize(model: &VarModel, max_lag: usize) -> Result<Standardized> {
    let acvf = stationary_acvf(model, max_lag)?;
    let d = model.d();
    let mut scale = Vec::with_capacity(d);
    for i in 0..d {
        let v = acvf.lags[0][(i, i)];
        if !(v > 0.0) {
            return Err(Error::Degenerate(format!("component {i} has zero stationary variance")));
        }
        scale.push(v.sqrt());
    }
    let rescale = |m: &DMatrix<f64>, left_inv: bool, right_inv: bool| {
        DMatrix::from_fn(d, d, |i, j| {
            let l = if left_inv { 1.0 / scale[i] } else { scale[i] };
            let r = if right_inv { 1.0 / scale[j] } else { scale[j] };
            m[(i, j)] * l * r
        })
    };
    let coeffs = model.coeffs().iter().map(|a| rescale(a, true, false)).collect();
    let noise = linalg::symmetrize(&rescale(model.noise_cov(), true, true));
    let mut lags: Vec<DMatrix<f64>> = acvf.lags.iter().map(|g| rescale(g, true, true)).collect();
    lags[0] = linalg::symmetrize(&lags[0]);
    for i in 0..d {
        lags[0][(i, i)] = 1.0;
    }
    Ok(Standardized {
        model: VarModel::new(coeffs, noise)?,
        acvf: LatentAcvf {
            lags,
            standardized: true,
        },
    })
}

pub fn default_burn_in(p: usize) -> usize {
    10 * p + 500
}

/// `T x d` sample path, deterministic in `(model, t_len, seed, burn_in)`.
pub fn simulate(model: &VarModel, t_len: usize, seed: u64, burn_in: Option<usize>) -> Result<DMatrix<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    simulate_with(model, t_len, &mut rng, burn_in)
}

/// As [`simulate`], drawing from a caller-supplied generator.
pub fn simulate_with<R: Rng>(
    model: &VarModel,
    t_len: usize,
    rng: &mut R,
    burn_in: Option<usize>,
) -> Result<DMatrix<f64>> {
    require_causal(model)?;
    if t_len < 1 {
        return Err(Error::InsufficientData("T must be at least 1".into()));
    }
    let (p, d) = (model.p(), model.d());
    let burn = burn_in.unwrap_or_else(|| default_burn_in(p));
    let chol = linalg::psd_sqrt(model.noise_cov());
    let total = burn + t_len;
    // history ring of the last p states, newest first
    let mut hist = vec![vec![0.0; d]; p];
    let mut out = DMatrix::zeros(t_len, d);
    let mut eps = vec![0.0; d];
    let mut next = vec![0.0; d];
    for t in 0..total {
        for e in eps.iter_mut() {
            *e = rng.sample(StandardNormal);
        }
        for i in 0..d {
            let mut v = 0.0;
            for k in 0..d {
                v += chol[(i, k)] * eps[k];
            }
            for (u, a) in model.coeffs().iter().enumerate() {
                let z = &hist[u];
                for k in 0..d {
                    v += a[(i, k)] * z[k];
                }
            }
            next[i] = v;
        }
        hist.rotate_right(1);
        hist[0].copy_from_slice(&next);
        if t >= burn {
            for i in 0..d {
                out[(t - burn, i)] = next[i];
            }
        }
    }
    Ok(out)
}

/// `X[t,i] = F_i^{-1}(Phi(Z[t,i]))`.
pub fn transform_counts(z: &DMatrix<f64>, specs: &[MarginalSpec]) -> Result<DMatrix<u64>> {
    if specs.len() != z.ncols() {
        return Err(Error::Dimension(format!(
            "{} marginal specs for {} columns",
            specs.len(),
            z.ncols()
        )));
    }
    let tables = specs
        .iter()
        .map(|s| s.threshold_table(MOMENT_TAIL_TOL))
        .collect::<Result<Vec<_>>>()?;
    Ok(DMatrix::from_fn(z.nrows(), z.ncols(), |t, i| {
        tables[i].count_for(z[(t, i)])
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn scalar(a: &[f64], s2: f64) -> VarModel {
        VarModel::new(
            a.iter().map(|&v| DMatrix::from_element(1, 1, v)).collect(),
            DMatrix::from_element(1, 1, s2),
        )
        .unwrap()
    }

    #[test]
    fn causality_anchors() {
        let m = VarModel::new(vec![DMatrix::identity(2, 2) * 0.5], DMatrix::identity(2, 2)).unwrap();
        let c = check_causal(&m);
        assert!(c.causal);
        assert_abs_diff_eq!(c.spectral_radius, 0.5, epsilon = 1e-12);
        let c = check_causal(&scalar(&[1.0], 1.0));
        assert!(!c.causal);
        assert_abs_diff_eq!(c.spectral_radius, 1.0, epsilon = 1e-12);
        let c = check_causal(&scalar(&[0.5, 0.3], 1.0));
        let root = (0.5 + (0.25f64 + 1.2).sqrt()) / 2.0;
        assert_abs_diff_eq!(c.spectral_radius, root, epsilon = 1e-12);
    }

    #[test]
    fn acvf_anchors() {
        let m = VarModel::new(vec![DMatrix::identity(2, 2) * 0.5], DMatrix::identity(2, 2) * 0.75).unwrap();
        let g = stationary_acvf(&m, 3).unwrap();
        assert!(max_abs(&(&g.lags[0] - DMatrix::identity(2, 2))) < 1e-12);
        assert!(max_abs(&(&g.lags[1] - DMatrix::identity(2, 2) * 0.5)) < 1e-12);
        let sigma = linalg::from_rows(&[vec![1.0, 0.3], vec![0.3, 2.0]]).unwrap();
        let m = VarModel::new(vec![DMatrix::zeros(2, 2)], sigma.clone()).unwrap();
        let g = stationary_acvf(&m, 2).unwrap();
        assert!(max_abs(&(&g.lags[0] - &sigma)) < 1e-14);
        assert_eq!(max_abs(&g.lags[2]), 0.0);
        assert!(matches!(
            stationary_acvf(&scalar(&[1.0], 1.0), 1),
            Err(Error::NotCausal(_))
        ));
    }

    #[test]
    fn ar2_acvf_matches_yule_walker() {
        // scalar AR(2): rho1 = a1/(1-a2), gamma0 = s2 / (1 - a1 rho1 - a2 rho2)
        let (a1, a2) = (0.5, 0.3);
        let g = stationary_acvf(&scalar(&[a1, a2], 1.0), 4).unwrap();
        let rho1 = a1 / (1.0 - a2);
        let rho2 = a1 * rho1 + a2;
        let g0 = 1.0 / (1.0 - a1 * rho1 - a2 * rho2);
        assert_abs_diff_eq!(g.lags[0][(0, 0)], g0, epsilon = 1e-10);
        assert_abs_diff_eq!(g.lags[1][(0, 0)], rho1 * g0, epsilon = 1e-10);
        assert_abs_diff_eq!(g.lags[2][(0, 0)], rho2 * g0, epsilon = 1e-10);
        assert_abs_diff_eq!(g.lags[3][(0, 0)], (a1 * rho2 + a2 * rho1) * g0, epsilon = 1e-10);
    }

    #[test]
    fn standardize_anchors() {
        let s = standardize(&scalar(&[0.5], 1.0), 2).unwrap();
        assert_abs_diff_eq!(s.model.noise_cov()[(0, 0)], 0.75, epsilon = 1e-12);
        assert_eq!(s.acvf.lags[0][(0, 0)], 1.0);
        assert_abs_diff_eq!(s.acvf.lags[1][(0, 0)], 0.5, epsilon = 1e-12);
        // idempotent
        let again = standardize(&s.model, 2).unwrap();
        assert!(max_abs(&(&again.model.coeffs()[0] - &s.model.coeffs()[0])) < 1e-12);
        assert!(max_abs(&(again.model.noise_cov() - s.model.noise_cov())) < 1e-12);
        let direct = stationary_acvf(&s.model, 2).unwrap();
        for h in 0..3 {
            assert!(max_abs(&(&direct.lags[h] - &s.acvf.lags[h])) < 1e-10);
        }
        let degenerate = VarModel::new(vec![DMatrix::zeros(2, 2)], DMatrix::from_diagonal_element(2, 2, 0.0)).unwrap();
        assert!(matches!(standardize(&degenerate, 1), Err(Error::Degenerate(_))));
    }

    #[test]
    fn simulation_contracts() {
        let m = scalar(&[0.5], 0.75);
        let a = simulate(&m, 500, 11, None).unwrap();
        let b = simulate(&m, 500, 11, None).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, simulate(&m, 500, 12, None).unwrap());

        let t = 100_000;
        let z = simulate(&m, t, 3, None).unwrap();
        let mean = z.mean();
        let (mut c0, mut c1) = (0.0, 0.0);
        for k in 0..t {
            c0 += (z[(k, 0)] - mean).powi(2);
            if k > 0 {
                c1 += (z[(k, 0)] - mean) * (z[(k - 1, 0)] - mean);
            }
        }
        assert!((c1 / c0 - 0.5).abs() < 0.02);

        let w = VarModel::new(vec![DMatrix::zeros(2, 2)], DMatrix::identity(2, 2)).unwrap();
        let z = simulate(&w, t, 5, None).unwrap();
        for i in 0..2 {
            assert!(z.column(i).mean().abs() < 4.0 / (t as f64).sqrt());
        }
    }

    #[test]
    fn transform_anchors() {
        let b = MarginalSpec::bernoulli(0.5).unwrap();
        let z = DMatrix::from_row_slice(2, 1, &[0.0, 2.0]);
        let x = transform_counts(&z, std::slice::from_ref(&b)).unwrap();
        assert_eq!(x[(0, 0)], 0);
        assert_eq!(x[(1, 0)], 1);
        assert!(transform_counts(&z, &[b.clone(), b]).is_err());
    }

    #[test]
    fn transform_preserves_bernoulli_mean() {
        let p = 0.3;
        let t = 100_000;
        let w = VarModel::new(vec![DMatrix::zeros(1, 1)], DMatrix::identity(1, 1)).unwrap();
        let z = simulate(&w, t, 9, None).unwrap();
        let x = transform_counts(&z, &[MarginalSpec::bernoulli(p).unwrap()]).unwrap();
        let mean = x.iter().sum::<u64>() as f64 / t as f64;
        assert!((mean - p).abs() < 4.0 * (p * (1.0 - p) / t as f64).sqrt());
    }

    #[test]
    fn serde_round_trip() {
        let m = scalar(&[0.5, -0.2], 1.0);
        let json = serde_json::to_string(&m).unwrap();
        let back: VarModel = serde_json::from_str(&json).unwrap();
        assert_eq!(m, back);
        assert!(serde_json::from_str::<VarModel>(r#"{"coeffs":[[[1,2]]],"noise_cov":[[1]]}"#).is_err());
    }
}
