//! Sample and theoretical count autocovariances in block-Toeplitz form, and
//! the sparse operator norm `||A||_s = sup_{v in K(2s)} |v'Av|`.
//!
//! Lag convention: `Gamma(h) = E[X_t X_{t-h}']`. For the regression of `X_t`
//! on the frames `X_{t-1}, ..., X_{t-L}`, block `(r, s)` of the big matrix is
//! `E[X_{t-r} X_{t-s}'] = Gamma(s - r)` and block `r` of `gamma_vec` is
//! `E[X_{t-r} X_t'] = Gamma(r)'`.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg;
use crate::link::{link_at_one, LinkContext};
use crate::marginals::MarginalSpec;
use crate::rng::stream_rng;
use crate::var_model::LatentAcvf;

/// Largest number of supports enumerated by the exact sparse norm.
pub const SPARSE_NORM_BUDGET: u128 = 1_000_000;
const POWER_RESTARTS: usize = 50;
const POWER_ITERS: usize = 500;

#[derive(Debug, Clone, PartialEq)]
pub struct BlockAcvf {
    /// Number of lagged frames `L`.
    pub l: usize,
    pub d: usize,
    /// Divisor used by the sample estimate (`T - L`); zero for theoretical values.
    pub n: usize,
    /// `Gamma(0..=L)`.
    pub lags: Vec<DMatrix<f64>>,
    /// `Ld x Ld`, block `(r, s) = Gamma(s - r)`.
    pub big: DMatrix<f64>,
    /// `Ld x d`, block `r = Gamma(r)'`, `r = 1..L`.
    pub gamma_vec: DMatrix<f64>,
}

impl BlockAcvf {
    /// Assemble from `Gamma(0..=L)`.
    pub fn from_lags(lags: Vec<DMatrix<f64>>, n: usize) -> Result<Self> {
        if lags.len() < 2 {
            return Err(Error::Dimension("need lags 0..=L with L >= 1".into()));
        }
        let l = lags.len() - 1;
        let d = lags[0].nrows();
        if lags.iter().any(|g| g.nrows() != d || g.ncols() != d) {
            return Err(Error::Dimension("lag matrices must all be d x d".into()));
        }
        let mut big = DMatrix::zeros(l * d, l * d);
        for r in 0..l {
            for s in 0..l {
                let block = if s >= r {
                    lags[s - r].clone()
                } else {
                    lags[r - s].transpose()
                };
                big.view_mut((r * d, s * d), (d, d)).copy_from(&block);
            }
        }
        big = linalg::symmetrize(&big);
        let mut gamma_vec = DMatrix::zeros(l * d, d);
        for (r, g) in lags.iter().enumerate().skip(1) {
            gamma_vec.view_mut(((r - 1) * d, 0), (d, d)).copy_from(&g.transpose());
        }
        Ok(Self {
            l,
            d,
            n,
            lags,
            big,
            gamma_vec,
        })
    }

    /// `Gamma(h)` for `|h| <= L`.
    pub fn at(&self, h: i64) -> DMatrix<f64> {
        if h >= 0 {
            self.lags[h as usize].clone()
        } else {
            self.lags[(-h) as usize].transpose()
        }
    }
}

/// Count matrix as `f64`.
pub fn counts_to_f64(x: &DMatrix<u64>) -> DMatrix<f64> {
    x.map(|v| v as f64)
}

/// Sample block autocovariance from the `(L+1)`-frame construction:
/// `Gamma_hat(h) = N^{-1} sum_{t=L+1}^{T} Xc_t Xc_{t-h}'`, `N = T - L`, with
/// columns centered by their full-sample means.
pub fn sample_block_acvf(x: &DMatrix<f64>, l: usize) -> Result<BlockAcvf> {
    let (t_len, d) = (x.nrows(), x.ncols());
    if l < 1 {
        return Err(Error::Domain("L must be at least 1".into()));
    }
    if t_len <= l {
        return Err(Error::InsufficientData(format!("T = {t_len} must exceed L = {l}")));
    }
    let n = t_len - l;
    let means: Vec<f64> = (0..d).map(|i| x.column(i).mean()).collect();
    let xc = DMatrix::from_fn(t_len, d, |t, i| x[(t, i)] - means[i]);
    let now = xc.rows(l, n);
    let lags = (0..=l)
        .map(|h| {
            let past = xc.rows(l - h, n);
            (now.transpose() * past) / n as f64
        })
        .collect();
    BlockAcvf::from_lags(lags, n)
}

/// `Gamma_X = l(Gamma_Z)` entrywise for lags `0..=L` of `acvf_z`.
pub fn theoretical_count_acvf(acvf_z: &LatentAcvf, specs: &[MarginalSpec]) -> Result<BlockAcvf> {
    let d = acvf_z.d();
    if specs.len() != d {
        return Err(Error::Dimension(format!("{} specs for dimension {d}", specs.len())));
    }
    let ctx = PairContexts::new(specs)?;
    let mut lags = Vec::with_capacity(acvf_z.lags.len());
    for (h, gz) in acvf_z.lags.iter().enumerate() {
        let mut gx = DMatrix::zeros(d, d);
        for i in 0..d {
            for j in 0..d {
                gx[(i, j)] = if h == 0 && i == j {
                    link_at_one(&specs[i])?
                } else {
                    ctx.get(i, j).link_eval(gz[(i, j)])?
                };
            }
        }
        lags.push(gx);
    }
    BlockAcvf::from_lags(lags, 0)
}

/// One link context per unordered pair `{i, j}`.
#[derive(Debug, Clone)]
pub struct PairContexts {
    d: usize,
    contexts: Vec<LinkContext>,
}

impl PairContexts {
    pub fn new(specs: &[MarginalSpec]) -> Result<Self> {
        Self::with_u_clamp(specs, crate::link::DEFAULT_U_CLAMP)
    }

    pub fn with_u_clamp(specs: &[MarginalSpec], u_clamp: f64) -> Result<Self> {
        let d = specs.len();
        let pairs: Vec<(usize, usize)> = (0..d).flat_map(|i| (i..d).map(move |j| (i, j))).collect();
        let contexts = pairs
            .par_iter()
            .map(|&(i, j)| {
                let ctx = if i == j {
                    LinkContext::diagonal(specs[i].clone())?
                } else {
                    LinkContext::new(specs[i].clone(), specs[j].clone())?
                };
                ctx.with_u_clamp(u_clamp)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { d, contexts })
    }

    fn index(&self, i: usize, j: usize) -> usize {
        let (a, b) = if i <= j { (i, j) } else { (j, i) };
        // upper triangle, row-major
        a * self.d - a * a.saturating_sub(1) / 2 + (b - a)
    }

    pub fn get(&self, i: usize, j: usize) -> &LinkContext {
        &self.contexts[self.index(i, j)]
    }

    pub fn d(&self) -> usize {
        self.d
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SparseNormMode {
    Exact,
    Heuristic,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SparseNorm {
    pub value: f64,
    /// Set when `value` is only a certified lower bound.
    pub lower_bound: bool,
}

/// `||A||_s` for symmetric `A`.
pub fn sparse_norm(a: &DMatrix<f64>, s: usize, mode: SparseNormMode) -> Result<SparseNorm> {
    linalg::check_symmetric(a, 1e-8, "sparse-norm argument")?;
    let dim = a.nrows();
    if dim == 0 {
        return Ok(SparseNorm {
            value: 0.0,
            lower_bound: false,
        });
    }
    let k = (2 * s).min(dim);
    if k == 0 {
        return Ok(SparseNorm {
            value: 0.0,
            lower_bound: false,
        });
    }
    if k == dim {
        return Ok(SparseNorm {
            value: linalg::max_abs_eigenvalue(a),
            lower_bound: false,
        });
    }
    match mode {
        SparseNormMode::Exact => {
            let count = linalg::binomial(dim, k);
            if count > SPARSE_NORM_BUDGET {
                return Err(Error::Budget {
                    needed: count,
                    budget: SPARSE_NORM_BUDGET,
                });
            }
            Ok(SparseNorm {
                value: exact_sparse_norm(a, k),
                lower_bound: false,
            })
        }
        SparseNormMode::Heuristic => Ok(SparseNorm {
            value: truncated_power(a, k),
            lower_bound: true,
        }),
    }
}

fn exact_sparse_norm(a: &DMatrix<f64>, k: usize) -> f64 {
    let dim = a.nrows();
    let mut supports = Vec::new();
    linalg::for_each_subset(dim, k, |idx| supports.push(idx.to_vec()));
    supports
        .par_iter()
        .map(|idx| linalg::max_abs_eigenvalue(&linalg::principal(a, idx)))
        .reduce(|| 0.0, f64::max)
}

fn hard_threshold(v: &mut [f64], k: usize) {
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&x, &y| v[y].abs().total_cmp(&v[x].abs()).then(x.cmp(&y)));
    for &i in &order[k..] {
        v[i] = 0.0;
    }
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
}

fn quad_form(a: &DMatrix<f64>, v: &[f64]) -> f64 {
    let n = v.len();
    let mut total = 0.0;
    for i in 0..n {
        if v[i] == 0.0 {
            continue;
        }
        for j in 0..n {
            total += v[i] * a[(i, j)] * v[j];
        }
    }
    total
}

/// Truncated power iteration on `c I + A` and `c I - A`; returns the best
/// `|v'Av|` over the feasible iterates found.
fn truncated_power(a: &DMatrix<f64>, k: usize) -> f64 {
    let dim = a.nrows();
    let shift = (0..dim)
        .map(|i| a.row(i).iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let mut best: f64 = (0..dim).map(|i| a[(i, i)].abs()).fold(0.0, f64::max);
    for sign in [1.0, -1.0] {
        let m = DMatrix::identity(dim, dim) * shift + a * sign;
        for restart in 0..POWER_RESTARTS {
            let mut v: Vec<f64> = if restart < dim.min(POWER_RESTARTS / 2) {
                // start at the row with the largest restricted mass
                let mut e = m.row(restart).iter().copied().collect::<Vec<_>>();
                e[restart] += 1.0;
                e
            } else {
                let mut rng = stream_rng(0x5eed, restart as u64);
                (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
            };
            hard_threshold(&mut v, k);
            for _ in 0..POWER_ITERS {
                let mut next: Vec<f64> = (0..dim).map(|i| (0..dim).map(|j| m[(i, j)] * v[j]).sum()).collect();
                hard_threshold(&mut next, k);
                let change = next.iter().zip(&v).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
                v = next;
                if change < 1e-12 {
                    break;
                }
            }
            // refine on the final support exactly
            let support: Vec<usize> = (0..dim).filter(|&i| v[i] != 0.0).collect();
            if !support.is_empty() {
                best = best.max(linalg::max_abs_eigenvalue(&linalg::principal(a, &support)));
            }
            best = best.max(quad_form(a, &v).abs());
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn hand_example() {
        let x = DMatrix::from_column_slice(4, 1, &[1.0, 2.0, 3.0, 4.0]);
        let b = sample_block_acvf(&x, 1).unwrap();
        assert_eq!(b.n, 3);
        assert_abs_diff_eq!(b.big[(0, 0)], 2.75 / 3.0, epsilon = 1e-15);
        // frames t = 2..4 against t-1: (-0.5)(-1.5) + (0.5)(-0.5) + (1.5)(0.5)
        assert_abs_diff_eq!(b.gamma_vec[(0, 0)], 1.25 / 3.0, epsilon = 1e-15);
        assert!(sample_block_acvf(&x, 4).is_err());
    }

    #[test]
    fn constant_series_gives_zero() {
        let x = DMatrix::from_element(10, 2, 3.0);
        let b = sample_block_acvf(&x, 2).unwrap();
        assert_eq!(linalg::max_abs(&b.big), 0.0);
        assert_eq!(linalg::max_abs(&b.gamma_vec), 0.0);
    }

    #[test]
    fn block_toeplitz_structure() {
        let mut rng = stream_rng(1, 1);
        let x = DMatrix::from_fn(50, 3, |_, _| rng.sample::<f64, _>(StandardNormal));
        let b = sample_block_acvf(&x, 3).unwrap();
        let d = 3;
        for r in 0..3 {
            for s in 0..3 {
                let blk = b.big.view((r * d, s * d), (d, d)).into_owned();
                let expect = b.at(s as i64 - r as i64);
                assert!(linalg::max_abs(&(blk - expect)) < 1e-15);
            }
        }
        assert!(linalg::max_abs(&(&b.big - b.big.transpose())) == 0.0);
    }

    #[test]
    fn pair_index_is_a_bijection() {
        let specs = vec![MarginalSpec::bernoulli(0.5).unwrap(); 4];
        let ctx = PairContexts::new(&specs).unwrap();
        let mut seen = [false; 10];
        for i in 0..4 {
            for j in i..4 {
                let k = ctx.index(i, j);
                assert!(!seen[k]);
                seen[k] = true;
                assert_eq!(k, ctx.index(j, i));
            }
        }
        assert!(seen.iter().all(|&b| b));
    }

    #[test]
    fn theoretical_anchors() {
        let b = MarginalSpec::bernoulli(0.5).unwrap();
        let mut g1 = DMatrix::zeros(2, 2);
        g1[(0, 1)] = 0.5;
        let acvf = LatentAcvf {
            lags: vec![DMatrix::identity(2, 2), g1],
            standardized: true,
        };
        let gx = theoretical_count_acvf(&acvf, &[b.clone(), b]).unwrap();
        assert_abs_diff_eq!(gx.lags[0][(0, 0)], 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(gx.lags[0][(0, 1)], 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(gx.lags[1][(0, 1)], 1.0 / 12.0, epsilon = 1e-12);
        assert_eq!(gx.lags[1][(1, 0)], 0.0);
    }

    #[test]
    fn sparse_norm_anchors() {
        let a = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, 2.0, 3.0]));
        assert_abs_diff_eq!(
            sparse_norm(&a, 1, SparseNormMode::Exact).unwrap().value,
            3.0,
            epsilon = 1e-14
        );
        let m = linalg::from_rows(&[vec![1.0, 0.9, -0.2], vec![0.9, 1.0, 0.4], vec![-0.2, 0.4, 1.0]]).unwrap();
        let full = linalg::max_abs_eigenvalue(&m);
        assert_abs_diff_eq!(
            sparse_norm(&m, 2, SparseNormMode::Exact).unwrap().value,
            full,
            epsilon = 1e-14
        );
    }

    #[test]
    fn exact_matches_pairwise_brute_force() {
        let mut rng = stream_rng(4, 0);
        let r = DMatrix::from_fn(8, 8, |_, _| rng.sample::<f64, _>(StandardNormal));
        let a = linalg::symmetrize(&r);
        let mut brute: f64 = 0.0;
        for i in 0..8 {
            for j in i + 1..8 {
                let (p, q, s) = (a[(i, i)], a[(j, j)], a[(i, j)]);
                let mid = 0.5 * (p + q);
                let rad = (0.25 * (p - q) * (p - q) + s * s).sqrt();
                brute = brute.max((mid + rad).abs()).max((mid - rad).abs());
            }
        }
        let exact = sparse_norm(&a, 1, SparseNormMode::Exact).unwrap();
        assert_abs_diff_eq!(exact.value, brute, epsilon = 1e-12);
        let heur = sparse_norm(&a, 1, SparseNormMode::Heuristic).unwrap();
        assert!(heur.lower_bound);
        assert!(heur.value <= exact.value + 1e-12);
        assert!(heur.value >= 0.9 * exact.value);
    }

    #[test]
    fn budget_error() {
        let a = DMatrix::identity(60, 60);
        assert!(matches!(
            sparse_norm(&a, 5, SparseNormMode::Exact),
            Err(Error::Budget { .. })
        ));
        assert_abs_diff_eq!(
            sparse_norm(&a, 5, SparseNormMode::Heuristic).unwrap().value,
            1.0,
            epsilon = 1e-12
        );
    }
}
