//! Plug-in estimator of the latent autocovariances: fit each marginal, build
//! the estimated links and invert the sample count autocovariances entrywise.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::acvf::{self, sample_block_acvf, sparse_norm, BlockAcvf, PairContexts, SparseNormMode};
use crate::error::{Error, Result};
use crate::linalg;
use crate::marginals::{fit_theta, FitFamily, MarginalSpec};
use crate::var_model::LatentAcvf;

/// Treatment of the lag-0 diagonal `Gamma_Z,ii(0)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiagMode {
    /// Set to 1, the known unit variance.
    ForceOne,
    /// Invert `l_ii` with the result clamped to `[0, 1]`.
    #[default]
    EstimateClamped,
}

#[derive(Debug, Clone)]
pub struct LatentEstimate {
    /// Latent-scale block autocovariance.
    pub acvf_hat: BlockAcvf,
    /// Sample count block autocovariance the estimate was inverted from.
    pub count_acvf: BlockAcvf,
    pub theta_hats: Vec<MarginalSpec>,
    /// Columns whose fitted parameter was clipped into the open domain.
    pub theta_clipped: Vec<bool>,
    pub diag_mode: DiagMode,
    pub clamp_hits: usize,
}

/// Full pipeline with marginal parameters fitted from the data.
pub fn estimate_latent_acvf(
    x: &DMatrix<u64>,
    l: usize,
    families: &[FitFamily],
    diag_mode: DiagMode,
) -> Result<LatentEstimate> {
    let d = x.ncols();
    if families.len() != d {
        return Err(Error::Dimension(format!("{} families for {d} columns", families.len())));
    }
    if x.nrows() <= l {
        return Err(Error::InsufficientData(format!(
            "T = {} must exceed L = {l}",
            x.nrows()
        )));
    }
    let mut specs = Vec::with_capacity(d);
    let mut clipped = Vec::with_capacity(d);
    for (i, family) in families.iter().enumerate() {
        let col: Vec<u64> = x.column(i).iter().copied().collect();
        if col.iter().all(|&v| v == col[0]) {
            return Err(Error::Degenerate(format!("column {i} is constant")));
        }
        let fitted = fit_theta(&col, *family)?;
        specs.push(fitted.spec);
        clipped.push(fitted.clipped);
    }
    let mut est = estimate_with_specs(x, l, &specs, diag_mode)?;
    est.theta_clipped = clipped;
    Ok(est)
}

/// Pipeline with the marginal parameters supplied (true-parameter path).
pub fn estimate_with_specs(
    x: &DMatrix<u64>,
    l: usize,
    specs: &[MarginalSpec],
    diag_mode: DiagMode,
) -> Result<LatentEstimate> {
    if specs.len() != x.ncols() {
        return Err(Error::Dimension(format!(
            "{} specs for {} columns",
            specs.len(),
            x.ncols()
        )));
    }
    let count_acvf = sample_block_acvf(&acvf::counts_to_f64(x), l)?;
    let ctx = PairContexts::new(specs)?;
    let (acvf_hat, clamp_hits) = invert_block(&count_acvf, &ctx, diag_mode)?;
    Ok(LatentEstimate {
        acvf_hat,
        count_acvf,
        theta_hats: specs.to_vec(),
        theta_clipped: vec![false; specs.len()],
        diag_mode,
        clamp_hits,
    })
}

/// Apply `g_ij` to every entry of every lag of `count_acvf`.
pub fn invert_block(count_acvf: &BlockAcvf, ctx: &PairContexts, diag_mode: DiagMode) -> Result<(BlockAcvf, usize)> {
    let d = count_acvf.d;
    if ctx.d() != d {
        return Err(Error::Dimension("link contexts do not match dimension".into()));
    }
    let cells: Vec<(usize, usize, usize)> = (0..count_acvf.lags.len())
        .flat_map(|h| (0..d).flat_map(move |i| (0..d).map(move |j| (h, i, j))))
        .collect();
    let inverted = cells
        .par_iter()
        .map(|&(h, i, j)| -> Result<(f64, bool)> {
            let x = count_acvf.lags[h][(i, j)];
            let link = ctx.get(i, j);
            if h == 0 && i == j {
                match diag_mode {
                    DiagMode::ForceOne => Ok((1.0, false)),
                    DiagMode::EstimateClamped => {
                        let u = link.link_invert_on(x, 0.0, 1.0)?;
                        Ok((u, u == 0.0 || u == 1.0))
                    }
                }
            } else {
                let u = link.link_invert(x);
                Ok((u, u.abs() >= link.u_clamp()))
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let mut lags = vec![DMatrix::zeros(d, d); count_acvf.lags.len()];
    let mut hits = 0;
    for (&(h, i, j), &(u, hit)) in cells.iter().zip(&inverted) {
        lags[h][(i, j)] = u;
        hits += hit as usize;
    }
    Ok((BlockAcvf::from_lags(lags, count_acvf.n)?, hits))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecoveryError {
    pub max_norm: f64,
    pub sparse_norm_err: f64,
    /// Set when the sparse norm fell back to the heuristic lower bound.
    pub sparse_lower_bound: bool,
    pub frobenius: f64,
}

/// Errors of the block matrix `Gamma_hat_Z` against the truth.
pub fn recovery_error(est: &BlockAcvf, truth: &LatentAcvf, s: usize) -> Result<RecoveryError> {
    if truth.d() != est.d || truth.lags.len() < est.lags.len() {
        return Err(Error::Dimension(format!(
            "estimate has d = {}, L = {}; truth has d = {}, {} lags",
            est.d,
            est.l,
            truth.d(),
            truth.lags.len()
        )));
    }
    let truth_block = BlockAcvf::from_lags(truth.lags[..est.lags.len()].to_vec(), 0)?;
    let diff = &est.big - &truth_block.big;
    let norm = match sparse_norm(&diff, s, SparseNormMode::Exact) {
        Ok(v) => v,
        Err(Error::Budget { .. }) => sparse_norm(&diff, s, SparseNormMode::Heuristic)?,
        Err(e) => return Err(e),
    };
    Ok(RecoveryError {
        max_norm: linalg::max_abs(&diff),
        sparse_norm_err: norm.value,
        sparse_lower_bound: norm.lower_bound,
        frobenius: diff.norm(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::var_model::{simulate, standardize, transform_counts, VarModel};
    use approx::assert_abs_diff_eq;

    fn truth_identity(d: usize, l: usize) -> LatentAcvf {
        let mut lags = vec![DMatrix::identity(d, d)];
        lags.extend((0..l).map(|_| DMatrix::zeros(d, d)));
        LatentAcvf {
            lags,
            standardized: true,
        }
    }

    #[test]
    fn recovery_error_anchors() {
        let truth = truth_identity(3, 1);
        let est = BlockAcvf::from_lags(truth.lags.clone(), 10).unwrap();
        let e = recovery_error(&est, &truth, 1).unwrap();
        assert_eq!((e.max_norm, e.sparse_norm_err, e.frobenius), (0.0, 0.0, 0.0));

        let mut lags = truth.lags.clone();
        lags[0][(0, 2)] = 0.1;
        lags[0][(2, 0)] = 0.1;
        let est = BlockAcvf::from_lags(lags, 10).unwrap();
        let e = recovery_error(&est, &truth, 1).unwrap();
        assert_abs_diff_eq!(e.max_norm, 0.1, epsilon = 1e-15);
        assert_abs_diff_eq!(e.sparse_norm_err, 0.1, epsilon = 1e-14);
        assert_abs_diff_eq!(e.frobenius, (0.02f64).sqrt(), epsilon = 1e-15);
        assert!(recovery_error(&est, &truth_identity(2, 1), 1).is_err());
    }

    #[test]
    fn force_one_sets_unit_diagonal() {
        let m = VarModel::new(vec![DMatrix::identity(2, 2) * 0.3], DMatrix::identity(2, 2)).unwrap();
        let z = simulate(&standardize(&m, 1).unwrap().model, 2000, 1, None).unwrap();
        let specs = vec![
            MarginalSpec::poisson(2.0).unwrap(),
            MarginalSpec::bernoulli(0.4).unwrap(),
        ];
        let x = transform_counts(&z, &specs).unwrap();
        let fams = vec![FitFamily::Poisson, FitFamily::Bernoulli];
        let est = estimate_latent_acvf(&x, 2, &fams, DiagMode::ForceOne).unwrap();
        for i in 0..2 {
            assert_eq!(est.acvf_hat.lags[0][(i, i)], 1.0);
        }
        let est = estimate_latent_acvf(&x, 2, &fams, DiagMode::EstimateClamped).unwrap();
        for i in 0..2 {
            let v = est.acvf_hat.lags[0][(i, i)];
            assert!((0.0..=1.0).contains(&v));
            assert!((v - 1.0).abs() < 0.1, "{v}");
        }
        // monotone inverse keeps signs
        for h in 0..3 {
            for i in 0..2 {
                for j in 0..2 {
                    let (a, b) = (est.acvf_hat.lags[h][(i, j)], est.count_acvf.lags[h][(i, j)]);
                    assert!(a == 0.0 && b == 0.0 || a.signum() == b.signum());
                }
            }
        }
    }

    #[test]
    fn constant_column_is_degenerate() {
        let mut x = DMatrix::from_element(50, 2, 1u64);
        for t in 0..50 {
            x[(t, 1)] = (t % 3) as u64;
        }
        let r = estimate_latent_acvf(&x, 1, &[FitFamily::Poisson, FitFamily::Poisson], DiagMode::ForceOne);
        assert!(matches!(r, Err(Error::Degenerate(_))));
    }

    #[test]
    fn bernoulli_cross_lag_recovered() {
        let a = crate::linalg::from_rows(&[vec![0.0, 0.5], vec![0.0, 0.0]]).unwrap();
        let sigma = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![0.75, 1.0]));
        let m = VarModel::new(vec![a], sigma).unwrap();
        let st = standardize(&m, 1).unwrap();
        assert_abs_diff_eq!(st.acvf.lags[1][(0, 1)], 0.5, epsilon = 1e-12);
        let z = simulate(&st.model, 100_000, 21, None).unwrap();
        let b = MarginalSpec::bernoulli(0.5).unwrap();
        let x = transform_counts(&z, &[b.clone(), b]).unwrap();
        let est =
            estimate_latent_acvf(&x, 1, &[FitFamily::Bernoulli, FitFamily::Bernoulli], DiagMode::ForceOne).unwrap();
        assert!((est.acvf_hat.lags[1][(0, 1)] - 0.5).abs() < 0.05);
        assert!(est.acvf_hat.lags[1][(1, 0)].abs() < 5.0 / (est.acvf_hat.n as f64).sqrt());
    }
}
