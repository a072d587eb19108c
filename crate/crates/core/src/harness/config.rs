use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::latent::DiagMode;
use crate::linalg;
use crate::marginals::MarginalSpec;
use crate::rng::stream_rng;
use crate::sparse_var::{lambda_grid, LassoOptions};
use crate::var_model::{check_causal, VarModel};

/// Stream index reserved for drawing a random model.
const MODEL_STREAM: u64 = u64::MAX;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelConfig {
    /// Coefficients and noise covariance given directly; the model is
    /// rescaled to unit stationary variances.
    Explicit {
        coeffs: Vec<Vec<Vec<f64>>>,
        noise_cov: Vec<Vec<f64>>,
    },
    /// `nonzeros` coefficients at random positions with magnitudes uniform in
    /// `[magnitude_min, magnitude_max]` and random signs, redrawn until the
    /// companion spectral radius is below `max_radius`. For `p = 1` the
    /// noise covariance is `I - A A'`, so the latent process has unit
    /// variances without rescaling and the drawn magnitudes are kept.
    RandomSparse {
        d: usize,
        p: usize,
        nonzeros: usize,
        magnitude_min: f64,
        magnitude_max: f64,
        #[serde(default = "default_max_radius")]
        max_radius: f64,
    },
}

fn default_max_radius() -> f64 {
    0.9
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LambdaGridConfig {
    pub points: usize,
    /// Lower end as a multiple of `sqrt(log(q) / N)`.
    pub lo: f64,
    /// Upper end as a multiple of `sqrt(log(q) / N)`.
    pub hi: f64,
}

impl Default for LambdaGridConfig {
    fn default() -> Self {
        Self {
            points: 20,
            lo: 0.01,
            hi: 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LambdaSpec {
    /// Absolute penalty values used at every `N`.
    Values(Vec<f64>),
    Grid(LambdaGridConfig),
}

impl Default for LambdaSpec {
    fn default() -> Self {
        LambdaSpec::Grid(LambdaGridConfig::default())
    }
}

impl LambdaSpec {
    pub fn len(&self) -> usize {
        match self {
            LambdaSpec::Values(v) => v.len(),
            LambdaSpec::Grid(g) => g.points,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn values(&self, q: usize, n: usize) -> Vec<f64> {
        match self {
            LambdaSpec::Values(v) => v.clone(),
            LambdaSpec::Grid(g) => lambda_grid(q, n, g.points, g.lo, g.hi),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub csv: Option<PathBuf>,
    pub summary: Option<PathBuf>,
}

fn default_true() -> bool {
    true
}

fn default_constants_eps() -> f64 {
    0.01
}

/// Monte Carlo experiment description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelConfig,
    /// One marginal per latent component.
    pub marginals: Vec<MarginalSpec>,
    /// Effective sample sizes `N`; each replicate simulates `T = N + L` steps.
    pub n_grid: Vec<usize>,
    pub replicates: usize,
    pub master_seed: u64,
    /// Sparsity level used for the sparse norm and the bound constants.
    pub s: usize,
    /// Number of lagged frames for the latent estimate; defaults to `p`.
    #[serde(default)]
    pub l: Option<usize>,
    #[serde(default)]
    pub lambda: LambdaSpec,
    #[serde(default)]
    pub diag_mode: DiagMode,
    /// Fit marginal parameters from the data; otherwise the true ones are used.
    #[serde(default = "default_true")]
    pub fit_marginals: bool,
    #[serde(default = "default_true")]
    pub lasso: bool,
    #[serde(default)]
    pub lasso_options: Option<LassoOptions>,
    #[serde(default = "default_true")]
    pub constants: bool,
    /// Common value of `eps`, `delta_tilde`, `eps_tilde` for the constants.
    #[serde(default = "default_constants_eps")]
    pub constants_eps: f64,
    #[serde(default)]
    pub output: Option<OutputConfig>,
}

impl ExperimentConfig {
    /// JSON or TOML, chosen by extension (`.toml`), else JSON.
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        if path.extension().is_some_and(|e| e == "toml") {
            Self::from_toml(&text)
        } else {
            Self::from_json(&text)
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    /// First 16 hex digits of the SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_json().as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    pub fn dims(&self) -> (usize, usize) {
        match &self.model {
            ModelConfig::Explicit { coeffs, noise_cov } => (noise_cov.len(), coeffs.len()),
            ModelConfig::RandomSparse { d, p, .. } => (*d, *p),
        }
    }

    pub fn l(&self) -> usize {
        self.l.unwrap_or(self.dims().1)
    }

    pub fn lasso_options(&self) -> LassoOptions {
        self.lasso_options.unwrap_or_default()
    }

    pub fn validate(&self) -> Result<()> {
        let (d, p) = self.dims();
        let bad = |m: String| Err(Error::Config(m));
        if d == 0 || p == 0 {
            return bad("model needs d >= 1 and p >= 1".into());
        }
        if self.marginals.len() != d {
            return bad(format!("{} marginals for dimension {d}", self.marginals.len()));
        }
        if self.n_grid.is_empty() || self.n_grid.windows(2).any(|w| w[0] >= w[1]) {
            return bad("n_grid must be non-empty and strictly increasing".into());
        }
        if self.n_grid[0] < 2 {
            return bad("every N must be at least 2".into());
        }
        if self.replicates < 1 {
            return bad("replicates must be at least 1".into());
        }
        if self.s < 1 || self.s > p * d * d {
            return bad(format!("s must lie in 1..={}", p * d * d));
        }
        if self.l() < p {
            return bad(format!("L = {} must be at least p = {p}", self.l()));
        }
        if self.lasso && self.lambda.is_empty() {
            return bad("lambda grid is empty".into());
        }
        if let LambdaSpec::Values(v) = &self.lambda {
            if v.iter().any(|x| !(*x >= 0.0)) {
                return bad("lambda values must be nonnegative".into());
            }
        }
        if let ModelConfig::RandomSparse {
            nonzeros,
            magnitude_min,
            magnitude_max,
            max_radius,
            ..
        } = &self.model
        {
            if *nonzeros > p * d * d {
                return bad("more nonzeros than coefficients".into());
            }
            if !(0.0 < *magnitude_min && magnitude_min <= magnitude_max) {
                return bad("need 0 < magnitude_min <= magnitude_max".into());
            }
            if !(0.0 < *max_radius && *max_radius < 1.0) {
                return bad("max_radius must lie in (0,1)".into());
            }
        }
        Ok(())
    }

    /// The latent model before standardization.
    pub fn build_model(&self) -> Result<VarModel> {
        match &self.model {
            ModelConfig::Explicit { coeffs, noise_cov } => {
                let coeffs = coeffs
                    .iter()
                    .map(|a| linalg::from_rows(a))
                    .collect::<Result<Vec<_>>>()?;
                VarModel::new(coeffs, linalg::from_rows(noise_cov)?)
            }
            ModelConfig::RandomSparse {
                d,
                p,
                nonzeros,
                magnitude_min,
                magnitude_max,
                max_radius,
            } => random_sparse_model(
                *d,
                *p,
                *nonzeros,
                *magnitude_min,
                *magnitude_max,
                *max_radius,
                self.master_seed,
            ),
        }
    }
}

const MAX_MODEL_DRAWS: usize = 10_000;

fn random_sparse_model(
    d: usize,
    p: usize,
    nonzeros: usize,
    lo: f64,
    hi: f64,
    max_radius: f64,
    seed: u64,
) -> Result<VarModel> {
    let mut rng = stream_rng(seed, MODEL_STREAM);
    let q = p * d * d;
    for _ in 0..MAX_MODEL_DRAWS {
        let positions = rand::seq::index::sample(&mut rng, q, nonzeros).into_vec();
        let mut coeffs = vec![DMatrix::zeros(d, d); p];
        for pos in positions {
            let (u, rem) = (pos / (d * d), pos % (d * d));
            let mag = lo + (hi - lo) * rng.random::<f64>();
            let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
            coeffs[u][(rem / d, rem % d)] = sign * mag;
        }
        let noise = if p == 1 {
            DMatrix::identity(d, d) - &coeffs[0] * coeffs[0].transpose()
        } else {
            DMatrix::identity(d, d)
        };
        if p == 1 && linalg::min_eigenvalue(&noise) < 0.05 {
            continue;
        }
        let model = VarModel::new(coeffs, linalg::symmetrize(&noise))?;
        if check_causal(&model).spectral_radius < max_radius {
            return Ok(model);
        }
    }
    Err(Error::Config(format!(
        "no causal model with {nonzeros} coefficients in [{lo}, {hi}] found in {MAX_MODEL_DRAWS} draws"
    )))
}
