use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parameter out of domain: {0}")]
    Domain(String),

    #[error("truncation failed after {n_max} terms, remaining tail mass {tail_mass:e}")]
    Truncation { n_max: usize, tail_mass: f64 },

    #[error("numerical overflow: {0}")]
    Overflow(String),

    #[error("quadrature did not reach tolerance, estimate {estimate} with error {error:e}")]
    Accuracy { estimate: f64, error: f64 },

    #[error("model is not causal (companion spectral radius {0})")]
    NotCausal(f64),

    #[error("degenerate model: {0}")]
    Degenerate(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("marginal fitting not supported for family {0}")]
    UnsupportedFit(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("exact sparse norm needs {needed} principal submatrices (budget {budget}); use heuristic mode")]
    Budget { needed: u128, budget: u128 },

    #[error("objective diverged, quadratic term is indefinite; enable PSD projection")]
    Indefinite,

    #[error("rate fit failed: {0}")]
    Fit(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
