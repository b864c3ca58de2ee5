use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("non-finite value encountered in {0}")]
    NonFinite(String),

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("operator is not positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("solver did not converge after {iterations} iterations (relative residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("ABORT_POSITIVITY at t = {t}: minimum total height {min_h:.6e} left the admissible set")]
    AbortPositivity { t: f64, min_h: f64 },

    #[error("ABORT_BLOWUP at t = {t}: {what}")]
    AbortBlowup { t: f64, what: String },

    #[error("sub-run n = {n} failed: {source}")]
    SubRun {
        n: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("hypothesis violated: {0}")]
    Hypothesis(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
