use thiserror::Error;

/// Errors shared across the crate. Estimator-level soft conditions (coarse
/// nets, truncated paths) are reported through flags on the result types;
/// only genuinely unusable situations become `Error`s.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("matrix not positive definite: pivot {pivot:.3e} at index {index}")]
    NotPositiveDefinite { index: usize, pivot: f64 },

    #[error("invalid measure: {0}")]
    InvalidMeasure(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("line search failed: membership oracle inconsistent with bounding box ({0})")]
    LineSearch(String),

    #[error(
        "MALA acceptance rate {rate:.3} < 0.1 over {steps} sampling steps at step size \
         {step:.3e}; decrease the step size"
    )]
    MalaStepSize { rate: f64, steps: usize, step: f64 },

    #[error(
        "importance weights degenerate: n_eff = {n_eff:.1} < floor {floor}; \
         sample the tilted measure directly instead of reweighting"
    )]
    DegenerateWeights { n_eff: f64, floor: f64 },

    #[error("rejection sampler accepted {accepted} of {proposed} proposals; budget exhausted")]
    RejectionBudget { accepted: usize, proposed: usize },

    #[error("fixed point iteration exceeded {iters} iterations; residual tail {tail:?}")]
    NoConvergence { iters: usize, tail: Vec<f64> },

    #[error("quadrature grid rejected: {0}")]
    BadGrid(String),

    #[error("serialization: {0}")]
    Format(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
