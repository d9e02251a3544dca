use nalgebra::DVector;
use thiserror::Error;

pub type Result<T, E = TpmError> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TpmError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("vector {index} is not unit norm (norm = {norm})")]
    NotUnitNorm { index: usize, norm: f64 },

    #[error("weight {index} must be positive, got {value}")]
    NonPositiveWeight { index: usize, value: f64 },

    #[error("component count {k} exceeds dimension {d}")]
    TooManyComponents { k: usize, d: usize },

    #[error("invalid component set: {0}")]
    InvalidComponents(String),

    #[error("dimension {d} exceeds the dense tensor cap {cap}")]
    DimensionOverCap { d: usize, cap: usize },

    #[error("components are numerically dependent (smallest Gram eigenvalue {min_eigenvalue:e})")]
    DegenerateComponents { min_eigenvalue: f64 },

    #[error("power iteration hit a zero contraction at step {step}")]
    DegenerateIterate { step: usize },

    #[error("extraction round {round} failed: every restart degenerated")]
    ExtractionFailure { round: usize },

    #[error("no restart count up to ln L = {max_ln_restarts} satisfies the initialization conditions")]
    NoFeasibleRestarts { max_ln_restarts: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("descent stalled at iteration {iteration}: no decrease after 30 step halvings")]
    StalledDescent { iteration: usize, point: DVector<f64> },

    #[error("{estimates} estimates supplied for {components} components")]
    IndexMismatch { estimates: usize, components: usize },
}

pub(crate) fn ensure_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(TpmError::DimensionMismatch { expected, found })
    }
}
