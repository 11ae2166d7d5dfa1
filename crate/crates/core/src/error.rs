use thiserror::Error;

/// Errors produced by the steady-state and sensitivity machinery.
///
/// Payloads are stored as `f64` regardless of the scalar type in use so the
/// error type stays independent of it.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error(
        "quadrature failed to converge: worst panel [{a:e}, {b:e}] has error estimate {error:e}"
    )]
    Quadrature { a: f64, b: f64, error: f64 },

    #[error("no steady state within model-time horizon {horizon:e}: final residual {residual:e}")]
    NotConverged { horizon: f64, residual: f64 },

    #[error("degenerate steady state: zero eigenspace has dimension {dimension}")]
    Degenerate { dimension: usize },

    #[error("adjoint integration did not converge (residual {residual:e}): {mode}")]
    AdjointNotConverged { residual: f64, mode: String },

    #[error("unknown parameter `{0}`")]
    UnknownParameter(String),

    #[error("non-finite gradient at optimizer step {step}")]
    PoisonedState { step: usize },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}
