use thiserror::Error;

/// Errors produced by the numerical routines of this crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("number of conjugate pairs must be at least 1")]
    ZeroDimension,

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("volume form needs {expected} vectors, got {found}")]
    WrongFrameCount { expected: usize, found: usize },

    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),

    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("singular matrix in {0}")]
    SingularMatrix(&'static str),

    #[error("point {0:?} lies outside the potential's domain")]
    DomainViolation(Vec<f64>),

    #[error("Newton iterates left the potential's domain after {iterations} iterations")]
    DomainEscape { iterations: usize },

    #[error("Newton solve did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("invalid relaxation profile: {0}")]
    InvalidProfile(String),

    #[error("trajectory left the relaxation domain (hhat >= 0, dhhat/dDelta > 0) at step {step}, t = {t}")]
    DomainExit { step: usize, t: f64 },

    #[error("integration produced a non-finite state at step {step}")]
    NumericalBlowup { step: usize },

    #[error("point lies on the attractor (hhat = {0:e}); the normalized field is undefined")]
    OnAttractor(f64),

    #[error("metric determinant {0:e} is too close to zero")]
    NearSingularMetric(f64),

    #[error("index {index} out of range for dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
