use thiserror::Error;

/// Errors raised by operator construction, optimization and time integration.
#[derive(Debug, Error)]
pub enum Error {
    #[error("grid too small: N = {n}, need N >= 8 so the boundary closures do not overlap")]
    GridTooSmall { n: usize },

    #[error("shape mismatch: expected length {expected}, got {got}")]
    ShapeMismatch { expected: usize, got: usize },

    #[error("matrix entry ({row},{col}) = {value:e} violates the operator sparsity pattern")]
    PatternViolation { row: usize, col: usize, value: f64 },

    #[error("boundary exactness system inconsistent: residual {residual:e}")]
    ExactnessResidual { residual: f64 },

    #[error("norm matrix is not symmetric positive definite (min eigenvalue {min_eig:e})")]
    NormNotSpd { min_eig: f64 },

    #[error("transmission condition violated at t = {t}: norm matrix changed across operator swap")]
    TransmissionViolated { t: f64 },

    #[error("step size underflow at t = {t} (h = {h:e})")]
    StepSizeUnderflow { t: f64, h: f64 },

    #[error("non-finite state encountered at t = {t}")]
    NonFiniteState { t: f64 },

    #[error("unsupported accuracy stage degree {degree} (only 0 and 1 are used)")]
    UnsupportedDegree { degree: usize },

    #[error("invalid grid: {reason}")]
    InvalidGrid { reason: String },

    #[error("run failed for N = {n}: {source}")]
    StudyCase {
        n: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
