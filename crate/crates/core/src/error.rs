use thiserror::Error;

/// Errors raised by the numerical kernels.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("matrix is not square: {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("dimension {0} outside supported range 1..={max}", max = crate::MAX_DIM)]
    DimensionOutOfRange(usize),

    #[error("matrix is not Hermitian (max |A - A^dagger| = {0:e})")]
    NotHermitian(f64),

    #[error("trace is not 1 (got {0})")]
    InvalidTrace(f64),

    #[error("not positive semidefinite (min eigenvalue {0:e})")]
    NotPositive(f64),

    #[error("state vector is not normalized (squared norm {0})")]
    NotNormalized(f64),

    #[error("basis is not orthonormal (max |<X_i|X_j> - delta_ij| = {0:e})")]
    NotOrthonormal(f64),

    #[error("invalid probability vector: {0}")]
    InvalidProbabilities(String),

    #[error("all weights are zero")]
    DegenerateWeights,

    #[error("invalid rate matrix: {0}")]
    InvalidRates(String),

    #[error("negative time {0} not allowed for the master equation")]
    NegativeTime(f64),

    #[error("stationary distribution is not unique (null space dimension {0})")]
    NonUniqueEquilibrium(usize),

    #[error("support violation: p[{0}] > 0 but q[{0}] = 0")]
    SupportViolation(usize),

    #[error("mode index {index} out of range for {modes} modes")]
    ModeOutOfRange { index: usize, modes: usize },

    #[error("invalid gas configuration: {0}")]
    InvalidConfig(String),

    #[error("event precondition violated: {0}")]
    Precondition(String),

    #[error("value out of range: {0}")]
    OutOfRange(String),

    #[error("eigendecomposition did not converge")]
    NoConvergence,

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
