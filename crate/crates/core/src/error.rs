use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid projection spec: {0}")]
    InvalidSpec(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("vector has a non-finite entry at index {index}")]
    NonFinite { index: usize },

    #[error("{0} must not be empty")]
    Empty(&'static str),

    #[error("exact integer application requires an unscaled Rademacher matrix")]
    UnsupportedExactPath,

    #[error("argument out of range: {0}")]
    OutOfRange(String),

    #[error("threshold too large: tau = {tau} must be below {limit}")]
    ThresholdTooLarge { tau: f64, limit: f64 },

    #[error("inconsistent geometry: d = {d} exceeds D = {big_d}")]
    InconsistentGeometry { d: f64, big_d: f64 },

    #[error("unit-norm convention violated: {0}")]
    ConventionViolation(String),

    #[error("{solver} did not converge after {iterations} iterations (best distance {best_distance}, gap {gap})")]
    NonConvergence {
        solver: &'static str,
        iterations: usize,
        best_distance: f64,
        gap: f64,
        best_weights: Vec<f64>,
    },

    #[error("point is not in the cone spanned by the generators")]
    NotInCone,

    #[error("exact mode supports at most {cap} points, got {size}; use the greedy variant")]
    CapExceeded { size: usize, cap: usize },

    #[error("invalid integer fiber: {0}")]
    InvalidFiber(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("instance generator contract violated: {0}")]
    GeneratorContract(String),

    #[error("parse error: {0}")]
    Parse(String),
}
