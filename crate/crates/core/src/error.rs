use thiserror::Error;

/// Errors raised by model evaluation, design construction and certification.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum DesignError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("point {point:?} is outside the domain of the {family} family (eta = {eta})")]
    Domain {
        family: String,
        point: Vec<f64>,
        eta: f64,
    },

    #[error("intensity at eta = {eta} is not finite and positive ({value})")]
    NonFinite { eta: f64, value: f64 },

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid design: {0}")]
    InvalidDesign(String),

    #[error("invalid region: {0}")]
    InvalidRegion(String),

    #[error("invalid criterion order: {0}")]
    InvalidCriterion(String),

    #[error("information matrix is singular (min eigenvalue {min}, max eigenvalue {max})")]
    Singular { min: f64, max: f64 },

    #[error("matrix is not symmetric (relative asymmetry {0:e})")]
    Asymmetric(f64),

    #[error("regression vectors are linearly dependent")]
    RankDeficient,

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("no convergence after {iterations} iterations (gap {gap:e})")]
    NonConvergence { iterations: usize, gap: f64 },

    #[error("region has no candidate points")]
    EmptyRegion,

    #[error("unsupported: {0}")]
    Unsupported(String),
}

pub type Result<T> = std::result::Result<T, DesignError>;
