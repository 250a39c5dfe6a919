use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WickError {
    #[error("size limit exceeded: {size} slots requested, cap is {cap} (set WICK_SLOT_CAP to change)")]
    CapExceeded { size: usize, cap: usize },

    #[error("Wick product of random variables is not well defined: model `{model}` is not free of polynomial relations")]
    NotWellDefined { model: String },

    #[error("basis model mismatch: `{left}` vs `{right}`")]
    ModelMismatch { left: String, right: String },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("series does not converge: {0}")]
    NonConvergence(String),

    #[error("matrix is not positive definite after jitter")]
    NotPositiveDefinite,

    #[error("unknown experiment `{0}`")]
    UnknownExperiment(String),

    #[error("invalid argument: {0}")]
    Invalid(String),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, WickError>;

impl WickError {
    /// Stable machine-readable name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            WickError::CapExceeded { .. } => "cap_exceeded",
            WickError::NotWellDefined { .. } => "not_well_defined",
            WickError::ModelMismatch { .. } => "model_mismatch",
            WickError::GridMismatch(_) => "grid_mismatch",
            WickError::NonConvergence(_) => "non_convergence",
            WickError::NotPositiveDefinite => "not_positive_definite",
            WickError::UnknownExperiment(_) => "unknown_experiment",
            WickError::Invalid(_) => "invalid",
            WickError::Parse(_) => "parse",
        }
    }
}
