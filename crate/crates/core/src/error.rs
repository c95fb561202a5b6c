use thiserror::Error;

/// Errors raised by the numerical routines in this crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: String },

    #[error("infeasible target: {0}")]
    InfeasibleTarget(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("tree depth {0} exceeds the supported maximum of 2")]
    Depth(usize),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("kernel matrix is not positive definite (jitter {jitter:e})")]
    NotPositiveDefinite { jitter: f64 },

    #[error("no feasible configuration in the search space")]
    EmptyFeasibleSet,

    #[error("every Monte Carlo sample was rejected by the validity predicate")]
    AllInvalid,

    #[error("no convergence after {0} iterations")]
    NonConvergence(usize),

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("division by zero: {0}")]
    DivisionByZero(String),

    #[error("unknown preset `{0}`")]
    UnknownPreset(String),

    #[error("serialization: {0}")]
    Serialization(String),
}

impl Error {
    pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field,
            reason: reason.into(),
        }
    }

    /// Short machine-readable tag for the error variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidParameter { .. } => "invalid_parameter",
            Error::InfeasibleTarget(_) => "infeasible_target",
            Error::Domain(_) => "domain",
            Error::Depth(_) => "depth",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::NotPositiveDefinite { .. } => "not_positive_definite",
            Error::EmptyFeasibleSet => "empty_feasible_set",
            Error::AllInvalid => "all_invalid",
            Error::NonConvergence(_) => "non_convergence",
            Error::DegenerateData(_) => "degenerate_data",
            Error::DivisionByZero(_) => "division_by_zero",
            Error::UnknownPreset(_) => "unknown_preset",
            Error::Serialization(_) => "serialization",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
