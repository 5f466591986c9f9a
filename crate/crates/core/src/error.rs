use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("model invalid: {0}")]
    ModelInvalid(String),

    #[error("convergence failure: {0}")]
    ConvergenceFailure(String),

    #[error("truncation too short: need order {needed}, have {available}")]
    TruncationTooShort { needed: usize, available: usize },

    #[error("near non-identifiable model: {0}")]
    NearNonIdentifiable(String),

    #[error("degenerate aggregation: {0}")]
    AggregationDegenerate(String),

    #[error("MA factorization failed: {0}")]
    FactorizationFailure(String),

    #[error("seed model construction failed: {0}")]
    ConstructionFailure(String),

    #[error("unsupported: {0}")]
    Unsupported(String),
}

impl Error {
    /// Stable machine-readable category name.
    pub fn category(&self) -> &'static str {
        match self {
            Error::InvalidInput(_) => "invalid_input",
            Error::ModelInvalid(_) => "model_invalid",
            Error::ConvergenceFailure(_) => "convergence_failure",
            Error::TruncationTooShort { .. } => "truncation_too_short",
            Error::NearNonIdentifiable(_) => "near_non_identifiable",
            Error::AggregationDegenerate(_) => "aggregation_degenerate",
            Error::FactorizationFailure(_) => "factorization_failure",
            Error::ConstructionFailure(_) => "construction_failure",
            Error::Unsupported(_) => "unsupported",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
