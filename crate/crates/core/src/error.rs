use thiserror::Error;

/// Errors shared across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("node has an empty neighborhood")]
    EmptyNeighborhood,

    #[error("weight matrix violates the design assumption: {0}")]
    AssumptionViolated(String),

    #[error("parameter out of range: {0}")]
    ParameterOutOfRange(String),

    #[error("failed to generate a connected graph after {attempts} attempts")]
    ConnectivityFailure { attempts: usize },

    #[error("reduction to the truncation system is not defined for this quantizer")]
    UnsupportedReduction,

    #[error("trace has no terminal verdict (budget exhausted)")]
    NotConverged,

    #[error("internal inconsistency: {0}")]
    InternalInconsistency(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
