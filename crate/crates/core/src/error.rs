use thiserror::Error;

/// Errors raised by scenario generation, the metric layer and the solvers.
#[derive(Debug, Error)]
pub enum IsacError {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("placement failed after {attempts} attempts: {what}")]
    Placement { what: String, attempts: usize },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid user association: {0}")]
    InvalidAssociation(String),

    #[error("association problem is infeasible: {0}")]
    InfeasibleAssociation(String),

    #[error("search space too large: {size} candidates exceed the cap of {cap}")]
    SearchTooLarge { size: f64, cap: f64 },

    #[error("sensing constraints admit no feasible point: {0}")]
    InfeasibleSensing(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error(transparent)]
    Llm(#[from] crate::llm::LlmError),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, IsacError>;
