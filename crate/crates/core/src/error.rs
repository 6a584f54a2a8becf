use thiserror::Error;

/// Errors surfaced while validating domain objects, ingesting data, or
/// evaluating models.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("missing column `{0}` in CSV header")]
    MissingColumn(String),

    #[error("data integrity violation for id `{id}`: {reason}")]
    Integrity { id: String, reason: String },

    #[error("parse error at row {row}, column `{column}`: {reason}")]
    Parse {
        row: usize,
        column: String,
        reason: String,
    },

    #[error("metric undefined: {0}")]
    UndefinedMetric(String),

    #[error("unknown id `{0}`")]
    UnknownId(String),

    #[error("training diverged: non-finite {component} loss at epoch {epoch}")]
    NonFiniteLoss { component: String, epoch: usize },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
