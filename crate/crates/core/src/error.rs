//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),

    #[error("empty table: {0}")]
    EmptyTable(String),

    #[error("degenerate split: {0}")]
    SplitDegenerate(String),

    #[error("unseen category {value:?} in column {column:?}")]
    UnseenCategory { column: String, value: String },

    #[error("transform fit failed: {0}")]
    Fit(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("degenerate batch: {0}")]
    DegenerateBatch(String),

    #[error("non-finite value in {context}")]
    NonFinite { context: String },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("degenerate training data: {0}")]
    DegenerateTraining(String),

    #[error("training aborted: {reason}; diagnostic checkpoint at {diagnostic_path}")]
    TrainingFault {
        reason: String,
        diagnostic_path: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
