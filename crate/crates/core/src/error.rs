use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, DriftError>;

#[derive(Debug, Error)]
pub enum DriftError {
    #[error("empty training set")]
    EmptyTrainingSet,

    #[error("empty batch")]
    EmptyBatch,

    #[error("empty dataset")]
    EmptyDataset,

    #[error("batch has no labels")]
    MissingLabels,

    #[error("column mismatch: expected {expected} features, got {actual}")]
    ColumnMismatch { expected: usize, actual: usize },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("unseen class id {class} (ensemble knows {class_count} classes)")]
    UnseenClass { class: usize, class_count: usize },

    #[error("shape mismatch on transfer: {0}")]
    ShapeMismatch(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("invalid batch: {0}")]
    InvalidBatch(String),

    #[error("file not found: {}", .0.display())]
    MissingFile(PathBuf),

    #[error("parse error at row {row}, column '{column}': {message}")]
    Parse {
        row: usize,
        column: String,
        message: String,
    },

    #[error("unknown label column '{0}'")]
    UnknownLabelColumn(String),

    #[error("unknown method '{0}'")]
    UnknownMethod(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}
