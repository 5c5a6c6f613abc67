use std::path::PathBuf;

use crate::dataset::ValidationReport;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Coarse classification used by front-ends to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    /// Bad parameters or configuration.
    Usage,
    /// Input data is missing, malformed or violates the schema.
    Data,
    /// Training, tracking or I/O failed while running.
    Runtime,
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("schema error: {0}")]
    Schema(String),

    #[error("parse error at data row {row}, column `{column}`: cannot parse {value:?}")]
    Parse { row: usize, column: String, value: String },

    #[error("validation failed with {} violation(s)", .0.total_violations())]
    Validation(Box<ValidationReport>),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("shape mismatch: expected {expected}, got {got}")]
    Shape { expected: String, got: String },

    #[error("unseen category {token:?} in column `{column}`")]
    Encoding { column: String, token: String },

    #[error("stratification error: {0}")]
    Stratification(String),

    #[error("SMOTE error: {0}")]
    Smote(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("calibration error: {0}")]
    Calibration(String),

    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    #[error("power trace error: {0}")]
    Trace(String),

    #[error("energy backend error: {message} ({})", .path.display())]
    Backend { message: String, path: PathBuf },

    #[error("another energy tracker is already active in this process")]
    TrackerBusy,

    #[error("missing {phase} energy report for model `{model}`")]
    Join { model: String, phase: String },

    #[error("model format error: {0}")]
    ModelFormat(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::Parameter(_) => ErrorCategory::Usage,
            Error::Schema(_)
            | Error::Parse { .. }
            | Error::Validation(_)
            | Error::Encoding { .. }
            | Error::Stratification(_)
            | Error::Degenerate(_)
            | Error::Data(_)
            | Error::UndefinedMetric(_)
            | Error::Csv(_) => ErrorCategory::Data,
            _ => ErrorCategory::Runtime,
        }
    }

    pub(crate) fn shape(expected: impl ToString, got: impl ToString) -> Self {
        Error::Shape {
            expected: expected.to_string(),
            got: got.to_string(),
        }
    }
}
