use std::fmt;

use ecobench_core::ErrorCategory;

/// A failure tagged with the pipeline stage that produced it.
#[derive(Debug)]
pub struct CliError {
    pub stage: String,
    pub category: ErrorCategory,
    pub message: String,
}

impl CliError {
    pub fn usage(stage: &str, message: impl Into<String>) -> Self {
        Self::new(stage, ErrorCategory::Usage, message)
    }

    pub fn data(stage: &str, message: impl Into<String>) -> Self {
        Self::new(stage, ErrorCategory::Data, message)
    }

    pub fn runtime(stage: &str, message: impl Into<String>) -> Self {
        Self::new(stage, ErrorCategory::Runtime, message)
    }

    fn new(stage: &str, category: ErrorCategory, message: impl Into<String>) -> Self {
        Self {
            stage: stage.to_string(),
            category,
            message: message.into(),
        }
    }

    /// 1 usage/config, 2 data/validation, 3 runtime.
    pub fn exit_code(&self) -> i32 {
        match self.category {
            ErrorCategory::Usage => 1,
            ErrorCategory::Data => 2,
            ErrorCategory::Runtime => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "stage `{}` failed: {}", self.stage, self.message)
    }
}

impl std::error::Error for CliError {}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// Attaches a stage name to core errors.
pub trait StageExt<T> {
    fn stage(self, stage: &str) -> CliResult<T>;
}

impl<T> StageExt<T> for ecobench_core::Result<T> {
    fn stage(self, stage: &str) -> CliResult<T> {
        self.map_err(|e| {
            let category = e.category();
            CliError::new(stage, category, e.to_string())
        })
    }
}

impl<T> StageExt<T> for std::io::Result<T> {
    fn stage(self, stage: &str) -> CliResult<T> {
        self.map_err(|e| CliError::runtime(stage, e.to_string()))
    }
}
