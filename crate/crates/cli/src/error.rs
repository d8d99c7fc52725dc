use std::fmt;
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Bad arguments, configuration or input files.
    Validation,
    /// Numeric failure or an output that could not be written.
    Runtime,
}

#[derive(Debug, thiserror::Error)]
pub struct CliError {
    pub stage: String,
    pub kind: ErrorKind,
    pub message: String,
}

pub type CliResult<T> = std::result::Result<T, CliError>;

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "stage {}: {}", self.stage, self.message)
    }
}

impl CliError {
    pub fn validation(stage: &str, message: impl Into<String>) -> Self {
        Self { stage: stage.into(), kind: ErrorKind::Validation, message: message.into() }
    }

    pub fn runtime(stage: &str, message: impl Into<String>) -> Self {
        Self { stage: stage.into(), kind: ErrorKind::Runtime, message: message.into() }
    }

    pub fn exit_code(&self) -> i32 {
        match self.kind {
            ErrorKind::Validation => 2,
            ErrorKind::Runtime => 3,
        }
    }

    pub fn core(stage: &str, err: velod_core::Error) -> Self {
        use velod_core::Error as E;
        match err {
            E::Numeric(_) | E::Io(_) => Self::runtime(stage, err.to_string()),
            E::Parse { .. } | E::Structure(_) | E::InvalidInput(_) => Self::validation(stage, err.to_string()),
        }
    }

    pub fn read(stage: &str, path: &Path, err: impl fmt::Display) -> Self {
        Self::validation(stage, format!("cannot read {}: {err}", path.display()))
    }

    pub fn write(stage: &str, path: &Path, err: impl fmt::Display) -> Self {
        Self::runtime(stage, format!("cannot write {}: {err}", path.display()))
    }
}

/// Attaches a stage name to core results.
pub trait StageContext<T> {
    fn stage(self, stage: &str) -> CliResult<T>;
}

impl<T> StageContext<T> for velod_core::Result<T> {
    fn stage(self, stage: &str) -> CliResult<T> {
        self.map_err(|e| CliError::core(stage, e))
    }
}
