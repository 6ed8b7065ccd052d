use std::path::PathBuf;

use qwave_core::Error as CoreError;

/// Failures of a command, split by the exit code they map to.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad scenario, missing file or violated precondition. Exit code 1.
    #[error("{context}: {message}")]
    Validation { context: String, message: String },
    /// The computation itself failed or a check did not pass. Exit code 2.
    #[error("{0}")]
    Numerical(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

pub type CliResult<T> = Result<T, CliError>;

impl CliError {
    pub fn validation(context: impl Into<String>, message: impl ToString) -> Self {
        Self::Validation { context: context.into(), message: message.to_string() }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io { path: path.into(), source }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Validation { .. } => 1,
            Self::Numerical(_) | Self::Io { .. } => 2,
        }
    }

    /// Sorts a core error into precondition failures and numerical ones.
    pub fn from_core(context: impl Into<String>, err: CoreError) -> Self {
        match err {
            CoreError::NotHermitian { .. }
            | CoreError::NonFinite(_)
            | CoreError::ZeroNorm
            | CoreError::Encoding(_) => Self::Numerical(format!("{}: {err}", context.into())),
            _ => Self::validation(context, err),
        }
    }
}

/// Attaches a context string to core results.
pub trait Context<T> {
    fn context(self, context: impl Into<String>) -> CliResult<T>;
}

impl<T> Context<T> for qwave_core::Result<T> {
    fn context(self, context: impl Into<String>) -> CliResult<T> {
        self.map_err(|e| CliError::from_core(context, e))
    }
}
