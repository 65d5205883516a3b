//! CLI error taxonomy mapped onto process exit codes.

use std::fmt;
use std::process::ExitCode;

/// Error categories with stable exit codes: configuration/schema problems
/// exit 2, file-system problems exit 3, and numerical or dimensional
/// failures exit 4.
#[derive(Debug)]
pub enum AppError {
    Config(String),
    Io(String),
    Numeric(String),
}

impl AppError {
    pub fn exit_code(&self) -> ExitCode {
        match self {
            AppError::Config(_) => ExitCode::from(2),
            AppError::Io(_) => ExitCode::from(3),
            AppError::Numeric(_) => ExitCode::from(4),
        }
    }

    pub fn config(msg: impl fmt::Display) -> Self {
        AppError::Config(msg.to_string())
    }

    pub fn numeric(msg: impl fmt::Display) -> Self {
        AppError::Numeric(msg.to_string())
    }

    pub fn io_at(path: &std::path::Path, err: impl fmt::Display) -> Self {
        AppError::Io(format!("{}: {}", path.display(), err))
    }
}

impl fmt::Display for AppError {
    /// Single-line machine-parsable form: `error <kind> <message>`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (kind, msg) = match self {
            AppError::Config(m) => ("config", m),
            AppError::Io(m) => ("io", m),
            AppError::Numeric(m) => ("numeric", m),
        };
        let one_line = msg.replace('\n', " ");
        write!(f, "error {kind}: {one_line}")
    }
}

impl std::error::Error for AppError {}

impl From<std::io::Error> for AppError {
    fn from(e: std::io::Error) -> Self {
        AppError::Io(e.to_string())
    }
}
