use std::path::Path;

use thiserror::Error;

/// Failures surfaced by the command layer. Each maps onto one exit code.
#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags or an invalid configuration. Exit 1.
    #[error("{0}")]
    Config(String),
    /// Unreadable, missing or inconsistent input data. Exit 2.
    #[error("{0}")]
    Data(String),
    /// A numerical stage could not produce a result. Exit 3.
    #[error("{0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, CliError>;

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Data(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }

    pub fn io(path: &Path, err: std::io::Error) -> Self {
        CliError::Data(format!("{}: {err}", path.display()))
    }
}
