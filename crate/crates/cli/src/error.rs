use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("{0}")]
    Tolerance(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Tolerance(_) => 1,
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io { .. } => 4,
        }
    }

    pub fn io(path: &Path, err: impl std::fmt::Display) -> Self {
        CliError::Io {
            path: path.display().to_string(),
            message: err.to_string(),
        }
    }

    pub fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }
}

impl From<lightshift_core::Error> for CliError {
    fn from(e: lightshift_core::Error) -> Self {
        match e {
            lightshift_core::Error::Distribution(e) => CliError::Config(e.to_string()),
            lightshift_core::Error::Sequence(e) => CliError::Config(e.to_string()),
            lightshift_core::Error::Fit(e) => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<lightshift_core::SequenceError> for CliError {
    fn from(e: lightshift_core::SequenceError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<lightshift_core::DistributionError> for CliError {
    fn from(e: lightshift_core::DistributionError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<lightshift_core::FitError> for CliError {
    fn from(e: lightshift_core::FitError) -> Self {
        CliError::Numerical(e.to_string())
    }
}
