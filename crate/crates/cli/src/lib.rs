//! Batch driver for the fbms toolkit: configuration, validation checks and artifacts.

pub mod checks;
pub mod commands;
pub mod config;
pub mod report;

use fbms_core::FbmsError;

/// Process exit codes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Exit {
    Success = 0,
    Internal = 1,
    Infeasible = 2,
    ChecksFailed = 3,
    MaxIterations = 4,
    Diverged = 5,
    Usage = 64,
}

impl Exit {
    pub fn code(self) -> i32 {
        self as i32
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] FbmsError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Internal(String),
}

impl CliError {
    pub fn exit(&self) -> Exit {
        match self {
            CliError::Usage(_) => Exit::Usage,
            CliError::Core(FbmsError::Infeasible(_)) => Exit::Infeasible,
            CliError::Core(FbmsError::Divergence(_)) => Exit::Diverged,
            _ => Exit::Internal,
        }
    }
}
