//! Command implementations behind the `disclose` binary: configuration
//! ingestion, case dispatch, verification and reproducible data emission.

pub mod commands;
pub mod config;

use std::process::ExitCode;

use thiserror::Error;

/// Exit codes: 0 ok, 1 verification failure, 2 invalid input.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("verification failed: {0}")]
    VerificationFailed(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

impl CliError {
    pub fn invalid(msg: impl Into<String>) -> Self {
        CliError::InvalidInput(msg.into())
    }

    pub fn exit_code(&self) -> ExitCode {
        match self {
            CliError::VerificationFailed(_) => ExitCode::from(1),
            CliError::InvalidInput(_) | CliError::Io { .. } => ExitCode::from(2),
        }
    }
}

impl From<disclose::env::EnvError> for CliError {
    fn from(e: disclose::env::EnvError) -> Self {
        CliError::InvalidInput(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::InvalidInput(e.to_string())
    }
}
