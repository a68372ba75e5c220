//! Library half of the `opengp` command-line harness: experiment
//! configuration, the runner that produces CSV/summary/manifest files,
//! and standalone analysis of saved trees.

pub mod config;
pub mod experiment;
pub mod report;

use thiserror::Error;

/// Errors split by exit class: configuration problems exit 1, runtime and
/// I/O problems exit 2.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }
}

pub(crate) fn config_err<T>(msg: impl Into<String>) -> Result<T, CliError> {
    Err(CliError::Config(msg.into()))
}
