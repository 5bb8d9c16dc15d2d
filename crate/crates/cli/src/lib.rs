//! Command-line front end: configuration, commands and output files.

pub mod commands;
pub mod config;
pub mod output;

use thiserror::Error;
use toroid_cqed::Error as CoreError;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io(_) => 1,
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::CutoffTooSmall { .. }
            | CoreError::NotStationary { .. }
            | CoreError::ZeroMeanStream
            | CoreError::NonConvergence { .. }
            | CoreError::RankDeficient(_)
            | CoreError::WidthUnresolvable(_) => CliError::Numerical(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}
