//! Command-line driver for the bioconvection stability solver: flat config
//! files in, CSV tables and a run manifest out.

pub mod args;
pub mod case;
pub mod commands;
pub mod output;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Solver(String),
    #[error("{context}: {source}")]
    Io {
        context: String,
        source: std::io::Error,
    },
    #[error("{failed} of {total} sweep rows failed")]
    PartialSweep { failed: usize, total: usize },
}

impl CliError {
    /// 0 success, 2 config error, 3 solver failure, 4 partial sweep.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Solver(_) | CliError::Io { .. } => 3,
            CliError::PartialSweep { .. } => 4,
        }
    }
}

impl From<biostab_core::Error> for CliError {
    fn from(e: biostab_core::Error) -> Self {
        use biostab_core::Error as E;
        match e {
            E::Config(m) => CliError::Config(m),
            E::Validation { .. } => CliError::Config(e.to_string()),
            other => CliError::Solver(other.to_string()),
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
