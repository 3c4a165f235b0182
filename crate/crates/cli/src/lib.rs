//! Command-line front end for `cmab-select`: scoring, simulation, replay and
//! the synthetic benchmark.

pub mod args;
pub mod commands;
pub mod config;
pub mod harness;

use thiserror::Error;

/// Failure of a subcommand, classified by exit code.
#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags, config file or option values. Exit code 1.
    #[error("{0}")]
    Usage(String),
    /// Input data failed validation. Exit code 2.
    #[error("{0}")]
    Data(String),
    /// I/O or other runtime failure. Exit code 3.
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }

    /// The message flattened to one line.
    pub fn diagnostic(&self) -> String {
        self.to_string().split_whitespace().collect::<Vec<_>>().join(" ")
    }

    pub(crate) fn usage(e: impl std::fmt::Display) -> Self {
        CliError::Usage(e.to_string())
    }

    pub(crate) fn data(e: impl std::fmt::Display) -> Self {
        CliError::Data(e.to_string())
    }

    pub(crate) fn runtime(e: impl std::fmt::Display) -> Self {
        CliError::Runtime(e.to_string())
    }
}

pub use args::{Cli, Command};
pub use commands::run;
