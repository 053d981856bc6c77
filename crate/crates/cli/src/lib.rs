//! Command-line experiments: toy verification, sweeps, factorization,
//! detection and the loss check. Exit codes: 0 pass, 1 check failure or
//! runtime error, 2 configuration error.

pub mod args;
mod commands;
mod output;

pub use args::{Cli, Command, GlobalArgs};

use spectral_ood::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("check failed: {0}")]
    Check(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Check(_) | CliError::Runtime(_) => EXIT_FAIL,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidPopulation(_)
            | Error::InvalidAugmentation(_)
            | Error::InvalidWeights { .. }
            | Error::InvalidParameter(_)
            | Error::InvalidRank { .. }
            | Error::TooFewReferences { .. }
            | Error::DegenerateRegime(_)
            | Error::Json(_) => CliError::Config(e.to_string()),
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

/// Runs a parsed command line and returns the process exit code.
pub fn run(cli: &Cli) -> i32 {
    match commands::dispatch(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
