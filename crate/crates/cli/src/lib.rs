//! Command-line front end: servers, script replay, export, validation and
//! benchmarking.

pub mod bench;
pub mod cli;
pub mod commands;
pub mod replay;
pub mod script;

use thiserror::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_MISMATCH: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad arguments, or a failure outside the user's inputs (sockets, disk).
    #[error("{0}")]
    Runtime(String),
    /// Model, script or configuration rejected.
    #[error("{0}")]
    Invalid(String),
    /// Replay output differs from the golden file.
    #[error("{0}")]
    Mismatch(String),
}

impl CliError {
    pub fn invalid(e: impl std::fmt::Display) -> Self {
        CliError::Invalid(e.to_string())
    }

    pub fn runtime(e: impl std::fmt::Display) -> Self {
        CliError::Runtime(e.to_string())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Runtime(_) => EXIT_USAGE,
            CliError::Invalid(_) => EXIT_INVALID,
            CliError::Mismatch(_) => EXIT_MISMATCH,
        }
    }
}
