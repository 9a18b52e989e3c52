//! Command implementations behind the `productmix` binary.

pub mod commands;
pub mod file;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("usage error: {0}")]
    Usage(String),
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Domain(String),
}

impl CliError {
    /// 1 for domain failures, 2 for usage and input problems.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Domain(_) => 1,
            _ => 2,
        }
    }
}

impl From<productmix::Error> for CliError {
    fn from(e: productmix::Error) -> Self {
        CliError::Domain(e.to_string())
    }
}

/// What a command prints and the exit code it asks for.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Output {
    pub stdout: String,
    pub code: i32,
}

impl Output {
    pub fn ok(stdout: String) -> Self {
        Output { stdout, code: 0 }
    }
}
