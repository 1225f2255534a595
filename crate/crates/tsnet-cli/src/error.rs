//! Error type with the exit-code contract: 2 usage/config, 3 I/O,
//! 4 numeric failure.

use std::fmt;

#[derive(Debug)]
pub enum CliError {
    /// Bad flags, malformed config or instance files, missing
    /// checkpoints, unknown methods.
    Usage(String),
    /// Filesystem problems.
    Io(String),
    /// Non-finite losses or solver breakdowns.
    Numeric(String),
}

pub type CliResult<T> = Result<T, CliError>;

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Io(_) => 3,
            CliError::Numeric(_) => 4,
        }
    }

    pub fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "error: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
            CliError::Numeric(m) => write!(f, "numeric error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<tsnet_core::Error> for CliError {
    fn from(e: tsnet_core::Error) -> Self {
        CliError::Usage(e.to_string())
    }
}
