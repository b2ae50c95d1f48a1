use std::fmt;
use std::path::Path;

use inrecon_core::io::FileError;

/// Failure of one CLI invocation, split by exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad flags, missing inputs or an invalid config (exit 1).
    Usage(String),
    /// Anything that fails after the inputs were accepted (exit 2).
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }

    pub fn missing(kind: &str, path: &Path) -> Self {
        CliError::Usage(format!("{kind} not found: {}", path.display()))
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Runtime(m) => f.write_str(m),
        }
    }
}

impl std::error::Error for CliError {}

impl From<inrecon_core::Error> for CliError {
    fn from(e: inrecon_core::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<FileError> for CliError {
    fn from(e: FileError) -> Self {
        CliError::Runtime(format!("{e} [{}]", e.code()))
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
