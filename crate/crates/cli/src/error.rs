use std::io;
use std::path::Path;

use thiserror::Error;

/// Process exit codes.
pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_IO: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags or arguments.
    #[error("{0}")]
    Usage(String),
    /// Input that parsed but failed validation, or a failing computation.
    #[error(transparent)]
    Core(#[from] tmimi::Error),
    #[error("{path}: {source}")]
    Io { path: String, source: io::Error },
}

impl CliError {
    pub fn io(path: impl AsRef<Path>, source: io::Error) -> Self {
        CliError::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    /// Like [`From`], but attributes I/O failures inside `e` to `path`.
    pub fn at(path: impl AsRef<Path>, e: tmimi::Error) -> Self {
        match e {
            tmimi::Error::Io(source) => Self::io(path, source),
            other => CliError::Core(other),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Io { .. } | CliError::Core(tmimi::Error::Io(_)) => EXIT_IO,
            CliError::Core(_) => EXIT_DATA,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
