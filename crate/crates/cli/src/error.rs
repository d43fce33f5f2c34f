use std::fmt;
use std::path::Path;

use clbt_core::Error;

pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }

    /// Wraps a core error with the file it concerns.
    pub fn at(path: &Path, err: Error) -> Self {
        let mut e = CliError::from(err);
        e.message = format!("{}: {}", path.display(), e.message);
        e
    }
}

impl From<Error> for CliError {
    fn from(err: Error) -> Self {
        let code = match &err {
            e if e.is_numerical() => EXIT_NUMERICAL,
            Error::InvalidSpec(_) => EXIT_USAGE,
            _ => EXIT_DATA,
        };
        CliError {
            code,
            message: err.to_string(),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(err: std::io::Error) -> Self {
        CliError::from(Error::Io(err))
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

pub type CliResult<T> = Result<T, CliError>;

/// Attaches a path to any core error.
pub trait WithPath<T> {
    fn at(self, path: &Path) -> CliResult<T>;
}

impl<T> WithPath<T> for clbt_core::Result<T> {
    fn at(self, path: &Path) -> CliResult<T> {
        self.map_err(|e| CliError::at(path, e))
    }
}

impl<T> WithPath<T> for std::io::Result<T> {
    fn at(self, path: &Path) -> CliResult<T> {
        self.map_err(|e| CliError::at(path, Error::Io(e)))
    }
}
