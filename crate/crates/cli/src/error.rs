use std::fmt;

use jpegclass::{JpegError, JtfxError};
use jpegclass_nn::NnError;

/// Exit status classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exit {
    Success = 0,
    /// A batch produced nothing usable, or a check failed.
    Failure = 1,
    /// Bad usage, unreadable input or inconsistent configuration.
    Usage = 2,
}

#[derive(Debug)]
pub struct CliError {
    pub exit: Exit,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        CliError { exit: Exit::Usage, message: message.into() }
    }

    pub fn failure(message: impl Into<String>) -> Self {
        CliError { exit: Exit::Failure, message: message.into() }
    }

    pub fn io(path: &std::path::Path, e: std::io::Error) -> Self {
        CliError::usage(format!("IoError: {}: {e}", path.display()))
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

impl From<JpegError> for CliError {
    fn from(e: JpegError) -> Self {
        CliError::usage(e.to_string())
    }
}

impl From<JtfxError> for CliError {
    fn from(e: JtfxError) -> Self {
        CliError::usage(format!("FeatureIoError: {e}"))
    }
}

impl From<NnError> for CliError {
    fn from(e: NnError) -> Self {
        let exit = match e {
            NnError::NonFiniteLoss { .. } => Exit::Failure,
            _ => Exit::Usage,
        };
        CliError { exit, message: e.to_string() }
    }
}

pub type CliResult<T> = Result<T, CliError>;
