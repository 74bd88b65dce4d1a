use std::fmt;
use std::io;

use trendmap::Error;

/// Process exit status classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Bad arguments or configuration (exit 2).
    Usage,
    /// An input file is malformed (exit 3).
    InputFormat,
    /// The computation cannot proceed on this data (exit 4).
    Computation,
    /// Reading or writing a file failed (exit 5).
    Io,
}

#[derive(Debug)]
pub struct CliError {
    pub kind: ErrorKind,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        CliError {
            kind: ErrorKind::Usage,
            message: message.into(),
        }
    }

    pub fn computation(message: impl Into<String>) -> Self {
        CliError {
            kind: ErrorKind::Computation,
            message: message.into(),
        }
    }

    pub fn io(context: impl Into<String>, e: io::Error) -> Self {
        CliError {
            kind: ErrorKind::Io,
            message: format!("{}: {e}", context.into()),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self.kind {
            ErrorKind::Usage => 2,
            ErrorKind::InputFormat => 3,
            ErrorKind::Computation => 4,
            ErrorKind::Io => 5,
        }
    }

    /// Wraps a library error, prefixing `context`.
    pub fn from_lib(context: impl fmt::Display, e: Error) -> Self {
        let kind = match &e {
            Error::Io(_) | Error::Image(_) => ErrorKind::Io,
            Error::Format { .. } | Error::ShapeMismatch { .. } => ErrorKind::InputFormat,
            Error::InvalidArgument(_) | Error::UnknownFeature { .. } => ErrorKind::Usage,
            Error::Empty(_) | Error::Numerical(_) => ErrorKind::Computation,
        };
        CliError {
            kind,
            message: format!("{context}: {e}"),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

/// Attaches context to library results.
pub trait Context<T> {
    fn context(self, what: impl fmt::Display) -> Result<T, CliError>;
}

impl<T> Context<T> for trendmap::Result<T> {
    fn context(self, what: impl fmt::Display) -> Result<T, CliError> {
        self.map_err(|e| CliError::from_lib(what, e))
    }
}

impl<T> Context<T> for io::Result<T> {
    fn context(self, what: impl fmt::Display) -> Result<T, CliError> {
        self.map_err(|e| CliError::io(what.to_string(), e))
    }
}
