use thiserror::Error;

/// Errors raised by the library. CLI exit codes map from these variants.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Argument outside the domain of a function (e.g. the origin for a
    /// homogeneous kernel).
    #[error("domain error: {0}")]
    Domain(String),

    /// A numeric parameter violates its precondition.
    #[error("{name}: {message}")]
    Parameter { name: String, message: String },

    /// A user-supplied spec string or config key could not be parsed.
    #[error("{key}: {message}")]
    Config { key: String, message: String },

    /// A computation produced a non-finite value.
    #[error("numeric failure at {context}: {message}")]
    Numeric { context: String, message: String },

    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn param(name: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parameter {
            name: name.into(),
            message: message.into(),
        }
    }

    pub(crate) fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }

    /// True for errors that a CLI caller should report as invalid input.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Parameter { .. } | Error::Config { .. } | Error::Domain(_)
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
