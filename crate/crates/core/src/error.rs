use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    /// A caller broke a documented precondition (mixed classes, mismatched
    /// lengths, padding where none is allowed).
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("value out of domain: {0}")]
    Domain(String),

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("parse error: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("cannot merge states: {0}")]
    Merge(String),

    #[error("invalid argument: {0}")]
    Argument(String),
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
