use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Malformed arguments: wrong dimensions, invalid probabilities, bad indices.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A policy, learner or experiment does not fit the game it is paired with.
    #[error("invalid configuration: {0}")]
    InvalidConfiguration(String),

    /// The game exceeds the size an algorithm supports.
    #[error("unsupported size: {0}")]
    UnsupportedSize(String),

    /// A mathematical invariant that should hold by construction was violated.
    #[error("internal invariant violated: {0}")]
    Internal(String),

    /// A game or experiment file could not be parsed or validated.
    #[error("{path}:{line}:{column}: {message}")]
    Parse {
        path: String,
        line: usize,
        column: usize,
        message: String,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid_input(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}

pub(crate) fn invalid_config(msg: impl Into<String>) -> Error {
    Error::InvalidConfiguration(msg.into())
}
