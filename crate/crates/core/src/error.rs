use thiserror::Error;

/// Failure classes shared by every module.
#[derive(Debug, Error)]
pub enum Error {
    /// Malformed or out-of-contract arguments.
    #[error("invalid input: {0}")]
    Input(String),
    /// Input files that could not be decoded.
    #[error("parse error: {0}")]
    Parse(String),
    /// A computed result broke an invariant that should hold by construction.
    #[error("internal invariant violated: {0}")]
    Internal(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn input<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Input(msg.into()))
}

pub(crate) fn internal<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Internal(msg.into()))
}
