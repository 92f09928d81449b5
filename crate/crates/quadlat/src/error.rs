use thiserror::Error;

/// Crate-wide error type. The CLI maps variants onto process exit codes, so
/// the distinctions matter: `Parse` is a malformed document, `Precondition`
/// is a structurally valid input that violates an operation's contract, and
/// `Resource` is a deliberate cap (never an OOM kill).
#[derive(Debug, Error)]
pub enum Error {
    /// Malformed input document or flag value.
    #[error("parse error: {0}")]
    Parse(String),

    /// An operation's stated precondition does not hold for this input.
    #[error("precondition failure: {0}")]
    Precondition(String),

    /// A hard size cap was exceeded (enumeration bounds, algebra dimension).
    #[error("resource cap exceeded: {0}")]
    Resource(String),

    /// An internal invariant that the caller cannot violate was violated;
    /// indicates a bug or corrupted data, not bad user input.
    #[error("invariant violation: {0}")]
    Invariant(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn precondition(msg: impl Into<String>) -> Self {
        Error::Precondition(msg.into())
    }
    pub fn parse(msg: impl Into<String>) -> Self {
        Error::Parse(msg.into())
    }
    pub fn resource(msg: impl Into<String>) -> Self {
        Error::Resource(msg.into())
    }
    pub fn invariant(msg: impl Into<String>) -> Self {
        Error::Invariant(msg.into())
    }
}
