use thiserror::Error;

/// Errors raised by the geometry, modulus, function-space and construction layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// The requested object does not exist under the given parameters.
    #[error("infeasible: {0}")]
    Infeasible(String),
    /// A construction was called on inputs violating its preconditions.
    #[error("misuse: {0}")]
    Misuse(String),
    /// A budgeted search inside a construction did not succeed.
    #[error("construction failure: {reason} ({diagnostics})")]
    ConstructionFailure { reason: String, diagnostics: String },
    /// An internal invariant of a map expression was breached.
    #[error("invariant breach: {0}")]
    Invariant(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
