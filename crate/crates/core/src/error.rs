use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument is outside the operation's domain (bad label, negative tolerance, ...).
    #[error("domain error: {0}")]
    Domain(String),
    /// Vector or table sizes disagree.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    /// The instance exceeds a desk-scale limit (agents, profiles, paths, pivots).
    #[error("capacity exceeded: {0}")]
    Capacity(String),
    /// An iterative solver hit its iteration cap.
    #[error("iteration limit reached: {0}")]
    IterationLimit(String),
    /// A pluggable rule produced output violating its contract.
    #[error("contract violation: {0}")]
    Contract(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn dims(msg: impl Into<String>) -> Self {
        Error::DimensionMismatch(msg.into())
    }

    pub(crate) fn capacity(msg: impl Into<String>) -> Self {
        Error::Capacity(msg.into())
    }

    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    /// True for errors that the CLI reports with the capacity exit code.
    pub fn is_capacity(&self) -> bool {
        matches!(self, Error::Capacity(_) | Error::IterationLimit(_))
    }
}
