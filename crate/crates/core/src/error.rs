use thiserror::Error;

/// Errors raised by the library. Each variant maps onto one failure class
/// so callers (the CLI in particular) can pick an exit code.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("caps not separated: {0}")]
    CapsNotSeparated(String),
    #[error("not separated: {0}")]
    NotSeparated(String),
    #[error("infeasible parameters: {0}")]
    Infeasible(String),
    #[error("non-finite state at step {step} (t = {t})")]
    NonFinite { step: usize, t: f64 },
    #[error("numeric failure: {0}")]
    Numeric(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidInput(msg.into()))
}
