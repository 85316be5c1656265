use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid instance: {0}")]
    Invalid(String),
    #[error("undefined arithmetic: {0}")]
    Arithmetic(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("node cap of {cap} exceeded")]
    NodeCap { cap: u64 },
    #[error("infeasible: {0}")]
    Infeasible(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::Invalid(msg.into())
}

pub(crate) fn precondition(msg: impl Into<String>) -> Error {
    Error::Precondition(msg.into())
}
