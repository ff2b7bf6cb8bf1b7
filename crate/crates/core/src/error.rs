use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A run parameter is invalid; `param` names the offending knob
    /// (`x`, `y`, `z`, `kmax`, ...).
    #[error("invalid parameter `{param}`: {msg}")]
    Parameter { param: &'static str, msg: String },

    #[error("resource limit: {0}")]
    Resource(String),

    #[error("arithmetic overflow: {0}")]
    Overflow(String),

    /// An exact identity the code relies on did not hold.
    #[error("internal assertion failed: {0}")]
    Assertion(String),
}

impl Error {
    pub(crate) fn param(param: &'static str, msg: impl Into<String>) -> Self {
        Error::Parameter {
            param,
            msg: msg.into(),
        }
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
