use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An input violated the documented precondition of an operation.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// Inconsistent or out-of-range configuration values.
    #[error("configuration error: {0}")]
    Config(String),

    /// A numerical procedure failed (non-convergence, NaN, defect above bound).
    #[error("numerical failure in {module}: {msg}")]
    Numerical { module: &'static str, msg: String },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("malformed data: {0}")]
    Format(String),
}

impl Error {
    pub(crate) fn numerical(module: &'static str, msg: impl Into<String>) -> Self {
        Error::Numerical { module, msg: msg.into() }
    }

    pub(crate) fn pre(msg: impl Into<String>) -> Self {
        Error::Precondition(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
