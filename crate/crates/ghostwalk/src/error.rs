use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// An exhaustive enumeration would exceed its configured cap.
    #[error("{what} cap exceeded (cap {cap})")]
    CapExceeded { what: &'static str, cap: u64 },

    #[error("parse error: {0}")]
    Parse(String),

    /// A structural property (crossing / consecutive-collision) that the
    /// algorithms rely on failed to hold on the given instance.
    #[error("planarity violated: {0}")]
    Planarity(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
