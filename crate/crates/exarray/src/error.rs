use thiserror::Error;

/// Errors surfaced by the array laboratory.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Combinatorial count does not fit in a signed 64-bit integer.
    #[error("count out of range: {0}")]
    CountOverflow(String),

    /// A materializing operation would exceed its configured memory cap.
    #[error("cap exceeded: {0}")]
    CapExceeded(String),

    #[error("degenerate statistic: {0}")]
    Degenerate(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
