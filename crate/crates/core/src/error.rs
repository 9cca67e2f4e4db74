use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Input is well-formed but geometrically degenerate (e.g. a rank-deficient frame).
    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("numerical underflow: {0}")]
    Underflow(String),

    /// The problem exceeds what the exhaustive searches can handle honestly.
    #[error("capacity exceeded: {0}")]
    Capacity(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    /// Two pieces of evidence contradict each other; always a bug.
    #[error("internal consistency violation: {0}")]
    Consistency(String),

    #[error("certificate rejected: {0}")]
    Certificate(String),

    #[error("input error: {0}")]
    Input(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
