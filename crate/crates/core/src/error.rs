use thiserror::Error;

#[derive(Debug, Error)]
pub enum NetwitError {
    /// Input violates a mathematical precondition (not a state, bad selector, ...).
    #[error("domain error: {0}")]
    Domain(String),
    /// Inconsistent combination of arguments.
    #[error("usage error: {0}")]
    Usage(String),
    #[error("solver error: {0}")]
    Solver(String),
    #[error("backend does not provide {0}")]
    UnsupportedBackend(String),
    #[error(transparent)]
    Sdp(#[from] netwit_sdp::SdpError),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, NetwitError>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(NetwitError::Domain(msg.into()))
}
