use thiserror::Error;

#[derive(Debug, Error)]
pub enum SdpError {
    #[error("malformed problem: {0}")]
    Malformed(String),
    #[error("unsupported problem structure: {0}")]
    Unsupported(String),
    #[error("conic export: {0}")]
    Export(#[from] serde_json::Error),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, SdpError>;
