use thiserror::Error;

/// Failures surfaced by the library.
#[derive(Debug, Error)]
pub enum TmvnError {
    #[error("invalid argument: {0}")]
    Domain(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("schema error: {0}")]
    Schema(String),
    #[error("numeric failure at node {node}: {detail}")]
    Numeric { node: usize, detail: String },
    #[error("oracle cost cap exceeded: {0} evaluations requested")]
    CostCap(u64),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, TmvnError>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(TmvnError::Domain(msg.into()))
}
