use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("{side} node {id} out of range (count {count})")]
    NodeOutOfRange {
        side: &'static str,
        id: usize,
        count: usize,
    },

    #[error("graph with {nodes} nodes exceeds the brute-force cap of {cap}")]
    TooLarge { nodes: usize, cap: usize },

    #[error("invalid fractional matching: {0}")]
    InvalidFractional(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// An internal invariant failed. Always a bug.
    #[error("internal invariant violated: {0}")]
    Internal(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
