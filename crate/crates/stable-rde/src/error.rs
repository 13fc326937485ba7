use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// A node index that does not name a vertex of the tree at hand.
    #[error("invalid node id {0}")]
    InvalidNode(usize),
    /// A parameter outside its documented domain.
    #[error("invalid parameter: {0}")]
    Param(String),
    /// A request that is well-formed but mathematically unanswerable
    /// (no marked point, no leaves, no calibration root, ...).
    #[error("{0}")]
    Domain(String),
    /// An exact algorithm was asked to run past its feasibility cap.
    #[error("structure too large: {got} nodes exceeds cap of {cap}")]
    SizeLimit { got: usize, cap: usize },
    /// Malformed interchange data (`rtree-v1` and friends).
    #[error("malformed tree data: {0}")]
    Format(String),
    /// Bad run configuration (CLI / config file).
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Exit code the CLI maps this error to (usage errors are handled by the
    /// argument parser itself and exit 2).
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            _ => 1,
        }
    }
}
