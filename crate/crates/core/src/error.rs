use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid specification: {0}")]
    InvalidSpec(String),

    #[error("node {0} is out of range")]
    NodeOutOfRange(usize),

    #[error("node {0} is a wait vertex")]
    WaitVertex(usize),

    #[error("singular linear system while solving for the invariant distribution")]
    SingularSystem,

    #[error("no cycle found within the sampled walk")]
    NoCycleFound,

    #[error("instance exceeds the size cap: {0}")]
    SizeCap(String),

    #[error("strategy does not match the graph: {0}")]
    Mismatch(String),

    #[error("parse error at `{path}`: {message}")]
    Parse { path: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
