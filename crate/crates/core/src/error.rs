use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error: {0}")]
    Parse(String),

    #[error("integrity error: {0}")]
    Integrity(String),

    #[error("not found: {0}")]
    NotFound(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("backend error: {0}")]
    Backend(String),

    #[error("fixture miss: no scripted response for request key {0}")]
    FixtureMiss(String),

    #[error("adapter error: {0}")]
    Adapter(String),

    #[error("tool error: {0}")]
    Tool(String),

    #[error("sql parse error: {0}")]
    SqlParse(String),

    #[error("unsupported construct: {0}")]
    Unsupported(String),

    #[error("ambiguous column `{column}`: candidates {candidates:?}")]
    AmbiguousColumn {
        column: String,
        candidates: Vec<String>,
    },

    #[error("unknown identifier: {0}")]
    UnknownIdentifier(String),

    #[error("empty table selection")]
    EmptyTableSelection,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
