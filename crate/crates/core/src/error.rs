use thiserror::Error;

use crate::types::SetId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("vector dimensions differ: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("zero vector has no direction")]
    ZeroVector,

    #[error("set {set_id} is not in bucket {bucket}")]
    MissingEntry { set_id: SetId, bucket: usize },

    #[error("invalid search parameters: {0}")]
    InvalidParams(String),

    #[error("unknown similarity provider `{0}`")]
    UnknownProvider(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
