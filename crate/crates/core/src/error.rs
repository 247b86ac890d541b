use thiserror::Error;

use crate::model::GraphKind;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("output index {index} out of range for K={k}")]
    NodeOutOfRange { index: usize, k: usize },

    #[error("label of output {0} is required but unassigned")]
    Unassigned(usize),

    #[error("invalid label value {0}, expected +1 or -1")]
    InvalidLabel(i64),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("{op} requires a {expected} graph")]
    WrongGraphKind { op: &'static str, expected: GraphKind },

    #[error("K={k} exceeds the exhaustive enumeration limit of {limit}")]
    TooLarge { k: usize, limit: usize },

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("model file: {0}")]
    ModelFormat(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
