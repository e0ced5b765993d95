use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown point group `{0}`")]
    UnknownGroup(String),

    #[error("group {group} is defined for dimension {expected}, got {got}")]
    GroupDimension {
        group: String,
        expected: usize,
        got: usize,
    },

    #[error("invalid principal axis for {group}: {reason}")]
    PrincipalAxis { group: String, reason: String },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("could not place {n} particles inside box after {attempts} attempts")]
    Placement { n: usize, attempts: usize },

    #[error("checkpoint format error: {0}")]
    Checkpoint(String),

    #[error("dataset format error at line {line}: {reason}")]
    DatasetFormat { line: usize, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
