use thiserror::Error;

/// Errors produced anywhere in the toolkit.
#[derive(Error, Debug)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("unknown event category `{0}`")]
    Category(String),
    #[error("events out of order at index {index}")]
    Ordering { index: usize },
    #[error("invalid input: {0}")]
    Input(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("non-finite value encountered in {0}")]
    Numeric(String),
    #[error("fit failed: {0}")]
    Fit(String),
    #[error("invalid generator spec: {0}")]
    Spec(String),
    #[error("split failed: {0}")]
    Split(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("malformed checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
