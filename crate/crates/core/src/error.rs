use thiserror::Error;

/// Errors raised anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {op}: {shapes}")]
    Shape { op: &'static str, shapes: String },

    #[error("non-finite value in input to {op}")]
    Numeric { op: &'static str },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("invalid state: {0}")]
    State(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("label error: {0}")]
    Label(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("sequence of length {len} exceeds max_len {max}")]
    Length { len: usize, max: usize },

    #[error("generation spec error: {0}")]
    Spec(String),

    #[error("non-finite loss {loss} at step {step} on minibatch {batch:?}")]
    Diverged {
        step: usize,
        loss: f64,
        batch: Vec<usize>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn contract<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Contract(msg.into()))
}
