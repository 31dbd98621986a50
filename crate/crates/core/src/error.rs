use std::io;

use thiserror::Error;

/// Errors produced anywhere in the localization pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("degenerate anchor geometry: {0}")]
    DegenerateGeometry(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("no correlation peak: {0}")]
    NoPeak(String),

    #[error("instance too large: {0}")]
    Size(String),

    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("model state error: {0}")]
    State(String),

    /// `checkpoint` holds the serialized last finite model, when one exists.
    #[error("training diverged at epoch {epoch}: {reason}")]
    Training { epoch: usize, reason: String, checkpoint: Option<Vec<u8>> },

    #[error("protocol violation in state {state}: unexpected {message}")]
    ProtocolViolation { state: String, message: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("revolution {revolution}: {source}")]
    Revolution {
        revolution: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o error: {0}")]
    Io(#[from] io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn param(msg: impl Into<String>) -> Error {
    Error::Parameter(msg.into())
}

pub(crate) fn shape(msg: impl Into<String>) -> Error {
    Error::Shape(msg.into())
}

pub(crate) fn state(msg: impl Into<String>) -> Error {
    Error::State(msg.into())
}
