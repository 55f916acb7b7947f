use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid geometry: {0}")]
    Geometry(String),

    #[error("geometry mismatch: {0}")]
    GeometryMismatch(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("frame {frame} outside the grid time range 1..={max}")]
    FrameOutOfRange { frame: i64, max: usize },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("optimization diverged at iteration {iteration}: loss = {loss}")]
    Diverged { iteration: usize, loss: f64 },

    #[error("trajectory frames do not match: {0}")]
    FrameMismatch(String),

    #[error("unknown {registry} strategy `{name}` (known: {known})")]
    UnknownStrategy {
        registry: &'static str,
        name: String,
        known: String,
    },

    #[error("malformed {format} data: {message}")]
    Format {
        format: &'static str,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn format(format: &'static str, message: impl Into<String>) -> Self {
        Error::Format {
            format,
            message: message.into(),
        }
    }
}
