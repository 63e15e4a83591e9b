use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// The requested parameters leave the regime the source model describes
    /// (for example mean pairs per coherence cell >= 1).
    #[error("model regime violated: {0}")]
    Regime(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("grid too coarse: {0}")]
    GridTooCoarse(String),

    #[error("grid of {cells} cells exceeds the limit of {limit}")]
    GridTooLarge { cells: usize, limit: usize },

    #[error("{stream} stream is not sorted at index {index}")]
    Unsorted { stream: &'static str, index: usize },

    #[error("observation time is zero")]
    EmptyDuration,

    #[error("zero rate: {0}")]
    ZeroRate(&'static str),

    #[error("config: {0}")]
    Config(String),

    #[error("event file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
