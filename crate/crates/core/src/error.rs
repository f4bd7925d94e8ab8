use thiserror::Error;

/// Errors produced by the simulator and its building blocks.
#[derive(Debug, Error)]
pub enum Error {
    /// A physical or algorithmic parameter violates its domain.
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },

    /// Matrix or vector shapes do not conform.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// An iterative optimizer hit its iteration cap.
    #[error("optimizer did not converge after {iterations} iterations (gap {gap:e})")]
    NotConverged { iterations: usize, gap: f64 },

    #[error("unknown node {0}")]
    UnknownNode(usize),

    #[error("unknown channel {0}")]
    UnknownChannel(u16),

    /// The power game is malformed (e.g. a zero diagonal gain).
    #[error("invalid game: {0}")]
    InvalidGame(String),

    /// Configuration parse or validation failure, with the offending key path.
    #[error("configuration error at `{key}`: {reason}")]
    Config { key: String, reason: String },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name: name.to_string(),
        reason: reason.into(),
    }
}
