use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the take-over time library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("feature mask has no groups enabled")]
    EmptyMask,

    #[error("invalid feature mask `{0}`: expected a combination of F, G, H, S, O")]
    MaskSyntax(String),

    #[error("invalid frame: {0}")]
    InvalidFrame(String),

    #[error("event `{event_id}`: {reason}")]
    InvalidEvent { event_id: String, reason: String },

    #[error("duplicate event id `{0}`")]
    DuplicateEvent(String),

    #[error("unknown activity label `{label}`; valid labels are: {valid}")]
    UnknownActivity { label: String, valid: String },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("variant mismatch: {0}")]
    VariantMismatch(String),

    #[error("incompatible models: {0}")]
    Incompatible(String),

    #[error("checkpoint format error: {0}")]
    Checkpoint(String),

    #[error("checkpoint version {found} is not supported (expected {expected})")]
    CheckpointVersion { found: u32, expected: u32 },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn event(event_id: &str, reason: impl Into<String>) -> Self {
        Error::InvalidEvent {
            event_id: event_id.to_string(),
            reason: reason.into(),
        }
    }

    /// True for failures caused by arithmetic blowing up rather than bad input.
    pub fn is_numeric(&self) -> bool {
        matches!(self, Error::NonFinite(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
