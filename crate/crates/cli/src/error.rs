use std::fmt;
use std::process::ExitCode;

use tot_core::Error;

/// Command failure, classified by exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad flags, configuration or incompatible inputs (exit 2).
    Usage(String),
    /// Unreadable or malformed files (exit 3).
    Data(String),
    /// Training or prediction produced non-finite numbers (exit 4).
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(match self {
            CliError::Usage(_) => 2,
            CliError::Data(_) => 3,
            CliError::Numeric(_) => 4,
        })
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Data(m) => write!(f, "data error: {m}"),
            CliError::Numeric(m) => write!(f, "numeric error: {m}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let msg = e.to_string();
        match e {
            Error::NonFinite(_) => CliError::Numeric(msg),
            Error::EmptyMask
            | Error::MaskSyntax(_)
            | Error::Config(_)
            | Error::VariantMismatch(_)
            | Error::Incompatible(_) => CliError::Usage(msg),
            Error::InvalidFrame(_)
            | Error::InvalidEvent { .. }
            | Error::DuplicateEvent(_)
            | Error::UnknownActivity { .. }
            | Error::Parse { .. }
            | Error::Shape(_)
            | Error::Checkpoint(_)
            | Error::CheckpointVersion { .. }
            | Error::Io { .. } => CliError::Data(msg),
        }
    }
}
