use std::fmt;
use std::path::Path;

/// Stable, machine-readable category of a failure.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCode {
    Usage,
    Io,
    Parse,
    UnknownFormat,
    Config,
    Data,
    Checkpoint,
    DigestMismatch,
    Gradcheck,
    Model,
}

impl ErrorCode {
    pub fn as_str(self) -> &'static str {
        match self {
            ErrorCode::Usage => "usage",
            ErrorCode::Io => "io",
            ErrorCode::Parse => "parse",
            ErrorCode::UnknownFormat => "unknown-format",
            ErrorCode::Config => "config",
            ErrorCode::Data => "data",
            ErrorCode::Checkpoint => "checkpoint",
            ErrorCode::DigestMismatch => "digest-mismatch",
            ErrorCode::Gradcheck => "gradcheck-failed",
            ErrorCode::Model => "model",
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub struct Error {
    pub code: ErrorCode,
    pub message: String,
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.code.as_str(), self.message)
    }
}

impl Error {
    pub fn new(code: ErrorCode, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }

    pub fn io(path: &Path, err: std::io::Error) -> Self {
        Self::new(ErrorCode::Io, format!("{}: {err}", path.display()))
    }

    /// One line suitable for stderr: `error: <code>: <message>`.
    pub fn line(&self) -> String {
        let flat: String = self.message.chars().map(|c| if c == '\n' { ' ' } else { c }).collect();
        format!("error: {}: {flat}", self.code.as_str())
    }
}

impl From<transnets_core::Error> for Error {
    fn from(e: transnets_core::Error) -> Self {
        use transnets_core::Error as E;
        let code = match e {
            E::Config(_) | E::KeepProb(_) | E::BadRatios | E::NoLayers => ErrorCode::Config,
            E::TooFewRecords(_) | E::Empty(_) => ErrorCode::Data,
            E::WrongModel(_) => ErrorCode::Model,
            E::MissingParam(_) => ErrorCode::Checkpoint,
            _ => ErrorCode::Model,
        };
        Self::new(code, e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
