use alloc::string::String;

/// Errors raised by the numerical core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("sequence length {len} is shorter than the convolution window {window}")]
    SequenceTooShort { len: usize, window: usize },
    #[error("token id {id} out of range for a table with {rows} rows")]
    TokenOutOfRange { id: u32, rows: usize },
    #[error("keep probability {0} is outside (0, 1]")]
    KeepProb(f64),
    #[error("no recorded forward computation for node {0}")]
    NoForward(usize),
    #[error("need at least 3 records to split, got {0}")]
    TooFewRecords(usize),
    #[error("split ratios must be non-negative and sum to 1")]
    BadRatios,
    #[error("transform needs at least one layer")]
    NoLayers,
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error("invalid config: {0}")]
    Config(String),
    #[error("operation not supported by model kind {0}")]
    WrongModel(&'static str),
    #[error("missing parameter {0}")]
    MissingParam(String),
}

pub type Result<T, E = Error> = core::result::Result<T, E>;
