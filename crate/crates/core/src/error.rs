use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("duplicate sentence id `{0}`")]
    DuplicateId(String),

    #[error("record `{0}` has no text")]
    MissingText(String),

    #[error("invalid split ratios: {0}")]
    InvalidRatios(String),

    #[error("span markup parse error at char {position}: {reason}")]
    MarkupParse { position: usize, reason: String },

    #[error("invalid span: {0}")]
    InvalidSpan(String),

    #[error("annotation schema violation: {0}")]
    Schema(String),

    #[error("unknown annotator `{0}`")]
    UnknownAnnotator(String),

    #[error("unknown sentence `{0}`")]
    UnknownSentence(String),

    #[error("sentence `{0}` has no submissions")]
    NotSubmitted(String),

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("correlation undefined: {0}")]
    UndefinedCorrelation(String),

    #[error("no shared items between annotators")]
    NoSharedItems,

    #[error("degenerate data: {0}")]
    Degenerate(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid argument `{arg}`: {reason}")]
    InvalidArgument { arg: &'static str, reason: String },

    #[error("missing field `{0}`")]
    MissingField(String),

    #[error("sentence id mismatch between predictions and gold: {0}")]
    IdMismatch(String),

    #[error("stage-2 output could not be parsed: {0}")]
    Stage2Parse(String),

    #[error("backend `{backend}` failed: {reason}")]
    Backend { backend: String, reason: String },

    #[error("transport error: {0}")]
    Transport(String),

    #[error("{path}: line {line}: {source}")]
    JsonLine {
        path: PathBuf,
        line: usize,
        source: serde_json::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(arg: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidArgument {
            arg,
            reason: reason.into(),
        }
    }
}
