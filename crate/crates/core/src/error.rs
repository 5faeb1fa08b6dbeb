use thiserror::Error;

/// Errors produced by corpus ingestion, index construction, and search.
#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("duplicate document id {0:?}")]
    DuplicateDocId(String),

    #[error("raw weight {0} exceeds the quantization range for this corpus")]
    WeightOutOfRange(f64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("empty corpus")]
    EmptyCorpus,

    #[error("query has no positive-weight terms")]
    EmptyQuery,

    #[error("unknown ordering strategy {0:?} (expected \"identity\" or \"greedy\")")]
    UnknownStrategy(String),

    #[error("index format error: {0}")]
    Format(String),

    #[error("results were produced for different corpora or queries")]
    FingerprintMismatch,

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
