use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    Dimension {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    /// A model file could not be decoded. `offset` is the byte position at
    /// which decoding stopped.
    #[error("malformed model file at byte {offset}: {reason}")]
    Parse { offset: usize, reason: String },

    /// A dataset file could not be ingested. `line` is 1-based and counts the
    /// header row.
    #[error("dataset ingestion failed at line {line}: {reason}")]
    Ingest { line: u64, reason: String },

    #[error("unsupported primitive in loss graph: {0}")]
    UnsupportedPrimitive(String),

    #[error("non-finite {quantity} at {stage} index {index}")]
    NonFinite {
        quantity: &'static str,
        stage: &'static str,
        index: usize,
    },

    #[error("oracle `{0}` is missing Lipschitz constants required for bound checks")]
    MissingLipschitz(String),

    #[error("oracle `{name}` failed its self-test: {reason}")]
    OracleSelfTest { name: String, reason: String },

    #[error("unknown oracle `{0}`")]
    UnknownOracle(String),

    #[error("unknown algorithm `{0}`")]
    UnknownAlgorithm(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn dim(context: &'static str, expected: usize, found: usize) -> Self {
        Error::Dimension {
            context,
            expected,
            found,
        }
    }

    /// True for failures caused by numerics rather than bad input.
    pub fn is_numeric(&self) -> bool {
        matches!(self, Error::NonFinite { .. })
    }
}

pub(crate) fn check_dim(context: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::dim(context, expected, found))
    }
}
