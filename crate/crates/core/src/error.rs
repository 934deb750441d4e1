use std::path::PathBuf;

/// Everything that can go wrong inside the toolkit.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("cannot access {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Manifest {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("duplicate utterance id {0:?}")]
    DuplicateId(String),

    #[error("{path}: bad magic {found:?}, expected {expected:?}")]
    BadMagic {
        path: PathBuf,
        found: [u8; 4],
        expected: [u8; 4],
    },

    #[error("{path}: unsupported format version {version}")]
    UnsupportedVersion { path: PathBuf, version: u32 },

    #[error("{path}: truncated payload, expected {expected} bytes, found {found}")]
    Truncated {
        path: PathBuf,
        expected: usize,
        found: usize,
    },

    #[error("{path}: empty embedding matrix (T = {frames}, D = {dim})")]
    EmptyEmbedding {
        path: PathBuf,
        frames: usize,
        dim: usize,
    },

    #[error("embedding dimension mismatch for {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: String,
        expected: usize,
        found: usize,
    },

    #[error("{path}:{row}: {message}")]
    FeatureTable {
        path: PathBuf,
        row: usize,
        message: String,
    },

    #[error("utterance {id:?} has no acoustic embedding")]
    MissingEmbedding { id: String },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("class {label:?} has {available} examples, {requested} requested")]
    InsufficientClass {
        label: String,
        available: usize,
        requested: usize,
    },

    #[error("label {0:?} is not in the label vocabulary")]
    UnknownLabel(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid argument: {0}")]
    Invalid(String),

    #[error("training diverged at epoch {epoch}, step {step}: loss = {loss}")]
    Diverged { epoch: usize, step: usize, loss: f64 },

    #[error("non-deterministic loss closure: {first} vs {second}")]
    NonDeterministic { first: f64, second: f64 },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
