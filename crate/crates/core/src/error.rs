use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("format error: {0}")]
    Format(String),

    #[error("unknown class id {0}")]
    UnknownClass(u32),

    #[error("degenerate pair: centroids coincide")]
    DegeneratePair,

    #[error("consistency error: {0}")]
    Consistency(String),

    #[error("schema error: {0}")]
    Schema(String),

    #[error("duplicate image id {0:?}")]
    Duplicate(String),

    #[error("empty corpus: {0}")]
    EmptyCorpus(String),

    #[error("empty distribution: joint counts sum to zero")]
    EmptyDistribution,

    #[error("degenerate training set: {0}")]
    DegenerateTraining(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("scene has {0} objects, at least 2 required")]
    NotEnoughObjects(usize),

    #[error("placement failed: {0}")]
    Placement(String),

    #[error("unsupported schema version {found} (expected {expected})")]
    Version { found: u64, expected: u64 },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Short machine-parsable tag, used by the CLI on standard error.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Format(_) => "FormatError",
            Error::UnknownClass(_) => "UnknownClassError",
            Error::DegeneratePair => "DegeneratePairError",
            Error::Consistency(_) => "ConsistencyError",
            Error::Schema(_) => "SchemaError",
            Error::Duplicate(_) => "DuplicateError",
            Error::EmptyCorpus(_) => "EmptyCorpusError",
            Error::EmptyDistribution => "EmptyDistributionError",
            Error::DegenerateTraining(_) => "DegenerateTrainingError",
            Error::Dimension { .. } => "DimensionError",
            Error::NotEnoughObjects(_) => "NotEnoughObjectsError",
            Error::Placement(_) => "PlacementError",
            Error::Version { .. } => "VersionError",
            Error::Io { .. } => "IoError",
            Error::Json(_) => "FormatError",
        }
    }
}
