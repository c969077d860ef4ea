use std::path::PathBuf;

use crate::features::FeatureSetId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: not a readable pcap capture: {message}")]
    Capture { path: PathBuf, message: String },

    #[error("feature schema mismatch: expected {expected}, got {actual}")]
    SchemaMismatch { expected: FeatureSetId, actual: FeatureSetId },

    #[error("feature set {0} does not carry the SSL features")]
    MissingSslFeatures(FeatureSetId),

    #[error("line {line}: {message}")]
    Csv { line: u64, message: String },

    #[error("unknown column `{0}`")]
    UnknownColumn(String),

    #[error("invalid label `{0}`")]
    InvalidLabel(String),

    #[error("nothing to aggregate")]
    NothingToAggregate,

    #[error("training data holds a single class ({0}); at least two are required")]
    SingleClass(String),

    #[error("requested {requested} samples but only {available} are available")]
    SubsampleOutOfRange { requested: usize, available: usize },

    #[error("invalid experiment: {0}")]
    InvalidExperiment(String),

    #[error("model file: {0}")]
    Model(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
