use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid coordinate: lat {lat}, lon {lon}")]
    InvalidCoordinate { lat: f64, lon: f64 },

    #[error("undefined bearing between coincident points")]
    UndefinedBearing,

    #[error("parse error at line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("graphml: {0}")]
    GraphMl(String),

    #[error("validation error: {0}")]
    Validation(String),

    #[error("unknown node id {0:?}")]
    UnknownNode(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("no valid perturbations")]
    NoValidPerturbations,

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("zero variance in {0}")]
    ZeroVariance(String),

    #[error("need at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("stage {stage:?}: {inner}")]
    Stage { stage: &'static str, inner: Box<Error> },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Tags an error with the pipeline stage that produced it.
    pub fn in_stage(self, stage: &'static str) -> Self {
        match self {
            e @ Error::Stage { .. } => e,
            e => Error::Stage {
                stage,
                inner: Box::new(e),
            },
        }
    }

    pub fn stage(&self) -> Option<&'static str> {
        match self {
            Error::Stage { stage, .. } => Some(stage),
            _ => None,
        }
    }
}
