use std::fmt;

use thiserror::Error;

use crate::dataio::DataError;
use crate::interpret::StatsError;
use crate::metrics::MetricError;
use crate::models::ModelError;
use crate::preprocess::PreprocessError;
use crate::protocol::ProtocolError;
use crate::synth::SynthError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Study stage an error surfaced in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Ingest,
    Split,
    Search,
    Selection,
    Refit,
    Threshold,
    Evaluation,
    Interpretation,
    Report,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Stage::Ingest => "ingest",
            Stage::Split => "split",
            Stage::Search => "search",
            Stage::Selection => "selection",
            Stage::Refit => "refit",
            Stage::Threshold => "threshold",
            Stage::Evaluation => "evaluation",
            Stage::Interpretation => "interpretation",
            Stage::Report => "report",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Preprocess(#[from] PreprocessError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("integrity check failed: {0}")]
    Integrity(String),
    #[error("[{stage}] {source}")]
    Stage {
        stage: Stage,
        #[source]
        source: Box<Error>,
    },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed JSON artifact: {0}")]
    Json(#[from] serde_json::Error),
    #[error("internal assertion failed: {0}")]
    Internal(String),
}

impl Error {
    pub fn at(self, stage: Stage) -> Error {
        Error::Stage { stage, source: Box::new(self) }
    }

    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Error {
        Error::Io { path: path.as_ref().display().to_string(), source }
    }

    /// Innermost error with stage wrappers removed.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            e => e,
        }
    }
}

/// Extension for tagging results with a study stage.
pub trait StageExt<T> {
    fn stage(self, stage: Stage) -> Result<T>;
}

impl<T, E: Into<Error>> StageExt<T> for std::result::Result<T, E> {
    fn stage(self, stage: Stage) -> Result<T> {
        self.map_err(|e| e.into().at(stage))
    }
}
