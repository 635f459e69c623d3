use std::path::PathBuf;

use thiserror::Error;

use crate::model::PostId;

/// Errors produced anywhere in the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("invalid step grid: {0}")]
    InvalidGrid(String),

    #[error("periods {first} and {second} overlap")]
    OverlappingPeriods { first: String, second: String },

    #[error("time series unavailable for removed post {0}")]
    SeriesUnavailable(PostId),

    #[error("unknown post {0}")]
    UnknownPost(PostId),

    #[error(
        "last observation of post {post} at minute {at} falls outside every configured period"
    )]
    UnassignedPeriod { post: PostId, at: u64 },

    #[error("cannot build estimators: no surviving posts with complete time series")]
    NoSurvivors,

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error(
        "ingest aborted: {rejected} of {total} rows rejected (limit {limit:.1}%), first: {first}"
    )]
    IngestAborted {
        rejected: usize,
        total: usize,
        limit: f64,
        first: String,
    },

    #[error("{stage} stage failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

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

    #[error("config parse error: {0}")]
    Toml(#[from] toml::de::Error),
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Wraps this error with the name of the pipeline stage that produced it.
    pub fn in_stage(self, stage: &'static str) -> Self {
        match self {
            e @ Error::Stage { .. } => e,
            other => Error::Stage {
                stage,
                source: Box::new(other),
            },
        }
    }

    /// Process exit status for the CLI; distinct per stage.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Stage { stage, .. } => match *stage {
                "config" => 2,
                "gen" => 10,
                "crawl" => 11,
                "ingest" => 12,
                "infer" => 13,
                "metrics" => 14,
                "validate" => 15,
                "report" => 16,
                "compare-schedules" => 17,
                _ => 1,
            },
            Error::Config(_) | Error::Toml(_) => 2,
            _ => 1,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
