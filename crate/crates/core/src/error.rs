use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("missing input file {0}")]
    MissingFile(PathBuf),

    #[error("missing upstream artifact {0} (run the preceding stage first)")]
    MissingArtifact(PathBuf),

    #[error("{file}:{line}: {message}")]
    Malformed {
        file: String,
        line: u64,
        message: String,
    },

    #[error("{file}:{line}: unresolved {kind} `{key}`")]
    UnresolvedKey {
        file: String,
        line: u64,
        kind: &'static str,
        key: String,
    },

    #[error("{file}:{line}: duplicate {kind} `{key}`")]
    Duplicate {
        file: String,
        line: u64,
        kind: &'static str,
        key: String,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error(
        "stage `{stage}` failed{}: {source}",
        .stratum.as_ref().map(|s| format!(" for {s}")).unwrap_or_default()
    )]
    Stage {
        stage: &'static str,
        stratum: Option<String>,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

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

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn in_stage(self, stage: &'static str, stratum: Option<String>) -> Self {
        match self {
            e @ Error::Stage { .. } => e,
            e => Error::Stage {
                stage,
                stratum,
                source: Box::new(e),
            },
        }
    }
}
