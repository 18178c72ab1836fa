use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("no parseable documents in {0} ({1} malformed lines)")]
    EmptyCorpus(PathBuf, usize),
    #[error("invalid generator or ensemble spec: {0}")]
    InvalidSpec(String),
    #[error("invalid corpus: {0}")]
    InvalidCorpus(String),
    #[error("domain id {domain} out of range (n_domains = {n_domains})")]
    InvalidDomain { domain: usize, n_domains: usize },
    #[error("unknown aspect `{0}`")]
    InvalidAspect(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("invalid model config: {0}")]
    InvalidConfig(String),
    #[error("invalid batch: {0}")]
    InvalidBatch(String),
    #[error("need at least {needed} windows, got {got}")]
    InsufficientData { needed: usize, got: usize },
    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
    #[error("duplicate document id `{0}`")]
    DuplicateId(String),
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
}
