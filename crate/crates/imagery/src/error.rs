use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = ImageryError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum ImageryError {
    #[error("empty address")]
    EmptyAddress,
    #[error("invalid image request: {0}")]
    InvalidRequest(String),
    #[error("address `{0}` is not resolved")]
    NotResolved(String),
    /// Transient provider or network failure; the call may be retried.
    #[error("provider unavailable (retriable): {0}")]
    Retriable(String),
    /// The provider answered but refused the request.
    #[error("provider rejected the request: {0}")]
    Provider(String),
    #[error("missing API key: set {0}")]
    MissingKey(String),
    #[error("cache entry for `{address_id}`/{view} failed its hash check")]
    CorruptCache { address_id: String, view: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Core(#[from] streetrisk_core::Error),
}

impl ImageryError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io {
            path: path.into(),
            source,
        }
    }

    pub fn is_retriable(&self) -> bool {
        matches!(self, Self::Retriable(_))
    }
}
