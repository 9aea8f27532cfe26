use std::path::PathBuf;

use serde_json::json;
use streetrisk_core::Error as CoreError;
use thiserror::Error;

pub type Result<T, E = CliError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("{failed} of {total} image fetches failed")]
    FetchFailures { failed: usize, total: usize },
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error(transparent)]
    Imagery(#[from] streetrisk_imagery::ImageryError),
    #[error(transparent)]
    Service(#[from] streetrisk_service::ServiceError),
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io {
            path: path.into(),
            source,
        }
    }

    pub fn code(&self) -> &'static str {
        match self {
            Self::Usage(_) => "usage",
            Self::Io { .. } => "io",
            Self::Json { .. } => "invalid_json",
            Self::FetchFailures { .. } => "fetch_failures",
            Self::Core(e) => match e {
                CoreError::Io { .. } => "io",
                CoreError::Header { .. }
                | CoreError::Csv(_)
                | CoreError::Json(_)
                | CoreError::Field { .. }
                | CoreError::UnknownAddress(_)
                | CoreError::DuplicateColumn(_) => "invalid_input",
                CoreError::Schema(_) | CoreError::UnmappedCode { .. } => "invalid_schema",
                CoreError::Config(_) => "invalid_config",
                CoreError::QuasiSeparation { .. } | CoreError::NotConverged => "fit_failed",
                CoreError::DegenerateAgreement
                | CoreError::TooFewRaters
                | CoreError::RatingTable(_)
                | CoreError::KappaOutOfRange(_) => "agreement_failed",
                _ => "pipeline_failed",
            },
            Self::Imagery(e) if e.is_retriable() => "provider_unavailable",
            Self::Imagery(_) => "imagery_failed",
            Self::Service(_) => "service_failed",
        }
    }

    /// One-line JSON for stderr.
    pub fn to_json(&self) -> String {
        json!({ "error": self.code(), "message": self.to_string() }).to_string()
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Usage(_) => 2,
            _ => 1,
        }
    }
}
