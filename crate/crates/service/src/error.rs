use std::path::PathBuf;

use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::Serialize;
use serde_json::json;
use thiserror::Error;

pub type Result<T, E = ServiceError> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FieldError {
    pub field: String,
    pub message: String,
}

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("unknown annotator `{0}`")]
    UnknownAnnotator(String),
    #[error("submission failed validation")]
    Validation(Vec<FieldError>),
    #[error("address `{address_id}` is not assigned to `{annotator_id}`")]
    NotAssigned { annotator_id: String, address_id: String },
    #[error("agreement not yet computable: {0}")]
    NotYetComputable(String),
    #[error("agreement feedback is disabled for this campaign")]
    AgreementDisabled,
    #[error("no image stored for `{0}`")]
    ImageNotCached(String),
    #[error("no imagery exists for `{0}`")]
    MissingImagery(String),
    #[error("bad request: {0}")]
    BadRequest(String),
    #[error("invalid campaign configuration: {0}")]
    Config(String),
    #[error("storage corrupted at {path}: {message}")]
    Corrupt { path: PathBuf, message: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Core(#[from] streetrisk_core::Error),
    #[error(transparent)]
    Imagery(#[from] streetrisk_imagery::ImageryError),
}

impl ServiceError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io {
            path: path.into(),
            source,
        }
    }

    /// Stable machine-readable code sent as `error` in response bodies.
    pub fn code(&self) -> &'static str {
        match self {
            Self::UnknownAnnotator(_) => "unknown_annotator",
            Self::Validation(_) => "validation",
            Self::NotAssigned { .. } => "not_assigned",
            Self::NotYetComputable(_) => "not_yet_computable",
            Self::AgreementDisabled => "agreement_disabled",
            Self::ImageNotCached(_) => "image_not_cached",
            Self::MissingImagery(_) => "missing_imagery",
            Self::BadRequest(_) => "bad_request",
            _ => "internal",
        }
    }

    pub fn status(&self) -> StatusCode {
        match self {
            Self::UnknownAnnotator(_) | Self::ImageNotCached(_) | Self::MissingImagery(_) => {
                StatusCode::NOT_FOUND
            }
            Self::Validation(_) => StatusCode::UNPROCESSABLE_ENTITY,
            Self::NotAssigned { .. } | Self::AgreementDisabled => StatusCode::FORBIDDEN,
            Self::NotYetComputable(_) => StatusCode::CONFLICT,
            Self::BadRequest(_) => StatusCode::BAD_REQUEST,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }
}

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let mut body = json!({ "error": self.code(), "message": self.to_string() });
        if let Self::Validation(fields) = &self {
            body["fields"] = json!(fields);
        }
        (self.status(), Json(body)).into_response()
    }
}
