use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::header;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use streetrisk_imagery::View;
use tower_http::services::ServeDir;

use crate::error::{Result, ServiceError};
use crate::service::{Service, Submission};

type Shared = State<Arc<Service>>;

#[derive(Debug, Deserialize)]
struct AnnotatorQuery {
    annotator: Option<String>,
}

impl AnnotatorQuery {
    fn id(self) -> Result<String> {
        match self.annotator {
            Some(a) if !a.is_empty() => Ok(a),
            _ => Err(ServiceError::BadRequest("query parameter `annotator` is required".into())),
        }
    }
}

/// Runs blocking storage work off the async executor.
async fn blocking<T: Send + 'static>(f: impl FnOnce() -> Result<T> + Send + 'static) -> Result<T> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ServiceError::BadRequest(format!("worker failed: {e}")))?
}

async fn schema(State(s): Shared) -> Response {
    Json(s.schema().clone()).into_response()
}

async fn next_task(State(s): Shared, Query(q): Query<AnnotatorQuery>) -> Result<Response> {
    let id = q.id()?;
    Ok(Json(s.next_task(&id)?).into_response())
}

async fn submit(State(s): Shared, body: Bytes) -> Result<Response> {
    let submission: Submission =
        serde_json::from_slice(&body).map_err(|e| ServiceError::BadRequest(format!("invalid JSON body: {e}")))?;
    let ack = blocking(move || s.submit(submission)).await?;
    Ok(Json(ack).into_response())
}

async fn progress(State(s): Shared, Query(q): Query<AnnotatorQuery>) -> Result<Response> {
    let id = q.id()?;
    Ok(Json(s.progress(&id)?).into_response())
}

async fn agreement(State(s): Shared) -> Result<Response> {
    Ok(Json(s.agreement()?).into_response())
}

fn content_type(ext: &str) -> &'static str {
    match ext {
        "jpg" | "jpeg" => "image/jpeg",
        "png" => "image/png",
        "webp" => "image/webp",
        "gif" => "image/gif",
        "svg" => "image/svg+xml",
        _ => "application/octet-stream",
    }
}

async fn image(State(s): Shared, Path((address_id, view)): Path<(String, String)>) -> Result<Response> {
    let view: View = view
        .parse()
        .map_err(|_| ServiceError::BadRequest(format!("unknown view `{view}`")))?;
    let (bytes, ext) = blocking(move || s.image(&address_id, view)).await?;
    Ok(([(header::CONTENT_TYPE, content_type(&ext))], bytes).into_response())
}

async fn export(State(s): Shared) -> Result<Response> {
    let csv = blocking(move || s.export_csv()).await?;
    Ok(([(header::CONTENT_TYPE, "text/csv; charset=utf-8")], csv).into_response())
}

/// The JSON API. With `assets`, other paths serve files from that directory.
pub fn router(service: Arc<Service>, assets: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/api/schema", get(schema))
        .route("/api/tasks/next", get(next_task))
        .route("/api/annotations", post(submit))
        .route("/api/progress", get(progress))
        .route("/api/agreement", get(agreement))
        .route("/api/images/{address_id}/{view}", get(image))
        .route("/api/export/annotations.csv", get(export))
        .with_state(service);
    match assets {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    }
}

pub async fn serve(service: Arc<Service>, addr: SocketAddr, assets: Option<PathBuf>) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    axum::serve(listener, router(service, assets)).await
}
