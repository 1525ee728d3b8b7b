//! JSON HTTP API.

use std::sync::Arc;

use asknearby_core::pipeline::{GeocodeError, PipelineError};
use asknearby_core::EngineError;
use axum::body::Bytes;
use axum::extract::rejection::QueryRejection;
use axum::extract::{Query, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use serde_json::json;

use crate::app::{App, AppError, QueryInput, RecommendInput};
use crate::ingest::IngestError;

pub struct ApiError(StatusCode, String);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(json!({ "error": self.1 }))).into_response()
    }
}

impl From<AppError> for ApiError {
    fn from(e: AppError) -> Self {
        let status = match &e {
            AppError::BadInput(_) | AppError::Engine(EngineError::Pipeline(PipelineError::EmptyQuery)) => StatusCode::BAD_REQUEST,
            AppError::Ingest(IngestError::NoValidLines(_)) | AppError::Ingest(IngestError::FileNotFound(_)) => StatusCode::BAD_REQUEST,
            AppError::NotLoaded => StatusCode::SERVICE_UNAVAILABLE,
            AppError::Engine(EngineError::Geocode(GeocodeError::ClientUnavailable(_))) => StatusCode::BAD_GATEWAY,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        if status.is_server_error() {
            tracing::error!(error = %e, "request failed");
        }
        ApiError(status, e.to_string())
    }
}

fn bad_request(msg: impl Into<String>) -> ApiError {
    ApiError(StatusCode::BAD_REQUEST, msg.into())
}

/// Run blocking engine work off the async executor.
async fn blocking<T: Send + 'static>(f: impl FnOnce() -> Result<T, AppError> + Send + 'static) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError(StatusCode::INTERNAL_SERVER_ERROR, format!("worker failed: {e}")))?
        .map_err(ApiError::from)
}

pub fn router(app: Arc<App>) -> Router {
    Router::new()
        .route("/query", post(query))
        .route("/recommend", get(recommend))
        .route("/ingest", post(ingest))
        .route("/healthz", get(healthz))
        .with_state(app)
}

async fn query(State(app): State<Arc<App>>, body: Bytes) -> Result<Response, ApiError> {
    let input: QueryInput = serde_json::from_slice(&body).map_err(|e| bad_request(format!("invalid query body: {e}")))?;
    if input.q.trim().is_empty() {
        return Err(bad_request("q must be non-empty"));
    }
    let out = blocking(move || app.query(&input)).await?;
    Ok(Json(out).into_response())
}

async fn recommend(State(app): State<Arc<App>>, params: Result<Query<RecommendInput>, QueryRejection>) -> Result<Response, ApiError> {
    let Query(input) = params.map_err(|e| bad_request(e.body_text()))?;
    let out = blocking(move || app.recommend(&input)).await?;
    Ok(Json(out).into_response())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct IngestPath {
    path: String,
}

/// `application/json` bodies name a server-side file as `{"path": ...}`;
/// any other body is taken as JSON Lines to ingest directly.
async fn ingest(State(app): State<Arc<App>>, headers: HeaderMap, body: Bytes) -> Result<Response, ApiError> {
    let is_json = headers
        .get(header::CONTENT_TYPE)
        .and_then(|v| v.to_str().ok())
        .is_some_and(|v| v.split(';').next().is_some_and(|m| m.trim().eq_ignore_ascii_case("application/json")));
    let report = if is_json {
        let req: IngestPath = serde_json::from_slice(&body).map_err(|e| bad_request(format!("expected {{\"path\": ...}}: {e}")))?;
        blocking(move || app.ingest_path(std::path::Path::new(&req.path))).await?
    } else {
        let text = String::from_utf8(body.to_vec()).map_err(|_| bad_request("body is not UTF-8"))?;
        blocking(move || app.ingest_text(&text)).await?
    };
    Ok(Json(report).into_response())
}

async fn healthz(State(app): State<Arc<App>>) -> Response {
    match app.engine() {
        Some(e) => Json(json!({ "version": e.version(), "items": e.kb().len() })).into_response(),
        None => (StatusCode::SERVICE_UNAVAILABLE, Json(json!({ "version": null, "error": "no knowledge base loaded" }))).into_response(),
    }
}

pub async fn serve(app: Arc<App>, listener: tokio::net::TcpListener) -> std::io::Result<()> {
    let addr = listener.local_addr()?;
    tracing::info!(%addr, "listening");
    axum::serve(listener, router(app))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
