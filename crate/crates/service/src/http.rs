//! JSON-over-HTTP front end. Writes go through the pipeline's ingest queue;
//! reads take snapshots of the analytics state.

use std::future::Future;
use std::sync::Arc;

use axum::extract::{Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use log::{info, warn};
use sentiflow_core::corpus::{parse_timestamp, Document};
use serde::Deserialize;
use serde_json::{json, Value};

use crate::config::PipelineConfig;
use crate::error::{ServiceError, ServiceResult};
use crate::pipeline::{Admission, Pipeline, PipelineStats};

/// Windows returned by `/v1/summary` when `windows` is not given.
pub const DEFAULT_SUMMARY_WINDOWS: usize = 10;

pub fn router(pipeline: Arc<Pipeline>) -> Router {
    Router::new()
        .route("/v1/documents", post(post_documents))
        .route("/v1/classify", post(post_classify))
        .route("/v1/summary", get(get_summary))
        .route("/v1/alerts", get(get_alerts))
        .route("/v1/stats", get(get_stats))
        .with_state(pipeline)
}

struct ApiError(StatusCode, String);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(json!({ "error": self.1 }))).into_response()
    }
}

fn bad_request(msg: impl Into<String>) -> ApiError {
    ApiError(StatusCode::BAD_REQUEST, msg.into())
}

fn internal(e: impl std::fmt::Display) -> ApiError {
    ApiError(StatusCode::INTERNAL_SERVER_ERROR, e.to_string())
}

/// Accepts one document object or an array of them. Array entries that do not
/// parse are counted as rejected; the rest are queued.
async fn post_documents(
    State(pipeline): State<Arc<Pipeline>>,
    body: String,
) -> Result<(StatusCode, Json<Admission>), ApiError> {
    let value: Value = serde_json::from_str(&body).map_err(|e| bad_request(format!("invalid JSON: {e}")))?;
    let items = match value {
        Value::Array(items) => items,
        Value::Object(_) => vec![value],
        _ => return Err(bad_request("expected a document object or an array of documents")),
    };
    let admission = tokio::task::spawn_blocking(move || -> ServiceResult<Admission> {
        let mut out = Admission::default();
        for item in items {
            let parsed = serde_json::from_value::<Document>(item).map_err(|e| e.to_string());
            match parsed {
                Ok(doc) => {
                    if pipeline.submit(doc)? {
                        out.accepted += 1;
                    } else {
                        out.rejected += 1;
                    }
                }
                Err(e) => {
                    warn!("rejected malformed document: {e}");
                    pipeline.record_malformed();
                    out.rejected += 1;
                }
            }
        }
        Ok(out)
    })
    .await
    .map_err(internal)?
    .map_err(|e| match e {
        ServiceError::Closed => ApiError(StatusCode::SERVICE_UNAVAILABLE, e.to_string()),
        other => internal(other),
    })?;
    Ok((StatusCode::ACCEPTED, Json(admission)))
}

async fn post_classify(State(pipeline): State<Arc<Pipeline>>, body: String) -> Result<Json<Value>, ApiError> {
    let doc: Document = serde_json::from_str(&body).map_err(|e| bad_request(format!("invalid document: {e}")))?;
    let models = Arc::clone(pipeline.models());
    let outcome = tokio::task::spawn_blocking(move || models.classify(&doc))
        .await
        .map_err(internal)?;
    match outcome {
        Ok(c) => Ok(Json(serde_json::to_value(c).map_err(internal)?)),
        Err(sentiflow_core::Error::InvalidInput(m)) => Err(ApiError(StatusCode::UNPROCESSABLE_ENTITY, m)),
        Err(e @ sentiflow_core::Error::InvalidDomain { .. }) => {
            Err(ApiError(StatusCode::UNPROCESSABLE_ENTITY, e.to_string()))
        }
        Err(e) => Err(internal(e)),
    }
}

#[derive(Debug, Deserialize)]
struct SummaryQuery {
    windows: Option<usize>,
}

async fn get_summary(
    State(pipeline): State<Arc<Pipeline>>,
    Query(q): Query<SummaryQuery>,
) -> Json<crate::pipeline::Summary> {
    Json(pipeline.summary(q.windows.unwrap_or(DEFAULT_SUMMARY_WINDOWS)))
}

#[derive(Debug, Deserialize)]
struct AlertsQuery {
    since: Option<String>,
}

async fn get_alerts(
    State(pipeline): State<Arc<Pipeline>>,
    Query(q): Query<AlertsQuery>,
) -> Result<Json<Value>, ApiError> {
    let since = match q.since.as_deref() {
        None => None,
        Some(raw) => Some(match raw.parse::<i64>() {
            Ok(ms) => chrono::DateTime::from_timestamp_millis(ms).ok_or_else(|| bad_request("since out of range"))?,
            Err(_) => parse_timestamp(raw).map_err(bad_request)?,
        }),
    };
    Ok(Json(json!(pipeline.alerts_since(since))))
}

async fn get_stats(State(pipeline): State<Arc<Pipeline>>) -> Json<PipelineStats> {
    Json(pipeline.stats())
}

/// Serves until `shutdown` resolves, then drains the pipeline. Binding happens
/// before this returns control to the runtime, so a bind failure is reported
/// as an error rather than a panic.
pub async fn serve_with_shutdown<F>(
    pipeline: Arc<Pipeline>,
    listener: tokio::net::TcpListener,
    shutdown: F,
) -> ServiceResult<PipelineStats>
where
    F: Future<Output = ()> + Send + 'static,
{
    let addr = listener.local_addr().map_err(|e| ServiceError::io("<listener>", e))?;
    info!("listening on http://{addr}");
    axum::serve(listener, router(Arc::clone(&pipeline)))
        .with_graceful_shutdown(shutdown)
        .await
        .map_err(|e| ServiceError::io("<server>", e))?;
    info!("shutting down: draining pipeline");
    let stats = tokio::task::spawn_blocking(move || pipeline.shutdown())
        .await
        .map_err(|_| ServiceError::StagePanic("shutdown"))??;
    info!(
        "final counts: ingested {}, classified {}, unclassified {}, rejected {}, alerts {}",
        stats.ingested, stats.classified, stats.unclassified, stats.rejected, stats.alerts
    );
    Ok(stats)
}

pub async fn bind(addr: &str) -> ServiceResult<tokio::net::TcpListener> {
    tokio::net::TcpListener::bind(addr)
        .await
        .map_err(|source| ServiceError::Bind {
            addr: addr.to_string(),
            source,
        })
}

/// Loads everything named in `config`, binds, and serves until Ctrl-C.
pub async fn serve(config: &PipelineConfig) -> ServiceResult<PipelineStats> {
    let listener = bind(&config.service.bind).await?;
    let cfg = config.clone();
    let pipeline = tokio::task::spawn_blocking(move || Pipeline::from_config(&cfg))
        .await
        .map_err(|_| ServiceError::StagePanic("startup"))??;
    let shutdown = async {
        if tokio::signal::ctrl_c().await.is_err() {
            std::future::pending::<()>().await;
        }
    };
    serve_with_shutdown(Arc::new(pipeline), listener, shutdown).await
}
