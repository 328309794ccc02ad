//! JSON over HTTP.
//!
//! | method | path | body / query | reply |
//! |---|---|---|---|
//! | GET | `/api/task` | `worker` | task, or 204 when nothing is left |
//! | POST | `/api/rating` | `{worker, task_id, score}` | acknowledgment |
//! | GET | `/api/summary` | | filtered means table |
//! | GET | `/api/progress` | `worker` (optional) | counts |
//!
//! Errors are `{"error": {"kind", "message"}}` with kinds `bad_request`
//! (400), `unknown_task` (404), `duplicate_submission` (409),
//! `out_of_range_score` (422) and `internal` (500).

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};
use std::time::Instant;

use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::extract::{Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use metaphor_forge_core::eval::ratings::Dimension;
use serde::{Deserialize, Serialize};
use serde_json::json;
use tokio::net::TcpListener;
use tower_http::services::ServeDir;

use super::store::{Store, SubmitError};
use super::{Guideline, Guidelines};

pub struct AppState {
    pub store: Mutex<Store>,
    pub guidelines: Guidelines,
}

impl AppState {
    pub fn new(store: Store, guidelines: Guidelines) -> Arc<Self> {
        Arc::new(Self {
            store: Mutex::new(store),
            guidelines,
        })
    }

    fn store(&self) -> std::sync::MutexGuard<'_, Store> {
        // a panic inside a handler leaves the store consistent: every
        // mutation happens after the fallible steps
        self.store.lock().unwrap_or_else(|e| e.into_inner())
    }
}

struct ApiError {
    status: StatusCode,
    kind: &'static str,
    message: String,
}

impl ApiError {
    fn bad_request(message: impl Into<String>) -> Self {
        Self {
            status: StatusCode::BAD_REQUEST,
            kind: "bad_request",
            message: message.into(),
        }
    }
}

impl From<SubmitError> for ApiError {
    fn from(e: SubmitError) -> Self {
        let (status, kind) = match e {
            SubmitError::UnknownTask(_) => (StatusCode::NOT_FOUND, "unknown_task"),
            SubmitError::Duplicate(_) => (StatusCode::CONFLICT, "duplicate_submission"),
            SubmitError::OutOfRange(_) => (StatusCode::UNPROCESSABLE_ENTITY, "out_of_range_score"),
            SubmitError::Io(_) => (StatusCode::INTERNAL_SERVER_ERROR, "internal"),
        };
        if status.is_server_error() {
            log::error!("{e}");
        }
        Self {
            status,
            kind,
            message: e.to_string(),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = json!({ "error": { "kind": self.kind, "message": self.message } });
        (self.status, Json(body)).into_response()
    }
}

#[derive(Debug, Deserialize)]
struct WorkerQuery {
    worker: Option<String>,
}

fn worker_of(q: Result<Query<WorkerQuery>, QueryRejection>, required: bool) -> Result<Option<String>, ApiError> {
    let Query(q) = q.map_err(|e| ApiError::bad_request(e.body_text()))?;
    match q.worker {
        Some(w) if !w.trim().is_empty() => Ok(Some(w)),
        _ if required => Err(ApiError::bad_request("query parameter `worker` is required")),
        _ => Ok(None),
    }
}

#[derive(Debug, Serialize)]
struct Scale {
    min: u8,
    max: u8,
}

#[derive(Debug, Serialize)]
struct TaskBody<'a> {
    task_id: String,
    item_id: String,
    dimension: Dimension,
    sentences: Vec<String>,
    guideline: &'a str,
    anchors: Anchors<'a>,
    scale: Scale,
}

#[derive(Debug, Serialize)]
struct Anchors<'a> {
    low: &'a str,
    high: &'a str,
}

async fn task(
    State(app): State<Arc<AppState>>,
    q: Result<Query<WorkerQuery>, QueryRejection>,
) -> Result<Response, ApiError> {
    let worker = worker_of(q, true)?.unwrap_or_default();
    let Some(a) = app.store().next_task(&worker, Instant::now()) else {
        return Ok(StatusCode::NO_CONTENT.into_response());
    };
    let g: &Guideline = app.guidelines.get(a.dimension);
    let body = TaskBody {
        task_id: a.task_id,
        item_id: a.item_id,
        dimension: a.dimension,
        sentences: a.sentences,
        guideline: &g.guideline,
        anchors: Anchors {
            low: &g.low,
            high: &g.high,
        },
        scale: Scale { min: 1, max: 4 },
    };
    Ok(Json(body).into_response())
}

#[derive(Debug, Deserialize)]
struct RatingBody {
    worker: String,
    task_id: String,
    score: i64,
}

async fn rating(
    State(app): State<Arc<AppState>>,
    body: Result<Json<RatingBody>, JsonRejection>,
) -> Result<Response, ApiError> {
    let Json(b) = body.map_err(|e| ApiError::bad_request(e.body_text()))?;
    if b.worker.trim().is_empty() {
        return Err(ApiError::bad_request("field `worker` must not be empty"));
    }
    // the append waits for the disk, so keep it off the async workers
    let ack = tokio::task::spawn_blocking(move || app.store().submit(&b.worker, &b.task_id, b.score))
        .await
        .map_err(|e| ApiError {
            status: StatusCode::INTERNAL_SERVER_ERROR,
            kind: "internal",
            message: e.to_string(),
        })??;
    Ok(Json(ack).into_response())
}

async fn summary(State(app): State<Arc<AppState>>) -> Response {
    Json(app.store().summary()).into_response()
}

async fn progress(
    State(app): State<Arc<AppState>>,
    q: Result<Query<WorkerQuery>, QueryRejection>,
) -> Result<Response, ApiError> {
    let worker = worker_of(q, false)?;
    Ok(Json(app.store().progress(worker.as_deref())).into_response())
}

/// The API routes, plus the files under `static_dir` for every other path.
pub fn router(state: Arc<AppState>, static_dir: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/api/task", get(task))
        .route("/api/rating", post(rating))
        .route("/api/summary", get(summary))
        .route("/api/progress", get(progress))
        .with_state(state);
    match static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    }
}

/// Serves until `shutdown` resolves.
pub async fn serve(
    listener: TcpListener,
    app: Router,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    let addr: SocketAddr = listener.local_addr()?;
    log::info!("listening on http://{addr}");
    axum::serve(listener, app).with_graceful_shutdown(shutdown).await
}
