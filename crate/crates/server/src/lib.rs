//! HTTP/JSON service for interactive fairing sessions.
//!
//! | route | effect |
//! |---|---|
//! | `POST /sessions` | create a session, `201` with the initial snapshot |
//! | `GET /sessions/{id}` | latest snapshot |
//! | `GET /sessions/{id}/comb?samples=K&scale=S` | curvature comb of the latest snapshot |
//! | `GET /sessions/{id}/history` | creation request, actions and rounds |
//! | `GET /sessions/{id}/data` | the data points |
//! | `POST /sessions/{id}/weights` | paint smoothing weights |
//! | `POST /sessions/{id}/step` | `count` iterations |
//! | `POST /sessions/{id}/run` | iterate until the stopping rule fires, optionally in the background |
//! | `POST /sessions/{id}/cancel` | stop a background run |
//! | `POST /sessions/{id}/knots` | insert knots, starting a new round |
//! | `DELETE /sessions/{id}` | drop the session |
//!
//! Each session admits one mutation at a time; a second one gets `409`.
//! Reads never wait: they see the snapshot published by the last mutation
//! (or the progress of a running one).

pub mod session;

use std::collections::HashMap;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, RwLock};
use std::time::{Duration, Instant};

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use tokio::sync::{Mutex, OwnedMutexGuard};
use tower_http::cors::{Any, CorsLayer};

use fairpia::geometry::curvature_comb;
use fairpia::{FairingError, StoppingRule};
use session::{CreateRequest, Session, SessionError, Snapshot, Status, WeightsRequest};

pub use session::{Action, History, Round, StepOutcome};

const BODY_LIMIT: usize = 64 * 1024 * 1024;
const MAX_COMB_SAMPLES: usize = 100_000;
const PUBLISH_INTERVAL: Duration = Duration::from_millis(100);

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        Self { status, message: message.into() }
    }

    fn not_found(id: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, format!("no session {id}"))
    }
}

impl From<FairingError> for ApiError {
    fn from(e: FairingError) -> Self {
        let status = match e {
            FairingError::Json(_) | FairingError::Parse { .. } => StatusCode::BAD_REQUEST,
            _ => StatusCode::UNPROCESSABLE_ENTITY,
        };
        Self::new(status, e.to_string())
    }
}

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        match e {
            SessionError::Invalid(e) => e.into(),
            SessionError::Diverged(_) => Self::new(StatusCode::GONE, e.to_string()),
        }
    }
}

#[derive(Serialize)]
struct ErrorBody<'a> {
    error: &'a str,
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(ErrorBody { error: &self.message })).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

struct Entry {
    session: Arc<Mutex<Session>>,
    published: RwLock<Arc<Snapshot>>,
    cancel: AtomicBool,
}

impl Entry {
    fn publish(&self, snapshot: Snapshot) {
        *self.published.write().expect("snapshot lock poisoned") = Arc::new(snapshot);
    }

    fn latest(&self) -> Arc<Snapshot> {
        self.published.read().expect("snapshot lock poisoned").clone()
    }

    fn lock(self: &Arc<Self>) -> ApiResult<OwnedMutexGuard<Session>> {
        self.session.clone().try_lock_owned().map_err(|_| ApiError::new(StatusCode::CONFLICT, "session is busy"))
    }
}

/// Shared registry of live sessions.
#[derive(Clone, Default)]
pub struct AppState {
    sessions: Arc<RwLock<HashMap<String, Arc<Entry>>>>,
}

impl AppState {
    fn entry(&self, id: &str) -> ApiResult<Arc<Entry>> {
        self.sessions.read().expect("registry lock poisoned").get(id).cloned().ok_or_else(|| ApiError::not_found(id))
    }

    pub fn len(&self) -> usize {
        self.sessions.read().expect("registry lock poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

pub fn router(state: AppState) -> Router {
    let cors = CorsLayer::new().allow_origin(Any).allow_methods(Any).allow_headers(Any);
    Router::new()
        .route("/sessions", post(create))
        .route("/sessions/{id}", get(snapshot).delete(remove))
        .route("/sessions/{id}/comb", get(comb))
        .route("/sessions/{id}/history", get(history))
        .route("/sessions/{id}/data", get(data))
        .route("/sessions/{id}/weights", post(weights))
        .route("/sessions/{id}/step", post(step))
        .route("/sessions/{id}/run", post(run))
        .route("/sessions/{id}/cancel", post(cancel))
        .route("/sessions/{id}/knots", post(knots))
        .layer(DefaultBodyLimit::max(BODY_LIMIT))
        .layer(cors)
        .with_state(state)
}

/// Serves until the listener fails.
pub async fn serve(listener: tokio::net::TcpListener) -> std::io::Result<()> {
    axum::serve(listener, router(AppState::default())).await
}

fn parse<T: DeserializeOwned>(body: &Bytes) -> ApiResult<T> {
    serde_json::from_slice(body).map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, format!("invalid body: {e}")))
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> T + Send + 'static) -> ApiResult<T> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, format!("worker failed: {e}")))
}

async fn create(State(app): State<AppState>, body: Bytes) -> ApiResult<(StatusCode, Json<Snapshot>)> {
    let request: CreateRequest = parse(&body)?;
    let id = uuid::Uuid::new_v4().simple().to_string();
    let session = blocking(move || Session::create(id, request)).await??;
    let snap = session.snapshot()?;
    let entry = Entry {
        session: Arc::new(Mutex::new(session)),
        published: RwLock::new(Arc::new(snap.clone())),
        cancel: AtomicBool::new(false),
    };
    app.sessions.write().expect("registry lock poisoned").insert(snap.id.clone(), Arc::new(entry));
    log::info!("created session {} with {} control points", snap.id, snap.n);
    Ok((StatusCode::CREATED, Json(snap)))
}

async fn snapshot(State(app): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<Snapshot>> {
    Ok(Json(app.entry(&id)?.latest().as_ref().clone()))
}

async fn remove(State(app): State<AppState>, Path(id): Path<String>) -> ApiResult<StatusCode> {
    let entry = app.entry(&id)?;
    entry.cancel.store(true, Ordering::SeqCst);
    app.sessions.write().expect("registry lock poisoned").remove(&id);
    Ok(StatusCode::NO_CONTENT)
}

#[derive(Deserialize)]
struct CombQuery {
    samples: Option<usize>,
    scale: Option<f64>,
}

async fn comb(
    State(app): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<CombQuery>,
) -> ApiResult<Json<fairpia::geometry::CurvatureComb>> {
    let snap = app.entry(&id)?.latest();
    let samples = q.samples.unwrap_or(snap.comb.samples.len().max(2));
    if samples > MAX_COMB_SAMPLES {
        return Err(ApiError::new(
            StatusCode::UNPROCESSABLE_ENTITY,
            format!("at most {MAX_COMB_SAMPLES} comb samples"),
        ));
    }
    let scale = q.scale.unwrap_or(snap.comb.scale);
    let comb = blocking(move || curvature_comb(&snap.spline()?, samples, scale)).await??;
    Ok(Json(comb))
}

async fn history(State(app): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<History>> {
    let guard = app.entry(&id)?.lock()?;
    Ok(Json(guard.history()))
}

async fn data(State(app): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<fairpia::datasets::PointFile>> {
    let guard = app.entry(&id)?.lock()?;
    Ok(Json(guard.dataset()))
}

/// Runs `f` on the locked session off the async executor and publishes the
/// resulting snapshot.
async fn mutate<T: Send + 'static>(
    app: &AppState,
    id: &str,
    f: impl FnOnce(&mut Session) -> Result<T, SessionError> + Send + 'static,
) -> ApiResult<T> {
    let entry = app.entry(id)?;
    let mut guard = entry.lock()?;
    let publisher = entry.clone();
    blocking(move || {
        let out = f(&mut guard);
        if let Ok(snap) = guard.snapshot() {
            publisher.publish(snap);
        }
        out
    })
    .await?
    .map_err(ApiError::from)
}

async fn weights(State(app): State<AppState>, Path(id): Path<String>, body: Bytes) -> ApiResult<Json<Snapshot>> {
    let req: WeightsRequest = parse(&body)?;
    Ok(Json(mutate(&app, &id, move |s| s.set_weights(&req)).await?))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct StepRequest {
    count: usize,
}

async fn step(State(app): State<AppState>, Path(id): Path<String>, body: Bytes) -> ApiResult<Json<StepOutcome>> {
    let req: StepRequest = parse(&body)?;
    Ok(Json(mutate(&app, &id, move |s| s.step(req.count)).await?))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct KnotsRequest {
    values: Vec<f64>,
}

async fn knots(State(app): State<AppState>, Path(id): Path<String>, body: Bytes) -> ApiResult<Json<Snapshot>> {
    let req: KnotsRequest = parse(&body)?;
    Ok(Json(mutate(&app, &id, move |s| s.insert_knots(&req.values)).await?))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RunRequest {
    #[serde(default = "default_tol")]
    tol: f64,
    #[serde(default = "default_max_iters")]
    max_iters: usize,
    /// Return `202` at once and let the run continue; poll `GET /sessions/{id}`.
    #[serde(default)]
    background: bool,
}

fn default_tol() -> f64 {
    StoppingRule::default().tol
}

fn default_max_iters() -> usize {
    StoppingRule::default().max_iters
}

async fn run(State(app): State<AppState>, Path(id): Path<String>, body: Bytes) -> ApiResult<Response> {
    let req: RunRequest = parse(&body)?;
    let stop = StoppingRule { tol: req.tol, max_iters: req.max_iters };
    stop.validate()?;
    let entry = app.entry(&id)?;
    let mut guard = entry.lock()?;
    if let Status::Diverged { reason } = guard.status() {
        return Err(SessionError::Diverged(reason.clone()).into());
    }
    entry.cancel.store(false, Ordering::SeqCst);
    let running = guard.snapshot_with(Status::Running)?;
    entry.publish(running.clone());

    let worker = entry.clone();
    let task = tokio::task::spawn_blocking(move || {
        let mut last = Instant::now();
        let out = guard.run(&stop, |s| {
            if last.elapsed() >= PUBLISH_INTERVAL {
                if let Ok(snap) = s.snapshot_with(Status::Running) {
                    worker.publish(snap);
                }
                last = Instant::now();
            }
            !worker.cancel.load(Ordering::SeqCst)
        });
        match guard.snapshot() {
            Ok(snap) => worker.publish(snap),
            Err(e) => log::error!("session {}: {e}", guard.id()),
        }
        out
    });
    if req.background {
        return Ok((StatusCode::ACCEPTED, Json(running)).into_response());
    }
    let out =
        task.await.map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, format!("worker failed: {e}")))??;
    Ok(Json(out).into_response())
}

#[derive(Serialize)]
struct CancelResponse {
    running: bool,
}

async fn cancel(State(app): State<AppState>, Path(id): Path<String>) -> ApiResult<(StatusCode, Json<CancelResponse>)> {
    let entry = app.entry(&id)?;
    let running = entry.latest().status == Status::Running;
    if running {
        entry.cancel.store(true, Ordering::SeqCst);
    }
    Ok((StatusCode::ACCEPTED, Json(CancelResponse { running })))
}
