use std::collections::HashMap;
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, RwLock};

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path as UrlPath, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use tokio::sync::Mutex;

use gridplan::{ActionSpec, EngineConfig};

use crate::error::{ErrorKind, ServiceError};
use crate::registry::Registry;
use crate::session::{ApplyRequest, AuditEntry, CandidateList, Recommendation, Session, SessionRequest, Snapshot, Staged};

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let status = match self.kind {
            ErrorKind::NotFound => StatusCode::NOT_FOUND,
            ErrorKind::BadRequest => StatusCode::BAD_REQUEST,
            ErrorKind::Illegal => StatusCode::UNPROCESSABLE_ENTITY,
            ErrorKind::Conflict => StatusCode::CONFLICT,
            ErrorKind::Internal => StatusCode::INTERNAL_SERVER_ERROR,
        };
        (status, Json(self)).into_response()
    }
}

impl From<JsonRejection> for ServiceError {
    fn from(r: JsonRejection) -> Self {
        ServiceError::bad_request(r.body_text())
    }
}

/// A session plus its last published snapshot. Mutations hold `session`
/// for their whole duration and publish a new snapshot before releasing
/// it; readers of `snapshot` never see a half-applied advance.
pub struct SessionHandle {
    session: Arc<Mutex<Session>>,
    snapshot: RwLock<Arc<Snapshot>>,
}

impl SessionHandle {
    pub fn snapshot(&self) -> Arc<Snapshot> {
        self.snapshot.read().unwrap().clone()
    }

    fn publish(&self, snap: Snapshot) -> Arc<Snapshot> {
        let snap = Arc::new(snap);
        *self.snapshot.write().unwrap() = snap.clone();
        snap
    }

    /// Runs `f` on the session on the blocking pool, then publishes.
    async fn mutate<T, F>(self: &Arc<Self>, f: F) -> Result<T, ServiceError>
    where
        T: Send + 'static,
        F: FnOnce(&mut Session) -> Result<T, ServiceError> + Send + 'static,
    {
        let mut guard = self.session.clone().lock_owned().await;
        let handle = self.clone();
        tokio::task::spawn_blocking(move || {
            let out = f(&mut guard);
            handle.publish(guard.snapshot());
            out
        })
        .await
        .map_err(|e| ServiceError::new(ErrorKind::Internal, "internal", e.to_string()))?
    }
}

pub struct AppState {
    pub registry: Registry,
    pub config: EngineConfig,
    sessions: RwLock<HashMap<String, Arc<SessionHandle>>>,
    next_id: AtomicU64,
}

impl AppState {
    pub fn new(registry: Registry, config: EngineConfig) -> Arc<AppState> {
        Arc::new(AppState {
            registry,
            config,
            sessions: RwLock::new(HashMap::new()),
            next_id: AtomicU64::new(1),
        })
    }

    pub fn session(&self, id: &str) -> Result<Arc<SessionHandle>, ServiceError> {
        self.sessions
            .read()
            .unwrap()
            .get(id)
            .cloned()
            .ok_or_else(|| ServiceError::unknown("session", id))
    }

    pub fn create_session(&self, req: &SessionRequest) -> Result<Arc<SessionHandle>, ServiceError> {
        let grid = self.registry.grid(&req.grid)?;
        let chronic = self.registry.chronic(&grid, &req.chronic)?;
        let mut config = req.config.clone().unwrap_or_else(|| self.config.clone());
        if let Some(alpha) = req.alpha {
            config.agent.alpha = alpha;
        }
        let id = format!("s{}", self.next_id.fetch_add(1, Ordering::Relaxed));
        let session = Session::new(id.clone(), grid, chronic, config, req.mode)?;
        let handle = Arc::new(SessionHandle {
            snapshot: RwLock::new(Arc::new(session.snapshot())),
            session: Arc::new(Mutex::new(session)),
        });
        self.sessions.write().unwrap().insert(id, handle.clone());
        Ok(handle)
    }

    /// Writes the latest snapshot of every session as `<dir>/<id>.json`.
    pub fn save_snapshots(&self, dir: &Path) -> std::io::Result<usize> {
        std::fs::create_dir_all(dir)?;
        let sessions: Vec<_> = self.sessions.read().unwrap().values().cloned().collect();
        for h in &sessions {
            let snap = h.snapshot();
            let text = serde_json::to_string_pretty(&*snap).map_err(std::io::Error::other)?;
            std::fs::write(dir.join(format!("{}.json", snap.session)), text)?;
        }
        Ok(sessions.len())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Created {
    pub id: String,
    pub snapshot: Snapshot,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AdvanceRequest {
    #[serde(default = "one")]
    pub steps: usize,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimulateRequest {
    pub action: ActionSpec,
}

type ApiResult<T> = Result<Json<T>, ServiceError>;

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/api/sessions", post(create))
        .route("/api/sessions/{id}/state", get(get_state))
        .route("/api/sessions/{id}/advance", post(advance))
        .route("/api/sessions/{id}/candidates", get(candidates))
        .route("/api/sessions/{id}/simulate", post(simulate))
        .route("/api/sessions/{id}/apply", post(apply))
        .route("/api/sessions/{id}/audit", get(audit))
        .with_state(state)
}

async fn create(State(app): State<Arc<AppState>>, body: Result<Json<SessionRequest>, JsonRejection>) -> Result<(StatusCode, Json<Created>), ServiceError> {
    let Json(req) = body?;
    let app2 = app.clone();
    let handle = tokio::task::spawn_blocking(move || app2.create_session(&req))
        .await
        .map_err(|e| ServiceError::new(ErrorKind::Internal, "internal", e.to_string()))??;
    let snapshot = (*handle.snapshot()).clone();
    Ok((StatusCode::CREATED, Json(Created { id: snapshot.session.clone(), snapshot })))
}

async fn get_state(State(app): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> ApiResult<Snapshot> {
    Ok(Json((*app.session(&id)?.snapshot()).clone()))
}

async fn advance(
    State(app): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    body: Result<Json<AdvanceRequest>, JsonRejection>,
) -> ApiResult<Snapshot> {
    let Json(req) = body?;
    let h = app.session(&id)?;
    h.mutate(move |s| s.advance(req.steps)).await?;
    Ok(Json((*h.snapshot()).clone()))
}

async fn candidates(State(app): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> ApiResult<CandidateList> {
    let h = app.session(&id)?;
    Ok(Json(h.mutate(|s| Ok(s.candidates())).await?))
}

async fn simulate(
    State(app): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    body: Result<Json<SimulateRequest>, JsonRejection>,
) -> ApiResult<Recommendation> {
    let Json(req) = body?;
    let h = app.session(&id)?;
    Ok(Json(h.mutate(move |s| s.simulate(&req.action)).await?))
}

async fn apply(
    State(app): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    body: Result<Json<ApplyRequest>, JsonRejection>,
) -> ApiResult<Staged> {
    let Json(req) = body?;
    let h = app.session(&id)?;
    Ok(Json(h.mutate(move |s| s.apply(&req)).await?))
}

async fn audit(State(app): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> ApiResult<Vec<AuditEntry>> {
    let h = app.session(&id)?;
    Ok(Json(h.mutate(|s| Ok(s.audit().to_vec())).await?))
}

/// Serves the API on `addr` until ctrl-c, then optionally writes snapshots.
pub async fn serve(state: Arc<AppState>, addr: std::net::SocketAddr, snapshot_dir: Option<std::path::PathBuf>) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    let app = router(state.clone());
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    if let Some(dir) = snapshot_dir {
        state.save_snapshots(&dir)?;
    }
    Ok(())
}
