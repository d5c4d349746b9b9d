//! HTTP/JSON service hosting interactive measurement sessions.
//!
//! Routes:
//! - `POST /api/sessions` with `{"scenario": name | definition, "seed"?: u64, "dim"?: n}` → 201 + session view
//! - `GET /api/sessions/{id}` → session view
//! - `POST /api/sessions/{id}/measurements` with `{"measurement": name}` → `{"event", "session"}`
//! - `DELETE /api/sessions/{id}` → `{"id", "deleted": true}`
//! - `GET /api/scenarios` → `{"scenarios": [descriptor, ...]}`
//!
//! Errors are `{"error": text}` with status 400 (malformed body), 404
//! (unknown session, scenario or route) or 422 (unknown measurement or
//! invalid scenario definition).

mod sessions;

use std::future::Future;
use std::io;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Instant;

use axum::body::Bytes;
use axum::extract::{Path, Request, State};
use axum::http::{header, HeaderValue, Method, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use dqm_core::simulator::{builtin_descriptors, builtin_scenario, Scenario};
use serde::Deserialize;
use serde_json::json;
use tower_http::cors::{AllowOrigin, CorsLayer};

pub use sessions::{MeasurementView, Session, SessionHandle, SessionRecord, SessionStore, SessionView, Snapshot};

#[derive(Debug, Clone, Default)]
pub struct ServiceConfig {
    /// Include the current state vector in every session view.
    pub reveal_state: bool,
    /// Sessions are loaded from here on start and written back on shutdown.
    pub snapshot_path: Option<PathBuf>,
    /// Allowed CORS origin; any origin when unset.
    pub allowed_origin: Option<String>,
}

#[derive(Debug, Clone)]
struct AppState {
    store: SessionStore,
    reveal_state: bool,
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        Self {
            status,
            message: message.into(),
        }
    }

    fn session_not_found(id: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, format!("no session with id {id:?}"))
    }
}

impl From<dqm_core::Error> for ApiError {
    fn from(e: dqm_core::Error) -> Self {
        let status = match e {
            dqm_core::Error::UnknownScenario(_) => StatusCode::NOT_FOUND,
            _ => StatusCode::UNPROCESSABLE_ENTITY,
        };
        Self::new(status, e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({ "error": self.message }))).into_response()
    }
}

fn parse_body<T: for<'de> Deserialize<'de>>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, format!("malformed body: {e}")))
}

#[derive(Deserialize)]
#[serde(untagged)]
enum ScenarioChoice {
    Named(String),
    Custom(serde_json::Map<String, serde_json::Value>),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CreateRequest {
    scenario: ScenarioChoice,
    seed: Option<u64>,
    dim: Option<usize>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct MeasureRequest {
    measurement: String,
}

async fn create_session(State(app): State<AppState>, body: Bytes) -> Result<impl IntoResponse, ApiError> {
    let request: CreateRequest = parse_body(&body)?;
    let scenario = match request.scenario {
        ScenarioChoice::Named(name) => builtin_scenario(&name, request.dim)?,
        ScenarioChoice::Custom(definition) => {
            let scenario: Scenario = serde_json::from_value(definition.into()).map_err(|e| {
                ApiError::new(
                    StatusCode::UNPROCESSABLE_ENTITY,
                    format!("invalid scenario definition: {e}"),
                )
            })?;
            if let Some(dim) = request.dim.filter(|&d| d != scenario.dim()) {
                return Err(ApiError::new(
                    StatusCode::UNPROCESSABLE_ENTITY,
                    format!("scenario has dimension {}, request says {dim}", scenario.dim()),
                ));
            }
            scenario
        }
    };
    let seed = request.seed.unwrap_or_else(rand::random);
    let id = uuid::Uuid::new_v4().simple().to_string();
    let created_at = chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true);
    let session = Session::new(id, Arc::new(scenario), seed, created_at)?;
    let view = session.view(app.reveal_state);
    app.store.insert(session);
    Ok((StatusCode::CREATED, Json(view)))
}

async fn get_session(State(app): State<AppState>, Path(id): Path<String>) -> Result<Json<SessionView>, ApiError> {
    let handle = app.store.get(&id).ok_or_else(|| ApiError::session_not_found(&id))?;
    let session = handle.read().expect("session lock");
    Ok(Json(session.view(app.reveal_state)))
}

async fn perform_measurement(
    State(app): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Json<serde_json::Value>, ApiError> {
    let handle = app.store.get(&id).ok_or_else(|| ApiError::session_not_found(&id))?;
    let request: MeasureRequest = parse_body(&body)?;
    let mut session = handle.write().expect("session lock");
    let event = session.measure(&request.measurement)?;
    Ok(Json(
        json!({ "event": event, "session": session.view(app.reveal_state) }),
    ))
}

async fn delete_session(
    State(app): State<AppState>,
    Path(id): Path<String>,
) -> Result<Json<serde_json::Value>, ApiError> {
    app.store.remove(&id).ok_or_else(|| ApiError::session_not_found(&id))?;
    Ok(Json(json!({ "id": id, "deleted": true })))
}

async fn list_scenarios() -> Json<serde_json::Value> {
    Json(json!({ "scenarios": builtin_descriptors() }))
}

async fn no_route() -> ApiError {
    ApiError::new(StatusCode::NOT_FOUND, "no such route")
}

async fn log_request(request: Request, next: Next) -> Response {
    let method = request.method().clone();
    let path = request.uri().path().to_string();
    let start = Instant::now();
    let response = next.run(request).await;
    tracing::info!(
        "{method} {path} {} {:.1}ms",
        response.status().as_u16(),
        start.elapsed().as_secs_f64() * 1e3
    );
    response
}

fn cors(allowed_origin: Option<&str>) -> io::Result<CorsLayer> {
    let origin = match allowed_origin {
        None => AllowOrigin::any(),
        Some(o) => {
            AllowOrigin::exact(HeaderValue::from_str(o).map_err(|e| io::Error::new(io::ErrorKind::InvalidInput, e))?)
        }
    };
    Ok(CorsLayer::new()
        .allow_origin(origin)
        .allow_methods([Method::GET, Method::POST, Method::DELETE])
        .allow_headers([header::CONTENT_TYPE]))
}

/// The session service: a store plus its configuration.
#[derive(Debug, Clone)]
pub struct Service {
    store: SessionStore,
    config: ServiceConfig,
}

impl Service {
    /// Creates the service, restoring sessions from the snapshot file if it exists.
    pub fn new(config: ServiceConfig) -> io::Result<Self> {
        let store = SessionStore::default();
        if let Some(path) = config.snapshot_path.as_ref().filter(|p| p.exists()) {
            let text = std::fs::read_to_string(path)?;
            let snapshot: Snapshot =
                serde_json::from_str(&text).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))?;
            let restored = store
                .restore(snapshot)
                .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))?;
            tracing::info!("restored {restored} sessions from {}", path.display());
        }
        Ok(Self { store, config })
    }

    pub fn store(&self) -> &SessionStore {
        &self.store
    }

    pub fn router(&self) -> io::Result<Router> {
        let state = AppState {
            store: self.store.clone(),
            reveal_state: self.config.reveal_state,
        };
        Ok(Router::new()
            .route("/api/sessions", post(create_session))
            .route("/api/sessions/{id}", get(get_session).delete(delete_session))
            .route("/api/sessions/{id}/measurements", post(perform_measurement))
            .route("/api/scenarios", get(list_scenarios))
            .fallback(no_route)
            .with_state(state)
            .layer(cors(self.config.allowed_origin.as_deref())?)
            .layer(middleware::from_fn(log_request)))
    }

    /// Writes all sessions to the snapshot file, if one is configured.
    pub fn save_snapshot(&self) -> io::Result<()> {
        let Some(path) = &self.config.snapshot_path else {
            return Ok(());
        };
        let snapshot = self.store.snapshot();
        let text = serde_json::to_string_pretty(&snapshot).map_err(io::Error::other)?;
        std::fs::write(path, text)?;
        tracing::info!("saved {} sessions to {}", snapshot.sessions.len(), path.display());
        Ok(())
    }

    /// Serves until `shutdown` resolves, then writes the snapshot.
    pub async fn serve(
        self,
        listener: tokio::net::TcpListener,
        shutdown: impl Future<Output = ()> + Send + 'static,
    ) -> io::Result<()> {
        let router = self.router()?;
        axum::serve(listener, router).with_graceful_shutdown(shutdown).await?;
        self.save_snapshot()
    }
}
