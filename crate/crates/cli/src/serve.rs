//! `escape serve`: the HTTP session API used by the browser play UI.
//!
//! | method | path                          | body / result                         |
//! |--------|-------------------------------|---------------------------------------|
//! | GET    | `/health`                     | `{"status": "ok"}`                    |
//! | GET    | `/rooms`                      | room summaries                        |
//! | POST   | `/sessions`                   | `{"room_id", "mode"?, "experiment"?}` |
//! | GET    | `/sessions/{id}/observation`  | current observation and hint          |
//! | POST   | `/sessions/{id}/actions`      | `{"action", "think"?}`                |
//! | GET    | `/sessions/{id}/trajectory`   | the trajectory so far                 |
//!
//! Rejected actions answer 422 with the available actions and change nothing.
//! Every session streams its log to `<log_dir>/<session id>.jsonl`.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::BufWriter;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, Mutex as StdMutex};

use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use escape_core::engine::Event;
use escape_core::metrics::episode_metrics;
use escape_core::session::{Clock, StepError, SystemClock};
use escape_core::{Episode, EpisodeMeta, ExperimentConfig, ExperimentMode, Observation, RoomSpec, TerminationReason, Trajectory};
use serde::{Deserialize, Serialize};
use tokio::sync::Mutex;
use uuid::Uuid;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionMode {
    /// No step cap or no-progress limit; wall-clock timing.
    #[default]
    Human,
    /// Same limits as batch runs.
    Agent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionStatus {
    Active,
    Finished,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RoomInfo {
    pub room_id: String,
    pub title: String,
    pub checkpoints: usize,
    pub oracle_length: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateSession {
    pub room_id: String,
    #[serde(default)]
    pub mode: SessionMode,
    /// Defaults to the server's configured experiment mode.
    #[serde(default)]
    pub experiment: Option<ExperimentMode>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActionRequest {
    pub action: String,
    #[serde(default)]
    pub think: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ObservationPayload {
    #[serde(flatten)]
    pub observation: Observation,
    pub step_count: u32,
    pub status: SessionStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hint: Option<String>,
    pub checkpoints_achieved: Vec<String>,
    pub checkpoint_total: usize,
    pub elapsed_ms: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SessionEnvelope {
    pub session_id: Uuid,
    pub room_id: String,
    pub mode: SessionMode,
    pub experiment: ExperimentMode,
    pub started_ms: u64,
    pub observation: ObservationPayload,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpisodeSummary {
    pub success: bool,
    pub gc: f64,
    pub steps: u32,
    pub reason: TerminationReason,
    pub duration_ms: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StepPayload {
    pub step: u32,
    pub events: Vec<Event>,
    pub achieved: Vec<String>,
    pub terminal: bool,
    pub observation: ObservationPayload,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub summary: Option<EpisodeSummary>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub available_actions: Option<Vec<String>>,
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    body: ErrorBody,
}

impl ApiError {
    fn new(status: StatusCode, error: &str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            body: ErrorBody {
                error: error.into(),
                message: message.into(),
                available_actions: None,
            },
        }
    }

    fn internal(message: impl ToString) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", message.to_string())
    }
}

impl From<StepError> for ApiError {
    fn from(e: StepError) -> Self {
        let message = e.to_string();
        match e {
            StepError::Finished => ApiError::new(StatusCode::CONFLICT, "finished", message),
            StepError::Parse { available, .. } | StepError::Unavailable { available, .. } => ApiError {
                status: StatusCode::UNPROCESSABLE_ENTITY,
                body: ErrorBody {
                    error: "rejected_action".into(),
                    message,
                    available_actions: Some(available),
                },
            },
            StepError::Engine(_) | StepError::Io(_) => ApiError::internal(message),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

struct Session {
    mode: SessionMode,
    episode: Episode,
}

pub struct AppState {
    rooms: BTreeMap<String, Arc<RoomSpec>>,
    config: ExperimentConfig,
    log_dir: PathBuf,
    clock: Arc<dyn Clock>,
    sessions: StdMutex<HashMap<Uuid, Arc<Mutex<Session>>>>,
}

impl AppState {
    pub fn new(rooms: Vec<RoomSpec>, config: ExperimentConfig, log_dir: PathBuf) -> Self {
        Self::with_clock(rooms, config, log_dir, Arc::new(SystemClock))
    }

    pub fn with_clock(rooms: Vec<RoomSpec>, config: ExperimentConfig, log_dir: PathBuf, clock: Arc<dyn Clock>) -> Self {
        AppState {
            rooms: rooms.into_iter().map(|r| (r.room_id.clone(), Arc::new(r))).collect(),
            config,
            log_dir,
            clock,
            sessions: StdMutex::new(HashMap::new()),
        }
    }

    fn session(&self, id: &str) -> Result<Arc<Mutex<Session>>, ApiError> {
        let not_found = || ApiError::new(StatusCode::NOT_FOUND, "unknown_session", format!("no session `{id}`"));
        let id: Uuid = id.parse().map_err(|_| not_found())?;
        self.sessions
            .lock()
            .expect("session table lock")
            .get(&id)
            .cloned()
            .ok_or_else(not_found)
    }
}

fn payload(episode: &Episode) -> Result<ObservationPayload, ApiError> {
    let observation = episode.observation().map_err(ApiError::internal)?;
    Ok(ObservationPayload {
        observation,
        step_count: episode.step_count(),
        status: if episode.is_finished() {
            SessionStatus::Finished
        } else {
            SessionStatus::Active
        },
        hint: episode.hint().map(|h| h.text.clone()),
        checkpoints_achieved: episode.state().achieved_checkpoints.iter().cloned().collect(),
        checkpoint_total: episode.spec().checkpoints.len(),
        elapsed_ms: episode.elapsed_ms(),
    })
}

fn summary(episode: &Episode) -> Result<Option<EpisodeSummary>, ApiError> {
    let Some(end) = episode.end() else { return Ok(None) };
    let metrics = episode_metrics(&episode.trajectory(), episode.spec()).map_err(ApiError::internal)?;
    Ok(Some(EpisodeSummary {
        success: metrics.success,
        gc: metrics.gc,
        steps: metrics.steps,
        reason: end.reason,
        duration_ms: end.duration_ms,
    }))
}

async fn health() -> Json<serde_json::Value> {
    Json(serde_json::json!({"status": "ok"}))
}

async fn rooms(State(state): State<Arc<AppState>>) -> Json<Vec<RoomInfo>> {
    Json(
        state
            .rooms
            .values()
            .map(|r| RoomInfo {
                room_id: r.room_id.clone(),
                title: r.title.clone(),
                checkpoints: r.checkpoints.len(),
                oracle_length: r.oracle.len(),
            })
            .collect(),
    )
}

async fn create_session(
    State(state): State<Arc<AppState>>,
    Json(req): Json<CreateSession>,
) -> Result<(StatusCode, Json<SessionEnvelope>), ApiError> {
    let spec = state
        .rooms
        .get(&req.room_id)
        .cloned()
        .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, "unknown_room", format!("no room `{}`", req.room_id)))?;
    let mut config = state.config.clone();
    if let Some(mode) = req.experiment {
        config.mode = mode;
    }
    let id = Uuid::new_v4();
    let meta = EpisodeMeta {
        agent: match req.mode {
            SessionMode::Human => "human".into(),
            SessionMode::Agent => "remote-agent".into(),
        },
        seed: 0,
        trial: 0,
    };
    let log = File::create(state.log_dir.join(format!("{id}.jsonl"))).map_err(ApiError::internal)?;
    let mut episode = Episode::new(spec.clone(), config, meta, state.clock.clone())
        .with_sink(Box::new(BufWriter::new(log)))
        .map_err(ApiError::internal)?;
    if req.mode == SessionMode::Human {
        episode = episode.without_limits();
    }
    let envelope = SessionEnvelope {
        session_id: id,
        room_id: spec.room_id.clone(),
        mode: req.mode,
        experiment: episode.config().mode,
        started_ms: episode.header().started_ms,
        observation: payload(&episode)?,
    };
    state
        .sessions
        .lock()
        .expect("session table lock")
        .insert(id, Arc::new(Mutex::new(Session { mode: req.mode, episode })));
    tracing::info!(session = %id, room = %spec.room_id, mode = ?req.mode, "session started");
    Ok((StatusCode::CREATED, Json(envelope)))
}

async fn observation(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
) -> Result<Json<ObservationPayload>, ApiError> {
    let session = state.session(&id)?;
    let session = session.lock().await;
    Ok(Json(payload(&session.episode)?))
}

async fn act(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    Json(req): Json<ActionRequest>,
) -> Result<Json<StepPayload>, ApiError> {
    let session = state.session(&id)?;
    let mut session = session.lock().await;
    let episode = &mut session.episode;
    let applied = episode.apply(req.action.trim(), req.think, Vec::new())?;
    // Nobody annotates steps over HTTP, so write them out straight away.
    episode.close().map_err(ApiError::internal)?;
    if applied.terminated.is_some() {
        tracing::info!(session = %id, steps = applied.step, mode = ?session.mode, "session finished");
    }
    let episode = &session.episode;
    Ok(Json(StepPayload {
        step: applied.step,
        events: applied.events,
        achieved: applied.newly_achieved,
        terminal: applied.terminated.is_some(),
        observation: payload(episode)?,
        summary: summary(episode)?,
    }))
}

async fn trajectory(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
) -> Result<Json<Trajectory>, ApiError> {
    let session = state.session(&id)?;
    let session = session.lock().await;
    Ok(Json(session.episode.trajectory()))
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/rooms", get(rooms))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}/observation", get(observation))
        .route("/sessions/{id}/actions", post(act))
        .route("/sessions/{id}/trajectory", get(trajectory))
        .with_state(state)
}

/// Serves until ctrl-c.
pub async fn serve(addr: SocketAddr, state: Arc<AppState>) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!(addr = %listener.local_addr()?, "listening");
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
