//! JSON-over-HTTP boundary around chat, playback, ratings, and reports.
//!
//! The server is authoritative: clients report the playhead and the engine
//! decides what they may see. Requests for one session are serialized; each
//! mutating request loads the record, applies the change, and saves it.

mod config;
mod store;

use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use axum::body::Bytes;
use axum::extract::{Path, Request, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use dashmap::DashMap;
use rand::Rng;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::analytics::{report, RatingForm, ReportInput, Survey};
use crate::bank::{load_bank, select_session_questions, QuestionBank};
use crate::chat::{advance, ChatState, Phase, Redirector};
use crate::engine::{export_jsonl, start_session, Clock, EngineError, SessionState, SystemClock};
use crate::llm::Gateway;

pub use config::{ChatLlmConfig, ConfigError, ServiceConfig, VideoMetadata};
pub use store::{valid_session_id, CachedResponse, DirStore, MemoryStore, SessionRecord, SessionStore, StoreError};

pub const IDEMPOTENCY_HEADER: &str = "idempotency-key";

pub trait IdGen: Send + Sync {
    fn next_id(&self) -> String;
}

/// `s-0001`, `s-0002`, ...
#[derive(Debug, Default)]
pub struct SequentialIds(AtomicU64);

impl IdGen for SequentialIds {
    fn next_id(&self) -> String {
        format!("s-{:04}", self.0.fetch_add(1, Ordering::SeqCst) + 1)
    }
}

#[derive(Debug, Default)]
pub struct RandomIds;

impl IdGen for RandomIds {
    fn next_id(&self) -> String {
        format!("s-{:016x}", rand::thread_rng().gen::<u64>())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("cannot read {path}: {source}")]
    Read { path: std::path::PathBuf, source: std::io::Error },
    #[error("bank {path}: {detail}")]
    Bank { path: std::path::PathBuf, detail: String },
    #[error("video metadata: {0}")]
    Video(String),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Llm(#[from] crate::llm::LlmError),
    #[error("server: {0}")]
    Io(#[from] std::io::Error),
}

/// Error body: `{code, message}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        ApiError { status, code, message: message.into() }
    }

    fn not_found(id: &str) -> Self {
        ApiError::new(StatusCode::NOT_FOUND, "SESSION_NOT_FOUND", format!("no session {id:?}"))
    }

    fn internal(message: impl std::fmt::Display) -> Self {
        ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "INTERNAL", message.to_string())
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        ApiError::internal(e)
    }
}

impl From<EngineError> for ApiError {
    fn from(e: EngineError) -> Self {
        let (status, code) = match e {
            EngineError::PausedForQuestion => (StatusCode::CONFLICT, "QUESTION_ACTIVE"),
            EngineError::NoActiveQuestion => (StatusCode::CONFLICT, "NO_ACTIVE_QUESTION"),
            EngineError::UnknownQuestion(_) => (StatusCode::NOT_FOUND, "UNKNOWN_QUESTION"),
            EngineError::QuestionMismatch { .. } => (StatusCode::CONFLICT, "QUESTION_MISMATCH"),
            EngineError::OptionOutOfRange { .. } => (StatusCode::UNPROCESSABLE_ENTITY, "OPTION_OUT_OF_RANGE"),
            EngineError::NegativeTarget(_) => (StatusCode::UNPROCESSABLE_ENTITY, "NEGATIVE_TARGET"),
        };
        ApiError::new(status, code, e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({"code": self.code, "message": self.message}))).into_response()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ApiResponse {
    pub status: StatusCode,
    pub body: Option<Value>,
}

impl ApiResponse {
    fn ok(body: Value) -> Self {
        ApiResponse { status: StatusCode::OK, body: Some(body) }
    }

    fn to_cached(&self) -> CachedResponse {
        CachedResponse { status: self.status.as_u16(), body: self.body.clone() }
    }

    fn from_cached(c: &CachedResponse) -> Self {
        ApiResponse { status: StatusCode::from_u16(c.status).unwrap_or(StatusCode::OK), body: c.body.clone() }
    }
}

impl IntoResponse for ApiResponse {
    fn into_response(self) -> Response {
        match self.body {
            Some(b) => (self.status, Json(b)).into_response(),
            None => self.status.into_response(),
        }
    }
}

pub struct AppState {
    config: ServiceConfig,
    bank: QuestionBank,
    video: Option<VideoMetadata>,
    store: Box<dyn SessionStore>,
    gateway: Option<Gateway>,
    clock: Arc<dyn Clock>,
    ids: Box<dyn IdGen>,
    locks: DashMap<String, Arc<tokio::sync::Mutex<()>>>,
    create_cache: Mutex<HashMap<String, CachedResponse>>,
}

type Shared = Arc<AppState>;

impl AppState {
    pub fn new(
        config: ServiceConfig,
        bank: QuestionBank,
        store: Box<dyn SessionStore>,
        gateway: Option<Gateway>,
        clock: Arc<dyn Clock>,
        ids: Box<dyn IdGen>,
    ) -> Self {
        AppState {
            config,
            bank,
            video: None,
            store,
            gateway,
            clock,
            ids,
            locks: DashMap::new(),
            create_cache: Mutex::new(HashMap::new()),
        }
    }

    pub fn with_video(mut self, video: VideoMetadata) -> Self {
        self.video = Some(video);
        self
    }

    /// Loads the bank, video metadata, store, and model backend named in `config`.
    pub fn from_config(config: ServiceConfig) -> Result<Self, ServiceError> {
        let read = |p: &std::path::Path| std::fs::read(p).map_err(|source| ServiceError::Read { path: p.into(), source });
        let bank = load_bank(&read(&config.bank_path)?)
            .map_err(|e| ServiceError::Bank { path: config.bank_path.clone(), detail: e.to_string() })?;
        let video = match &config.video_metadata_path {
            Some(p) => {
                let v: VideoMetadata = serde_json::from_slice(&read(p)?).map_err(|e| ServiceError::Video(e.to_string()))?;
                if v.video_id != bank.video_id() || v.duration_ms != bank.video_duration_ms() {
                    return Err(ServiceError::Video(format!("{} does not describe bank video {}", p.display(), bank.video_id())));
                }
                Some(v)
            }
            None => None,
        };
        let store: Box<dyn SessionStore> = match &config.data_dir {
            Some(dir) => Box::new(DirStore::open(dir)?),
            None => Box::new(MemoryStore::default()),
        };
        let gateway = config.llm.mode.build(config.llm.fixtures_dir.as_deref())?.map(Gateway::new);
        let mut state = AppState::new(config, bank, store, gateway, Arc::new(SystemClock::default()), Box::new(RandomIds));
        state.video = video;
        Ok(state)
    }

    pub fn store(&self) -> &dyn SessionStore {
        self.store.as_ref()
    }

    fn session_seed(&self, session_id: &str) -> u64 {
        let digest = Sha256::digest(session_id.as_bytes());
        self.config.seed ^ u64::from_be_bytes(digest[..8].try_into().expect("8 bytes"))
    }
}

fn parse_body<T: DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "INVALID_BODY", e.to_string()))
}

fn idempotency_key(headers: &HeaderMap) -> Result<Option<String>, ApiError> {
    headers
        .get(IDEMPOTENCY_HEADER)
        .map(|v| {
            v.to_str()
                .map(str::to_string)
                .map_err(|_| ApiError::new(StatusCode::BAD_REQUEST, "INVALID_IDEMPOTENCY_KEY", "header must be visible ASCII"))
        })
        .transpose()
}

/// Runs `f` on the session record under the session's lock and saves the
/// result. Successful responses are cached by idempotency key.
async fn mutate<F>(app: Shared, id: String, route: &'static str, headers: &HeaderMap, f: F) -> Result<ApiResponse, ApiError>
where
    F: FnOnce(&AppState, &mut SessionRecord) -> Result<ApiResponse, ApiError> + Send + 'static,
{
    let key = idempotency_key(headers)?;
    if !valid_session_id(&id) || app.store.load(&id)?.is_none() {
        return Err(ApiError::not_found(&id));
    }
    let lock = app.locks.entry(id.clone()).or_default().clone();
    let guard = lock.lock_owned().await;
    tokio::task::spawn_blocking(move || {
        let _guard = guard;
        let mut record = app.store.load(&id)?.ok_or_else(|| ApiError::not_found(&id))?;
        let cache_key = key.map(|k| format!("{route}#{k}"));
        if let Some(cached) = cache_key.as_ref().and_then(|k| record.idempotency.get(k)) {
            return Ok(ApiResponse::from_cached(cached));
        }
        let response = f(&app, &mut record)?;
        if let Some(k) = cache_key {
            record.idempotency.insert(k, response.to_cached());
        }
        app.store.save(&record)?;
        Ok(response)
    })
    .await
    .map_err(ApiError::internal)?
}

fn snapshot(app: &AppState, id: &str) -> Result<SessionRecord, ApiError> {
    if !valid_session_id(id) {
        return Err(ApiError::not_found(id));
    }
    app.store.load(id)?.ok_or_else(|| ApiError::not_found(id))
}

fn engine_of(record: &mut SessionRecord) -> Result<(&mut SessionState, u64), ApiError> {
    match (record.engine_state.as_mut(), record.engine_started_at) {
        (Some(e), Some(t)) => Ok((e, t)),
        _ => Err(ApiError::new(StatusCode::CONFLICT, "CHAT_NOT_DONE", "choose question types before playback")),
    }
}

fn wall(app: &AppState, started_at: u64) -> u64 {
    app.clock.now_ms().saturating_sub(started_at)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StateView {
    pub playhead_ms: u64,
    pub gate_ms: u64,
    pub paused_by_question: bool,
    pub active_question_id: Option<String>,
    pub answered_count: usize,
    pub remaining_count: usize,
    pub total: usize,
    pub completed: bool,
    /// Popup times of every scheduled question, for progress-bar markers.
    pub markers: Vec<u64>,
}

impl StateView {
    pub fn of(s: &SessionState) -> Self {
        StateView {
            playhead_ms: s.playhead_ms(),
            gate_ms: s.gate(),
            paused_by_question: s.paused_by_question(),
            active_question_id: s.active_question().map(|q| q.id.clone()),
            answered_count: s.answered().len(),
            remaining_count: s.remaining(),
            total: s.plan().len(),
            completed: s.is_completed(),
            markers: s.plan().scheduled.iter().map(|q| q.popup_ms).collect(),
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ChatBody {
    text: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TimeBody {
    playhead_ms: u64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct AnswerBody {
    question_id: String,
    chosen_index: usize,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SeekBody {
    target_ms: i64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RatingsBody {
    forms: Vec<RatingForm>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SurveyBody {
    survey: Survey,
}

async fn create_session(State(app): State<Shared>, headers: HeaderMap) -> Result<ApiResponse, ApiError> {
    let key = idempotency_key(&headers)?;
    if let Some(cached) = key.as_ref().and_then(|k| app.create_cache.lock().expect("cache lock").get(k).cloned()) {
        return Ok(ApiResponse::from_cached(&cached));
    }
    let session_id = app.ids.next_id();
    let (chat_state, turn) = advance(&ChatState::new(), "", None).map_err(ApiError::internal)?;
    let record = SessionRecord {
        session_id: session_id.clone(),
        created_at: app.clock.now_ms(),
        chat_state,
        engine_state: None,
        engine_started_at: None,
        ratings: Vec::new(),
        surveys: Vec::new(),
        idempotency: Default::default(),
    };
    app.store.save(&record)?;
    let response = ApiResponse {
        status: StatusCode::CREATED,
        body: Some(json!({"session_id": session_id, "first_bot_turn": turn, "phase": Phase::AwaitSelection})),
    };
    if let Some(k) = key {
        app.create_cache.lock().expect("cache lock").insert(k, response.to_cached());
    }
    Ok(response)
}

async fn chat(State(app): State<Shared>, Path(id): Path<String>, headers: HeaderMap, body: Bytes) -> Result<ApiResponse, ApiError> {
    let req: ChatBody = parse_body(&body)?;
    mutate(app, id, "chat", &headers, move |app, rec| {
        if rec.chat_state.phase() == Phase::Done {
            return Err(ApiError::new(StatusCode::CONFLICT, "CHAT_FINISHED", "question types are already chosen"));
        }
        let redirector = app.gateway.as_ref().map(|gateway| Redirector { gateway, settings: &app.config.llm.settings });
        let (next, turn) = advance(&rec.chat_state, &req.text, redirector.as_ref()).map_err(ApiError::internal)?;
        if let Some(selection) = next.selection() {
            let seed = app.session_seed(&rec.session_id);
            let plan = select_session_questions(&app.bank, selection, app.config.session_size, seed)
                .map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "SELECTION_FAILED", e.to_string()))?;
            rec.engine_state = Some(start_session(plan, 0));
            rec.engine_started_at = Some(app.clock.now_ms());
        }
        let body = json!({
            "bot_turn": turn,
            "phase": next.phase(),
            "selection": next.selection(),
            "token_line": next.token_line(),
        });
        rec.chat_state = next;
        Ok(ApiResponse::ok(body))
    })
    .await
}

async fn time_update(State(app): State<Shared>, Path(id): Path<String>, headers: HeaderMap, body: Bytes) -> Result<ApiResponse, ApiError> {
    let req: TimeBody = parse_body(&body)?;
    mutate(app, id, "time", &headers, move |app, rec| {
        let (engine, started) = engine_of(rec)?;
        let update = engine.on_time_update(wall(app, started), req.playhead_ms)?;
        Ok(ApiResponse::ok(json!({"state": StateView::of(engine), "popup": update.popup})))
    })
    .await
}

async fn answer(State(app): State<Shared>, Path(id): Path<String>, headers: HeaderMap, body: Bytes) -> Result<ApiResponse, ApiError> {
    let req: AnswerBody = parse_body(&body)?;
    mutate(app, id, "answer", &headers, move |app, rec| {
        let (engine, started) = engine_of(rec)?;
        let outcome = engine.submit_answer(wall(app, started), &req.question_id, req.chosen_index)?;
        Ok(ApiResponse::ok(json!({"feedback": outcome.feedback, "remaining_count": outcome.remaining_count})))
    })
    .await
}

async fn seek(State(app): State<Shared>, Path(id): Path<String>, headers: HeaderMap, body: Bytes) -> Result<ApiResponse, ApiError> {
    let req: SeekBody = parse_body(&body)?;
    mutate(app, id, "seek", &headers, move |app, rec| {
        let (engine, started) = engine_of(rec)?;
        let granted_ms = engine.request_seek(wall(app, started), req.target_ms)?;
        Ok(ApiResponse::ok(json!({"granted_ms": granted_ms})))
    })
    .await
}

async fn ratings(State(app): State<Shared>, Path(id): Path<String>, headers: HeaderMap, body: Bytes) -> Result<ApiResponse, ApiError> {
    let req: RatingsBody = parse_body(&body)?;
    mutate(app, id, "ratings", &headers, move |_, rec| {
        let (engine, _) = engine_of(rec)?;
        if !engine.is_completed() {
            return Err(ApiError::new(StatusCode::CONFLICT, "NOT_COMPLETED", "ratings open after the video is finished"));
        }
        let selected = engine.plan().selected_strategies;
        let invalid = |m: String| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "INVALID_RATING", m);
        if req.forms.is_empty() {
            return Err(invalid("no forms".into()));
        }
        for f in &req.forms {
            f.validate().map_err(|e| invalid(e.to_string()))?;
            if !selected.contains(f.strategy) {
                return Err(invalid(format!("strategy {} was not selected", f.strategy)));
            }
        }
        rec.ratings.extend(req.forms);
        Ok(ApiResponse { status: StatusCode::NO_CONTENT, body: None })
    })
    .await
}

async fn surveys(State(app): State<Shared>, Path(id): Path<String>, headers: HeaderMap, body: Bytes) -> Result<ApiResponse, ApiError> {
    let req: SurveyBody = parse_body(&body)?;
    mutate(app, id, "surveys", &headers, move |_, rec| {
        req.survey
            .validate()
            .map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "INVALID_SURVEY", e.to_string()))?;
        rec.surveys.push(req.survey);
        Ok(ApiResponse { status: StatusCode::NO_CONTENT, body: None })
    })
    .await
}

async fn get_session(State(app): State<Shared>, Path(id): Path<String>) -> Result<ApiResponse, ApiError> {
    let rec = snapshot(&app, &id)?;
    let engine = rec.engine_state.as_ref();
    Ok(ApiResponse::ok(json!({
        "session_id": rec.session_id,
        "phase": rec.chat_state.phase(),
        "selection": rec.chat_state.selection(),
        "token_line": rec.chat_state.token_line(),
        "state": engine.map(StateView::of),
        "popup": engine.and_then(SessionState::active_popup),
        "ratings_count": rec.ratings.len(),
        "surveys_count": rec.surveys.len(),
    })))
}

async fn get_log(State(app): State<Shared>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let rec = snapshot(&app, &id)?;
    let body = rec.engine_state.as_ref().map(|e| export_jsonl(e.log())).unwrap_or_default();
    Ok(([(header::CONTENT_TYPE, "application/x-ndjson")], body).into_response())
}

/// Report input gathered from every stored session.
pub fn collect_report_input(records: &[SessionRecord]) -> ReportInput {
    let mut input = ReportInput::default();
    for r in records {
        if let Some(e) = &r.engine_state {
            input.logs.push(e.log().to_vec());
        }
        input.ratings.extend(r.ratings.iter().cloned());
        for s in &r.surveys {
            match s {
                Survey::SelfEfficacy(s) => input.self_efficacy.push(s.clone()),
                Survey::Attitude(s) => input.attitudes.push(s.clone()),
            }
        }
    }
    input
}

async fn get_report(State(app): State<Shared>) -> Result<ApiResponse, ApiError> {
    let records = tokio::task::spawn_blocking(move || app.store.list()).await.map_err(ApiError::internal)??;
    let r = report(&collect_report_input(&records));
    Ok(ApiResponse::ok(json!({"text": r.text, "tables": r.tables})))
}

async fn get_video(State(app): State<Shared>) -> Result<ApiResponse, ApiError> {
    match &app.video {
        Some(v) => Ok(ApiResponse::ok(serde_json::to_value(v).expect("metadata serializes"))),
        None => Err(ApiError::new(StatusCode::NOT_FOUND, "NO_VIDEO_METADATA", "no video metadata configured")),
    }
}

async fn health(State(app): State<Shared>) -> Json<Value> {
    Json(json!({"status": "ok", "video_id": app.bank.video_id()}))
}

async fn require_token(State(app): State<Shared>, request: Request, next: Next) -> Result<Response, ApiError> {
    if let Some(token) = &app.config.bearer_token {
        let given = request.headers().get(header::AUTHORIZATION).and_then(|v| v.to_str().ok());
        if given.and_then(|v| v.strip_prefix("Bearer ")) != Some(token.as_str()) {
            return Err(ApiError::new(StatusCode::UNAUTHORIZED, "UNAUTHORIZED", "missing or wrong bearer token"));
        }
    }
    Ok(next.run(request).await)
}

pub fn router(state: Arc<AppState>) -> Router {
    let api = Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/chat", post(chat))
        .route("/sessions/{id}/time", post(time_update))
        .route("/sessions/{id}/answer", post(answer))
        .route("/sessions/{id}/seek", post(seek))
        .route("/sessions/{id}/ratings", post(ratings))
        .route("/sessions/{id}/surveys", post(surveys))
        .route("/sessions/{id}/log", get(get_log))
        .route("/report", get(get_report))
        .route("/video", get(get_video))
        .route_layer(middleware::from_fn_with_state(state.clone(), require_token));
    let mut app = Router::new().route("/health", get(health)).merge(api);
    if let Some(dir) = &state.config.static_dir {
        app = app.fallback_service(tower_http::services::ServeDir::new(dir));
    }
    app.layer(tower_http::trace::TraceLayer::new_for_http()).with_state(state)
}

/// Binds the configured address and serves until Ctrl-C.
pub async fn serve(config: ServiceConfig) -> Result<(), ServiceError> {
    let listen = config.listen.clone();
    let state = Arc::new(tokio::task::block_in_place(|| AppState::from_config(config))?);
    let listener = tokio::net::TcpListener::bind(&listen).await?;
    tracing::info!(address = %listener.local_addr()?, "listening");
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
