//! Routes.
//!
//! | method | path | body | success |
//! |--------|------|------|---------|
//! | POST | `/sessions` | `{prompt, id?, seed?, max_iterations?, domain?}` | 201 session |
//! | GET | `/sessions` | | 200 `{sessions: [id]}` |
//! | GET | `/sessions/{id}` | | 200 session |
//! | POST | `/sessions/{id}/rules` | `{text}` | 200 session |
//! | POST | `/sessions/{id}/rules/confirm` | `{selections: [{draft_id, action, feedback?}]}` | 200 session |
//! | POST | `/sessions/{id}/strictness` | `{constraint_id, weight}` | 200 session |
//! | POST | `/sessions/{id}/run` | `{seed?, max_iterations?}` | 200 run result |
//! | POST | `/sessions/{id}/restart` | | 200 session |
//! | GET | `/sessions/{id}/report` | | 200 latest report |
//! | POST | `/sessions/{id}/ask` | `{question}` | 200 `{answer}` |
//! | GET | `/schemas/{name}` | | 200 JSON schema (`session`, `report`, `error`) |

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::IntoResponse;
use axum::routing::{get, post};
use axum::{Json, Router};
use planverify_core::checker::VerificationReport;
use planverify_core::plan::DomainMode;
use planverify_core::replan::{
    add_rule, adjust_strictness, ask, confirm_rules, create_session, restart, run_iterations,
    Iteration, LoopConfig, LoopError, RunOptions, Selection, Session, SessionStatus,
};
use planverify_core::translator::LlmClient;
use serde::{Deserialize, Serialize};

use crate::error::ApiError;
use crate::store::{valid_id, SessionStore};

pub struct AppState {
    pub store: SessionStore,
    client: Arc<dyn LlmClient>,
    /// Applied to sessions created without explicit settings.
    pub defaults: LoopConfig,
    locks: Mutex<HashMap<String, Arc<tokio::sync::Mutex<()>>>>,
}

impl AppState {
    pub fn new(store: SessionStore, client: Arc<dyn LlmClient>, defaults: LoopConfig) -> Self {
        AppState {
            store,
            client,
            defaults,
            locks: Mutex::new(HashMap::new()),
        }
    }

    /// The mutation lock for `id`; holding it makes other writers get 409.
    pub fn lock_for(&self, id: &str) -> Arc<tokio::sync::Mutex<()>> {
        self.locks
            .lock()
            .expect("lock table poisoned")
            .entry(id.to_string())
            .or_default()
            .clone()
    }
}

type Shared = Arc<AppState>;

pub fn router(state: Shared) -> Router {
    Router::new()
        .route("/sessions", post(create).get(list))
        .route("/sessions/{id}", get(fetch))
        .route("/sessions/{id}/rules", post(add))
        .route("/sessions/{id}/rules/confirm", post(confirm))
        .route("/sessions/{id}/strictness", post(strictness))
        .route("/sessions/{id}/run", post(run))
        .route("/sessions/{id}/restart", post(restart_session))
        .route("/sessions/{id}/report", get(report))
        .route("/sessions/{id}/ask", post(ask_session))
        .route("/schemas/{name}", get(schema))
        .with_state(state)
}

fn body<T>(payload: Result<Json<T>, JsonRejection>) -> Result<T, ApiError> {
    payload
        .map(|Json(v)| v)
        .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "invalid_request", e.body_text()))
}

/// An empty body reads as `{}`.
fn optional_body<T: serde::de::DeserializeOwned + Default>(bytes: &[u8]) -> Result<T, ApiError> {
    if bytes.iter().all(u8::is_ascii_whitespace) {
        return Ok(T::default());
    }
    serde_json::from_slice(bytes).map_err(|e| {
        ApiError::new(
            StatusCode::BAD_REQUEST,
            "invalid_request",
            format!("Failed to parse the request body as JSON: {e}"),
        )
    })
}

fn internal(e: impl std::fmt::Display) -> ApiError {
    ApiError::new(
        StatusCode::INTERNAL_SERVER_ERROR,
        "internal_error",
        e.to_string(),
    )
}

/// Runs `f` on a private copy of the session under its lock and persists
/// the result; on error nothing is written.
async fn mutate<F>(state: Shared, id: String, f: F) -> Result<Session, ApiError>
where
    F: FnOnce(&mut Session, &dyn LlmClient) -> Result<(), LoopError> + Send + 'static,
{
    let guard = state
        .lock_for(&id)
        .try_lock_owned()
        .map_err(|_| ApiError::busy(&id))?;
    tokio::task::spawn_blocking(move || {
        let _guard = guard;
        let mut session = state
            .store
            .get(&id)
            .ok_or_else(|| ApiError::unknown_session(&id))?;
        f(&mut session, state.client.as_ref())?;
        state.store.put(&session)?;
        Ok(session)
    })
    .await
    .map_err(internal)?
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateRequest {
    pub prompt: String,
    #[serde(default)]
    pub id: Option<String>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub max_iterations: Option<usize>,
    #[serde(default)]
    pub domain: Option<DomainMode>,
}

async fn create(
    State(state): State<Shared>,
    payload: Result<Json<CreateRequest>, JsonRejection>,
) -> Result<impl IntoResponse, ApiError> {
    let req = body(payload)?;
    let id = match req.id {
        Some(id) if !valid_id(&id) => {
            return Err(ApiError::new(
                StatusCode::BAD_REQUEST,
                "invalid_request",
                "session id must be 1-64 characters of [A-Za-z0-9_-]",
            ))
        }
        Some(id) => id,
        None => uuid::Uuid::new_v4().to_string(),
    };
    let guard = state
        .lock_for(&id)
        .try_lock_owned()
        .map_err(|_| ApiError::busy(&id))?;
    if state.store.contains(&id) {
        return Err(ApiError::new(
            StatusCode::CONFLICT,
            "session_exists",
            format!("session {id:?} already exists"),
        ));
    }
    let mut config = state.defaults.clone();
    if let Some(seed) = req.seed {
        config.seed = seed;
    }
    if let Some(max) = req.max_iterations {
        config.max_iterations = max;
    }
    if let Some(domain) = req.domain {
        config.domain = domain;
    }
    let session = tokio::task::spawn_blocking(move || {
        let _guard = guard;
        let session = create_session(id, &req.prompt, config, state.client.as_ref())?;
        state.store.put(&session)?;
        Ok::<_, ApiError>(session)
    })
    .await
    .map_err(internal)??;
    Ok((StatusCode::CREATED, Json(session)))
}

#[derive(Debug, Serialize)]
struct SessionList {
    sessions: Vec<String>,
}

async fn list(State(state): State<Shared>) -> Json<SessionList> {
    Json(SessionList {
        sessions: state.store.ids(),
    })
}

async fn fetch(
    State(state): State<Shared>,
    Path(id): Path<String>,
) -> Result<Json<Session>, ApiError> {
    state
        .store
        .get(&id)
        .map(Json)
        .ok_or_else(|| ApiError::unknown_session(&id))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AddRuleRequest {
    pub text: String,
}

async fn add(
    State(state): State<Shared>,
    Path(id): Path<String>,
    payload: Result<Json<AddRuleRequest>, JsonRejection>,
) -> Result<Json<Session>, ApiError> {
    let req = body(payload)?;
    mutate(state, id, move |s, c| add_rule(s, &req.text, c))
        .await
        .map(Json)
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfirmRequest {
    pub selections: Vec<Selection>,
}

async fn confirm(
    State(state): State<Shared>,
    Path(id): Path<String>,
    payload: Result<Json<ConfirmRequest>, JsonRejection>,
) -> Result<Json<Session>, ApiError> {
    let req = body(payload)?;
    mutate(state, id, move |s, c| confirm_rules(s, &req.selections, c))
        .await
        .map(Json)
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StrictnessRequest {
    pub constraint_id: String,
    pub weight: f64,
}

async fn strictness(
    State(state): State<Shared>,
    Path(id): Path<String>,
    payload: Result<Json<StrictnessRequest>, JsonRejection>,
) -> Result<Json<Session>, ApiError> {
    let req = body(payload)?;
    mutate(state, id, move |s, _| {
        adjust_strictness(s, &req.constraint_id, req.weight)
    })
    .await
    .map(Json)
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunRequest {
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub max_iterations: Option<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct RunResponse {
    pub run: usize,
    pub status: SessionStatus,
    /// The iterations appended by this run.
    pub iterations: Vec<Iteration>,
    pub session: Session,
}

async fn run(
    State(state): State<Shared>,
    Path(id): Path<String>,
    payload: axum::body::Bytes,
) -> Result<Json<RunResponse>, ApiError> {
    let req: RunRequest = optional_body(&payload)?;
    let options = RunOptions {
        seed: req.seed,
        max_iterations: req.max_iterations,
    };
    let session = mutate(state, id, move |s, c| run_iterations(s, c, options)).await?;
    let run = session.runs - 1;
    let iterations = session
        .iterations
        .iter()
        .filter(|i| i.run == run)
        .cloned()
        .collect();
    Ok(Json(RunResponse {
        run,
        status: session.status,
        iterations,
        session,
    }))
}

async fn restart_session(
    State(state): State<Shared>,
    Path(id): Path<String>,
) -> Result<Json<Session>, ApiError> {
    mutate(state, id, |s, _| {
        restart(s);
        Ok(())
    })
    .await
    .map(Json)
}

async fn report(
    State(state): State<Shared>,
    Path(id): Path<String>,
) -> Result<Json<VerificationReport>, ApiError> {
    let session = state
        .store
        .get(&id)
        .ok_or_else(|| ApiError::unknown_session(&id))?;
    session.latest_report().cloned().map(Json).ok_or_else(|| {
        ApiError::new(
            StatusCode::NOT_FOUND,
            "no_report",
            format!("session {id:?} has not been verified yet"),
        )
    })
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AskRequest {
    pub question: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct AskResponse {
    pub answer: String,
}

async fn ask_session(
    State(state): State<Shared>,
    Path(id): Path<String>,
    payload: Result<Json<AskRequest>, JsonRejection>,
) -> Result<Json<AskResponse>, ApiError> {
    let req = body(payload)?;
    let session = state
        .store
        .get(&id)
        .ok_or_else(|| ApiError::unknown_session(&id))?;
    Ok(Json(AskResponse {
        answer: ask(&session, &req.question),
    }))
}

async fn schema(Path(name): Path<String>) -> Result<impl IntoResponse, ApiError> {
    let text = match name.trim_end_matches(".json") {
        "session" => crate::SESSION_SCHEMA,
        "report" => crate::REPORT_SCHEMA,
        "error" => crate::ERROR_SCHEMA,
        _ => {
            return Err(ApiError::new(
                StatusCode::NOT_FOUND,
                "unknown_schema",
                format!("no schema {name:?}"),
            ))
        }
    };
    Ok((
        [(axum::http::header::CONTENT_TYPE, "application/schema+json")],
        text,
    ))
}
