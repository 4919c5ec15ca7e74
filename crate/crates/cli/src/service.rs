//! REST front end for interactive sessions.
//!
//! `POST /v1/sessions` starts the engine in a background task whose user
//! channel blocks until `POST /v1/sessions/{id}/feedback` delivers answers.
//! Clients poll `GET /v1/sessions/{id}` to follow progress.

use std::path::Path;
use std::sync::Arc;

use async_trait::async_trait;
use axum::extract::{Path as UrlPath, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use inquest_core::backends::{ChatSource, EmbedSource};
use inquest_core::engine::{ChannelError, PromptTemplateSet};
use inquest_core::model::{random_session_id, ModelError};
use inquest_core::{
    ClarifyingQuestion, Demonstration, Engine, FeedbackItem, InquiryConfig, SessionRecord, UserChannel, UserQuery,
};
use serde::Deserialize;
use serde_json::{json, Value};
use tokio::sync::{mpsc, Mutex};
use tower_http::services::ServeDir;

use crate::settings::Runtime;
use crate::store::{FeedbackError, SessionStore};

struct Shared {
    store: Arc<SessionStore>,
    chat: ChatSource,
    embed: EmbedSource,
    templates: Arc<PromptTemplateSet>,
    base: InquiryConfig,
    demonstrations: Vec<Demonstration>,
}

#[derive(Clone)]
pub struct AppState(Arc<Shared>);

impl AppState {
    pub fn new(runtime: Runtime, store: Arc<SessionStore>) -> Self {
        Self(Arc::new(Shared {
            store,
            chat: runtime.chat,
            embed: runtime.embed,
            templates: runtime.templates,
            base: runtime.inquiry,
            demonstrations: runtime.demonstrations,
        }))
    }

    pub fn store(&self) -> &Arc<SessionStore> {
        &self.0.store
    }
}

/// API routes, plus static files from `assets` for every other path.
pub fn router(state: AppState, assets: Option<&Path>) -> Router {
    let api = Router::new()
        .route("/v1/sessions", post(create_session))
        .route("/v1/sessions/{id}", get(get_session).delete(delete_session))
        .route("/v1/sessions/{id}/feedback", post(post_feedback));
    let api = match assets {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    };
    api.with_state(state)
}

fn error(status: StatusCode, message: impl Into<String>) -> Response {
    (status, Json(json!({ "error": message.into() }))).into_response()
}

fn invalid(errors: Vec<String>) -> Response {
    (
        StatusCode::BAD_REQUEST,
        Json(json!({ "error": "invalid request", "errors": errors })),
    )
        .into_response()
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CreateBody {
    query: String,
    #[serde(default)]
    config: Option<serde_json::Map<String, Value>>,
    #[serde(default)]
    demonstrations: Option<Vec<Demonstration>>,
}

/// Applies per-session overrides on top of the server configuration.
fn merge_config(
    base: &InquiryConfig,
    overrides: Option<serde_json::Map<String, Value>>,
    demonstrations: usize,
) -> Result<InquiryConfig, Vec<String>> {
    let mut value = serde_json::to_value(base).expect("config serializes");
    let obj = value.as_object_mut().expect("config is an object");
    let mut errors = Vec::new();
    for (k, v) in overrides.unwrap_or_default() {
        if k == "demonstrations" {
            errors.push("demonstrations is set from the supplied demonstrations".into());
        } else if obj.contains_key(&k) {
            obj.insert(k, v);
        } else {
            errors.push(format!("unknown config key '{k}'"));
        }
    }
    if !errors.is_empty() {
        return Err(errors);
    }
    let mut cfg: InquiryConfig = serde_json::from_value(value).map_err(|e| vec![e.to_string()])?;
    cfg.demonstrations = demonstrations;
    cfg.validate().map_err(|e| match e {
        ModelError::InvalidConfig(v) => v,
        other => vec![other.to_string()],
    })
}

/// User channel fed by the feedback endpoint.
struct HttpChannel {
    answers: Mutex<mpsc::Receiver<Vec<String>>>,
}

#[async_trait]
impl UserChannel for HttpChannel {
    async fn ask(&self, questions: &[ClarifyingQuestion]) -> Result<Vec<FeedbackItem>, ChannelError> {
        let answers = self.answers.lock().await.recv().await.ok_or(ChannelError::Closed)?;
        Ok(questions
            .iter()
            .enumerate()
            .map(|(i, q)| FeedbackItem::new(q.clone(), answers.get(i).cloned().unwrap_or_default()))
            .collect())
    }
}

async fn create_session(State(app): State<AppState>, Json(body): Json<Value>) -> Response {
    let body: CreateBody = match serde_json::from_value(body) {
        Ok(b) => b,
        Err(e) => return invalid(vec![e.to_string()]),
    };
    let s = &app.0;
    let demos = body.demonstrations.unwrap_or_else(|| s.demonstrations.clone());
    let mut errors = Vec::new();
    let cfg = merge_config(&s.base, body.config, demos.len()).unwrap_or_else(|e| {
        errors.extend(e);
        s.base.clone()
    });
    let query = UserQuery::new(body.query, demos).map_err(|e| errors.push(e.to_string())).ok();
    let Some(query) = query.filter(|_| errors.is_empty()) else {
        return invalid(errors);
    };
    let embed = match s.embed.instance() {
        Ok(e) => e,
        Err(e) => return error(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()),
    };
    let engine = Engine::with_templates(s.chat.instance(), embed, s.templates.clone());

    let id = random_session_id();
    let record = SessionRecord::new(id.clone(), query);
    let (tx, rx) = mpsc::channel(1);
    s.store.insert(record.clone(), cfg.clone(), tx);

    let store = s.store.clone();
    let task = tokio::spawn(async move {
        let channel = HttpChannel {
            answers: Mutex::new(rx),
        };
        let observer = |r: &SessionRecord| store.update(r);
        let done = engine.run_session(&channel, record, &cfg, &observer).await;
        tracing::info!(session = done.session_id(), state = %done.state(), "session finished");
    });
    s.store.attach_task(&id, task.abort_handle());
    (StatusCode::CREATED, Json(json!({ "session_id": id }))).into_response()
}

async fn get_session(State(app): State<AppState>, UrlPath(id): UrlPath<String>) -> Response {
    match app.0.store.view(&id) {
        Some(v) => Json(v).into_response(),
        None => error(StatusCode::NOT_FOUND, "unknown session"),
    }
}

#[derive(Deserialize)]
struct FeedbackBody {
    answers: Vec<String>,
}

async fn post_feedback(
    State(app): State<AppState>,
    UrlPath(id): UrlPath<String>,
    Json(body): Json<FeedbackBody>,
) -> Response {
    match app.0.store.submit_feedback(&id, body.answers) {
        Ok(()) => Json(json!({ "accepted": true })).into_response(),
        Err(e @ FeedbackError::NotFound) => error(StatusCode::NOT_FOUND, e.to_string()),
        Err(e @ (FeedbackError::NotAwaiting(_) | FeedbackError::Closed)) => error(StatusCode::CONFLICT, e.to_string()),
        Err(e @ FeedbackError::Arity { .. }) => error(StatusCode::UNPROCESSABLE_ENTITY, e.to_string()),
    }
}

async fn delete_session(State(app): State<AppState>, UrlPath(id): UrlPath<String>) -> Response {
    if app.0.store.remove(&id) {
        StatusCode::NO_CONTENT.into_response()
    } else {
        error(StatusCode::NOT_FOUND, "unknown session")
    }
}
