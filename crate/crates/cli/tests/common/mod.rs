#![allow(dead_code)]

use std::path::PathBuf;
use std::sync::Arc;
use std::time::{Duration, Instant};

use inquest::service::{router, AppState};
use inquest::settings::{RunFlags, Runtime};
use inquest::store::{SessionStore, DEFAULT_TTL};
use serde_json::{json, Value};

pub const SESSIONS: usize = 20;

/// Chat script for `SESSIONS` independent topics. Every sampled answer for
/// topic k differs, so the variance is high and the session asks; once the
/// feedback "detail-k" is in the prompt the reply is "answer-k".
pub fn service_fixture() -> Value {
    let mut rules = Vec::new();
    for k in 0..SESSIONS {
        rules.push(json!({"match": format!("detail-{k}."), "responses": [format!("answer-{k}")]}));
    }
    rules.push(json!({
        "match": "numbered clarifying questions",
        "responses": ["1. Which year?\n2. Which country?\n3. Which league?\n4. Which person?\n5. Which edition?"]
    }));
    for k in 0..SESSIONS {
        let guesses: Vec<String> = (0..5).map(|i| format!("guess {i} for topic {k}")).collect();
        rules.push(json!({"match": format!("topic-{k}?"), "responses": guesses}));
    }
    rules.push(json!({"default": "unknown"}));
    Value::Array(rules)
}

pub fn query(k: usize) -> String {
    format!("What happened with topic-{k}?")
}

pub fn feedback(k: usize) -> String {
    format!("detail-{k}.")
}

pub struct Server {
    pub base: String,
    pub store: Arc<SessionStore>,
    pub client: reqwest::Client,
    _dir: tempfile::TempDir,
    _task: tokio::task::JoinHandle<()>,
}

pub async fn start_server() -> Server {
    let dir = tempfile::tempdir().unwrap();
    let fixture: PathBuf = dir.path().join("chat.json");
    std::fs::write(&fixture, service_fixture().to_string()).unwrap();
    let flags = RunFlags {
        chat_fixture: Some(fixture),
        ..Default::default()
    };
    let rt = Runtime::resolve(&flags, &|_| None).unwrap();
    let store = SessionStore::new(DEFAULT_TTL);
    let assets = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("assets");
    let app = router(AppState::new(rt, store.clone()), Some(&assets));
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    let task = tokio::spawn(async move {
        axum::serve(listener, app).await.unwrap();
    });
    Server {
        base: format!("http://{addr}"),
        store,
        client: reqwest::Client::new(),
        _dir: dir,
        _task: task,
    }
}

impl Server {
    pub async fn create(&self, body: Value) -> (u16, Value) {
        let r = self
            .client
            .post(format!("{}/v1/sessions", self.base))
            .json(&body)
            .send()
            .await
            .unwrap();
        let status = r.status().as_u16();
        (status, r.json().await.unwrap_or(Value::Null))
    }

    pub async fn get(&self, id: &str) -> (u16, Value) {
        let r = self
            .client
            .get(format!("{}/v1/sessions/{id}", self.base))
            .send()
            .await
            .unwrap();
        let status = r.status().as_u16();
        (status, r.json().await.unwrap_or(Value::Null))
    }

    pub async fn feedback(&self, id: &str, answers: &[String]) -> u16 {
        self.client
            .post(format!("{}/v1/sessions/{id}/feedback", self.base))
            .json(&json!({ "answers": answers }))
            .send()
            .await
            .unwrap()
            .status()
            .as_u16()
    }

    pub async fn delete(&self, id: &str) -> u16 {
        self.client
            .delete(format!("{}/v1/sessions/{id}", self.base))
            .send()
            .await
            .unwrap()
            .status()
            .as_u16()
    }

    /// Polls until the session reaches one of `states`.
    pub async fn wait_for(&self, id: &str, states: &[&str]) -> Value {
        let deadline = Instant::now() + Duration::from_secs(10);
        loop {
            let (status, view) = self.get(id).await;
            assert_eq!(status, 200, "{view}");
            if states.iter().any(|s| view["state"] == *s) {
                return view;
            }
            assert!(Instant::now() < deadline, "session {id} stuck in {}", view["state"]);
            tokio::time::sleep(Duration::from_millis(5)).await;
        }
    }
}

/// Runs one session for topic `k` through feedback to completion and
/// returns the final view.
pub async fn full_session(server: &Server, k: usize) -> Value {
    let (status, body) = server.create(json!({ "query": query(k) })).await;
    assert_eq!(status, 201, "{body}");
    let id = body["session_id"].as_str().unwrap().to_string();
    let view = server.wait_for(&id, &["AwaitingFeedback", "Completed", "Failed"]).await;
    assert_eq!(view["state"], "AwaitingFeedback", "{view}");
    let m = view["pending_questions"].as_array().unwrap().len();
    let answers: Vec<String> = (0..m).map(|_| feedback(k)).collect();
    assert_eq!(server.feedback(&id, &answers).await, 200);
    server.wait_for(&id, &["Completed", "Failed"]).await
}
