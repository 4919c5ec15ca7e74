//! In-memory session registry shared by the HTTP handlers and the engine
//! tasks. Each session has one writer at a time: its engine task, or the
//! feedback handler while the task is blocked waiting for answers.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use inquest_core::{InquiryConfig, SessionRecord, SessionState};
use serde::Serialize;
use tokio::sync::mpsc;
use tokio::task::AbortHandle;

pub const DEFAULT_TTL: Duration = Duration::from_secs(30 * 60);

struct Entry {
    record: SessionRecord,
    config: InquiryConfig,
    feedback: mpsc::Sender<Vec<String>>,
    touched: Instant,
    task: Option<AbortHandle>,
}

/// What `GET /v1/sessions/{id}` returns.
#[derive(Debug, Clone, Serialize)]
pub struct SessionView {
    pub session_id: String,
    pub state: SessionState,
    pub variance_history: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pending_questions: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub final_answer: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub rounds: usize,
    pub config: InquiryConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub transcript: Option<serde_json::Value>,
}

impl SessionView {
    fn of(e: &Entry) -> Self {
        let r = &e.record;
        let terminal = r.state().is_terminal();
        Self {
            session_id: r.session_id().to_string(),
            state: r.state(),
            variance_history: r.variance_history().to_vec(),
            pending_questions: (r.state() == SessionState::AwaitingFeedback)
                .then(|| r.pending_questions().iter().map(|q| q.text.clone()).collect()),
            final_answer: r.final_answer().map(str::to_string),
            error: r.error().map(str::to_string),
            rounds: r.rounds(),
            config: e.config.clone(),
            transcript: terminal.then(|| r.to_transcript_value()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FeedbackError {
    #[error("unknown session")]
    NotFound,
    #[error("session is {0}, not awaiting feedback")]
    NotAwaiting(SessionState),
    #[error("expected {expected} answers, got {got}")]
    Arity { expected: usize, got: usize },
    #[error("session is no longer running")]
    Closed,
}

pub struct SessionStore {
    sessions: Mutex<HashMap<String, Entry>>,
    ttl: Duration,
}

impl SessionStore {
    pub fn new(ttl: Duration) -> Arc<Self> {
        Arc::new(Self {
            sessions: Mutex::new(HashMap::new()),
            ttl,
        })
    }

    fn lock(&self) -> std::sync::MutexGuard<'_, HashMap<String, Entry>> {
        self.sessions.lock().expect("session store poisoned")
    }

    pub fn ttl(&self) -> Duration {
        self.ttl
    }

    pub fn insert(&self, record: SessionRecord, config: InquiryConfig, feedback: mpsc::Sender<Vec<String>>) {
        let id = record.session_id().to_string();
        self.lock().insert(
            id,
            Entry {
                record,
                config,
                feedback,
                touched: Instant::now(),
                task: None,
            },
        );
    }

    pub fn attach_task(&self, id: &str, task: AbortHandle) {
        match self.lock().get_mut(id) {
            Some(e) => e.task = Some(task),
            None => task.abort(),
        }
    }

    /// Stores the engine's latest snapshot. Updates for sessions that were
    /// deleted or expired are dropped.
    pub fn update(&self, record: &SessionRecord) {
        if let Some(e) = self.lock().get_mut(record.session_id()) {
            e.record = record.clone();
        }
    }

    pub fn view(&self, id: &str) -> Option<SessionView> {
        let mut map = self.lock();
        let e = map.get_mut(id)?;
        e.touched = Instant::now();
        Some(SessionView::of(e))
    }

    /// Hands the answers to the waiting engine task. The snapshot moves to
    /// `Estimating` under the lock, so a second post for the same round
    /// gets `NotAwaiting`.
    pub fn submit_feedback(&self, id: &str, answers: Vec<String>) -> Result<(), FeedbackError> {
        let mut map = self.lock();
        let e = map.get_mut(id).ok_or(FeedbackError::NotFound)?;
        e.touched = Instant::now();
        let state = e.record.state();
        if state != SessionState::AwaitingFeedback {
            return Err(FeedbackError::NotAwaiting(state));
        }
        let expected = e.record.pending_questions().len();
        if answers.len() != expected {
            return Err(FeedbackError::Arity {
                expected,
                got: answers.len(),
            });
        }
        e.feedback.try_send(answers).map_err(|_| FeedbackError::Closed)?;
        e.record
            .begin_estimating()
            .expect("AwaitingFeedback -> Estimating is a legal transition");
        Ok(())
    }

    pub fn remove(&self, id: &str) -> bool {
        match self.lock().remove(id) {
            Some(e) => {
                if let Some(t) = e.task {
                    t.abort();
                }
                true
            }
            None => false,
        }
    }

    /// Drops sessions idle for longer than the TTL; returns how many.
    pub fn sweep_expired(&self, now: Instant) -> usize {
        let mut map = self.lock();
        let before = map.len();
        map.retain(|_, e| {
            let keep = now.saturating_duration_since(e.touched) <= self.ttl;
            if !keep {
                if let Some(t) = &e.task {
                    t.abort();
                }
            }
            keep
        });
        before - map.len()
    }

    pub fn len(&self) -> usize {
        self.lock().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Periodically expires idle sessions.
pub fn spawn_sweeper(store: Arc<SessionStore>) -> tokio::task::JoinHandle<()> {
    let period = (store.ttl() / 4).clamp(Duration::from_millis(10), Duration::from_secs(60));
    tokio::spawn(async move {
        let mut tick = tokio::time::interval(period);
        loop {
            tick.tick().await;
            let n = store.sweep_expired(Instant::now());
            if n > 0 {
                tracing::info!(expired = n, "expired idle sessions");
            }
        }
    })
}
