use std::sync::Arc;

use async_trait::async_trait;
use thiserror::Error;

use crate::backends::{pseudo_user_answer, BackendError, ChatBackend};
use crate::model::{ClarifyingQuestion, FeedbackItem, SessionRecord};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ChannelError {
    #[error("user channel closed")]
    Closed,
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error("{0}")]
    Other(String),
}

/// Where clarifying questions go and feedback comes from. Implementations
/// must return exactly one item per question, in question order; they may
/// block for as long as a human needs.
#[async_trait]
pub trait UserChannel: Send + Sync {
    async fn ask(&self, questions: &[ClarifyingQuestion]) -> Result<Vec<FeedbackItem>, ChannelError>;
}

/// Routes questions to a pseudo-user that holds the supporting facts.
pub struct OracleChannel {
    backend: Arc<dyn ChatBackend>,
    facts: Vec<String>,
}

impl OracleChannel {
    pub fn new(backend: Arc<dyn ChatBackend>, facts: Vec<String>) -> Self {
        Self { backend, facts }
    }
}

#[async_trait]
impl UserChannel for OracleChannel {
    async fn ask(&self, questions: &[ClarifyingQuestion]) -> Result<Vec<FeedbackItem>, ChannelError> {
        Ok(pseudo_user_answer(self.backend.as_ref(), questions, &self.facts).await?)
    }
}

/// Channel that replies from a fixed list of answers; every round receives
/// the same list, padded with skips.
pub struct StaticChannel(pub Vec<String>);

#[async_trait]
impl UserChannel for StaticChannel {
    async fn ask(&self, questions: &[ClarifyingQuestion]) -> Result<Vec<FeedbackItem>, ChannelError> {
        Ok(questions
            .iter()
            .enumerate()
            .map(|(i, q)| FeedbackItem::new(q.clone(), self.0.get(i).cloned().unwrap_or_default()))
            .collect())
    }
}

/// Receives a snapshot every time a session changes state.
pub trait SessionObserver: Send + Sync {
    fn on_update(&self, session: &SessionRecord);
}

impl SessionObserver for () {
    fn on_update(&self, _session: &SessionRecord) {}
}

impl<F: Fn(&SessionRecord) + Send + Sync> SessionObserver for F {
    fn on_update(&self, session: &SessionRecord) {
        self(session)
    }
}
