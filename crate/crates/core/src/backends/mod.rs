//! Provider interfaces for chat completion and text embedding.
//!
//! Each interface has a live implementation speaking the OpenAI-compatible
//! wire protocol ([`openai`]) and a deterministic fixture-driven one
//! ([`scripted`]) used for offline runs and tests.

pub mod openai;
pub mod oracle;
pub mod retry;
pub mod scripted;
mod source;

use async_trait::async_trait;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::Embedding;

pub use openai::{OpenAiClient, OpenAiSettings};
pub use oracle::pseudo_user_answer;
pub use retry::RetryPolicy;
pub use source::{ChatSource, EmbedSource};
pub use scripted::{EmbeddingTable, FixtureRule, MatchKind, ScriptedChat, ScriptedEmbedder, ScriptedFixture};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BackendError {
    #[error("backend unavailable after {attempts} attempt(s): {message}")]
    Unavailable { attempts: u32, message: String },
    #[error("backend rejected the request ({status}): {message}")]
    Rejected { status: u16, message: String },
    #[error("backend timed out after {attempts} attempt(s)")]
    Timeout { attempts: u32 },
    #[error("embedding dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("malformed backend response: {0}")]
    Malformed(String),
    #[error("fixture error: {0}")]
    Fixture(String),
}

impl BackendError {
    /// Transport-class failures that a retry may cure.
    pub fn is_retryable(&self) -> bool {
        matches!(self, BackendError::Unavailable { .. } | BackendError::Timeout { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        Self {
            role: Role::System,
            content: content.into(),
        }
    }

    pub fn user(content: impl Into<String>) -> Self {
        Self {
            role: Role::User,
            content: content.into(),
        }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Self {
            role: Role::Assistant,
            content: content.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChatRequest {
    pub messages: Vec<ChatMessage>,
    pub temperature: f64,
    pub top_p: f64,
    pub presence_penalty: f64,
    pub max_tokens: Option<u32>,
}

impl ChatRequest {
    /// Single user-turn request with neutral sampling parameters.
    pub fn user(prompt: impl Into<String>) -> Self {
        Self {
            messages: vec![ChatMessage::user(prompt)],
            temperature: 0.0,
            top_p: 1.0,
            presence_penalty: 0.0,
            max_tokens: None,
        }
    }

    pub fn with_system(mut self, system: impl Into<String>) -> Self {
        self.messages.insert(0, ChatMessage::system(system));
        self
    }

    pub fn temperature(mut self, t: f64) -> Self {
        self.temperature = t;
        self
    }

    pub fn top_p(mut self, p: f64) -> Self {
        self.top_p = p;
        self
    }

    pub fn presence_penalty(mut self, p: f64) -> Self {
        self.presence_penalty = p;
        self
    }

    pub fn validate(&self) -> Result<(), BackendError> {
        match self.messages.last() {
            None => Err(BackendError::InvalidRequest("request has no messages".into())),
            Some(m) if m.role != Role::User => Err(BackendError::InvalidRequest(
                "last message must have role user".into(),
            )),
            Some(_) => Ok(()),
        }
    }

    /// Content of the final user message.
    pub fn last_user_content(&self) -> &str {
        self.messages.last().map(|m| m.content.as_str()).unwrap_or("")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Usage {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChatResponse {
    pub text: String,
    pub usage: Option<Usage>,
    pub latency_ms: u64,
}

#[async_trait]
pub trait ChatBackend: Send + Sync {
    async fn chat_complete(&self, req: &ChatRequest) -> Result<ChatResponse, BackendError>;
}

#[async_trait]
pub trait EmbedBackend: Send + Sync {
    /// One embedding per input text, in input order, all of the same dimension.
    async fn embed(&self, texts: &[String]) -> Result<Vec<Embedding>, BackendError>;
}

/// Shared precondition for every embedding backend.
pub(crate) fn check_embed_inputs(texts: &[String]) -> Result<(), BackendError> {
    if texts.is_empty() {
        return Err(BackendError::InvalidRequest("no texts to embed".into()));
    }
    if let Some(i) = texts.iter().position(|t| t.is_empty()) {
        return Err(BackendError::InvalidRequest(format!("text {i} is empty")));
    }
    Ok(())
}

/// Verifies that all returned embeddings share one dimension.
pub(crate) fn check_uniform_dim(embeddings: &[Embedding]) -> Result<(), BackendError> {
    if let Some(first) = embeddings.first() {
        let expected = first.dim();
        if let Some(bad) = embeddings.iter().find(|e| e.dim() != expected) {
            return Err(BackendError::DimensionMismatch {
                expected,
                found: bad.dim(),
            });
        }
    }
    Ok(())
}

#[async_trait]
impl<T: ChatBackend + ?Sized> ChatBackend for std::sync::Arc<T> {
    async fn chat_complete(&self, req: &ChatRequest) -> Result<ChatResponse, BackendError> {
        (**self).chat_complete(req).await
    }
}

#[async_trait]
impl<T: EmbedBackend + ?Sized> EmbedBackend for std::sync::Arc<T> {
    async fn embed(&self, texts: &[String]) -> Result<Vec<Embedding>, BackendError> {
        (**self).embed(texts).await
    }
}
