//! Client for OpenAI-compatible `chat/completions` and `embeddings` endpoints.

use std::time::{Duration, Instant};

use async_trait::async_trait;
use serde::{Deserialize, Serialize};

use super::{
    check_embed_inputs, check_uniform_dim, BackendError, ChatBackend, ChatMessage, ChatRequest, ChatResponse,
    EmbedBackend, RetryPolicy, Usage,
};
use crate::model::Embedding;

pub const ENV_API_KEY: &str = "INQUEST_API_KEY";
pub const ENV_BASE_URL: &str = "INQUEST_BASE_URL";
pub const ENV_CHAT_MODEL: &str = "INQUEST_CHAT_MODEL";
pub const ENV_EMBED_MODEL: &str = "INQUEST_EMBED_MODEL";

pub const DEFAULT_BASE_URL: &str = "https://api.openai.com/v1";
pub const DEFAULT_CHAT_MODEL: &str = "gpt-3.5-turbo";
pub const DEFAULT_EMBED_MODEL: &str = "text-embedding-ada-002";

#[derive(Debug, Clone, PartialEq)]
pub struct OpenAiSettings {
    pub base_url: String,
    pub api_key: Option<String>,
    pub chat_model: String,
    pub embed_model: String,
    pub timeout: Duration,
    pub retry: RetryPolicy,
}

impl Default for OpenAiSettings {
    fn default() -> Self {
        Self {
            base_url: DEFAULT_BASE_URL.to_string(),
            api_key: None,
            chat_model: DEFAULT_CHAT_MODEL.to_string(),
            embed_model: DEFAULT_EMBED_MODEL.to_string(),
            timeout: Duration::from_secs(60),
            retry: RetryPolicy::default(),
        }
    }
}

impl OpenAiSettings {
    /// Defaults overridden by any `INQUEST_*` variables present.
    pub fn from_env() -> Self {
        let mut s = Self::default();
        s.apply_env(|k| std::env::var(k).ok());
        s
    }

    pub fn apply_env(&mut self, get: impl Fn(&str) -> Option<String>) {
        if let Some(v) = get(ENV_BASE_URL).filter(|v| !v.is_empty()) {
            self.base_url = v;
        }
        if let Some(v) = get(ENV_API_KEY).filter(|v| !v.is_empty()) {
            self.api_key = Some(v);
        }
        if let Some(v) = get(ENV_CHAT_MODEL).filter(|v| !v.is_empty()) {
            self.chat_model = v;
        }
        if let Some(v) = get(ENV_EMBED_MODEL).filter(|v| !v.is_empty()) {
            self.embed_model = v;
        }
    }
}

#[derive(Serialize)]
struct WireChatRequest<'a> {
    model: &'a str,
    messages: &'a [ChatMessage],
    temperature: f64,
    top_p: f64,
    presence_penalty: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    max_tokens: Option<u32>,
}

#[derive(Deserialize)]
struct WireChatResponse {
    choices: Vec<WireChoice>,
    #[serde(default)]
    usage: Option<WireUsage>,
}

#[derive(Deserialize)]
struct WireChoice {
    message: WireMessage,
}

#[derive(Deserialize)]
struct WireMessage {
    #[serde(default)]
    content: Option<String>,
}

#[derive(Deserialize)]
struct WireUsage {
    #[serde(default)]
    prompt_tokens: u64,
    #[serde(default)]
    completion_tokens: u64,
}

#[derive(Serialize)]
struct WireEmbedRequest<'a> {
    model: &'a str,
    input: &'a [String],
}

#[derive(Deserialize)]
struct WireEmbedResponse {
    data: Vec<WireEmbedding>,
}

#[derive(Deserialize)]
struct WireEmbedding {
    #[serde(default)]
    index: usize,
    embedding: Vec<f64>,
}

/// Live backend for any server that speaks the OpenAI HTTP API.
#[derive(Debug, Clone)]
pub struct OpenAiClient {
    http: reqwest::Client,
    settings: OpenAiSettings,
}

impl OpenAiClient {
    pub fn new(settings: OpenAiSettings) -> Result<Self, BackendError> {
        let http = reqwest::Client::builder()
            .timeout(settings.timeout)
            .build()
            .map_err(|e| BackendError::InvalidRequest(format!("http client: {e}")))?;
        Ok(Self { http, settings })
    }

    pub fn settings(&self) -> &OpenAiSettings {
        &self.settings
    }

    fn endpoint(&self, path: &str) -> String {
        format!("{}/{}", self.settings.base_url.trim_end_matches('/'), path)
    }

    async fn post_json<B: Serialize, R: for<'de> Deserialize<'de>>(&self, path: &str, body: &B) -> Result<R, BackendError> {
        let url = self.endpoint(path);
        self.settings
            .retry
            .run(|| async {
                let mut req = self.http.post(&url).json(body);
                if let Some(key) = &self.settings.api_key {
                    req = req.bearer_auth(key);
                }
                let resp = req.send().await.map_err(transport_error)?;
                let status = resp.status();
                if status.is_success() {
                    return resp
                        .json::<R>()
                        .await
                        .map_err(|e| BackendError::Malformed(e.to_string()));
                }
                let message = resp.text().await.unwrap_or_default();
                if status.as_u16() == 429 || status.is_server_error() {
                    Err(BackendError::Unavailable {
                        attempts: 1,
                        message: format!("status {}: {message}", status.as_u16()),
                    })
                } else {
                    Err(BackendError::Rejected {
                        status: status.as_u16(),
                        message,
                    })
                }
            })
            .await
    }
}

fn transport_error(e: reqwest::Error) -> BackendError {
    if e.is_timeout() {
        BackendError::Timeout { attempts: 1 }
    } else {
        BackendError::Unavailable {
            attempts: 1,
            message: e.to_string(),
        }
    }
}

#[async_trait]
impl ChatBackend for OpenAiClient {
    async fn chat_complete(&self, req: &ChatRequest) -> Result<ChatResponse, BackendError> {
        req.validate()?;
        let body = WireChatRequest {
            model: &self.settings.chat_model,
            messages: &req.messages,
            temperature: req.temperature,
            top_p: req.top_p,
            presence_penalty: req.presence_penalty,
            max_tokens: req.max_tokens,
        };
        let started = Instant::now();
        let resp: WireChatResponse = self.post_json("chat/completions", &body).await?;
        let choice = resp
            .choices
            .into_iter()
            .next()
            .ok_or_else(|| BackendError::Malformed("response has no choices".into()))?;
        Ok(ChatResponse {
            text: choice.message.content.unwrap_or_default(),
            usage: resp.usage.map(|u| Usage {
                prompt_tokens: u.prompt_tokens,
                completion_tokens: u.completion_tokens,
            }),
            latency_ms: started.elapsed().as_millis() as u64,
        })
    }
}

#[async_trait]
impl EmbedBackend for OpenAiClient {
    async fn embed(&self, texts: &[String]) -> Result<Vec<Embedding>, BackendError> {
        check_embed_inputs(texts)?;
        let body = WireEmbedRequest {
            model: &self.settings.embed_model,
            input: texts,
        };
        let mut resp: WireEmbedResponse = self.post_json("embeddings", &body).await?;
        if resp.data.len() != texts.len() {
            return Err(BackendError::Malformed(format!(
                "expected {} embeddings, got {}",
                texts.len(),
                resp.data.len()
            )));
        }
        resp.data.sort_by_key(|d| d.index);
        let out = resp
            .data
            .into_iter()
            .map(|d| Embedding::new(d.embedding).map_err(|e| BackendError::Malformed(e.to_string())))
            .collect::<Result<Vec<_>, _>>()?;
        check_uniform_dim(&out)?;
        Ok(out)
    }
}
