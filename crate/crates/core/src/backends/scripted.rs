//! Deterministic fixture-driven backends.
//!
//! A chat fixture is an ordered list of rules; the first rule whose pattern
//! matches a request answers it, cycling through the rule's responses on
//! repeated hits. Requests matching no rule get the default response.

use std::collections::HashMap;
use std::path::Path;
use std::sync::Mutex;

use async_trait::async_trait;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{check_embed_inputs, check_uniform_dim, BackendError, ChatBackend, ChatRequest, ChatResponse, EmbedBackend};
use crate::model::Embedding;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatchKind {
    /// Pattern occurs in the content of any message.
    #[default]
    Contains,
    /// Pattern equals the final user message.
    Exact,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureRule {
    #[serde(rename = "match")]
    pub pattern: String,
    #[serde(default)]
    pub match_kind: MatchKind,
    pub responses: Vec<String>,
}

impl FixtureRule {
    pub fn contains(pattern: impl Into<String>, responses: &[&str]) -> Self {
        Self {
            pattern: pattern.into(),
            match_kind: MatchKind::Contains,
            responses: responses.iter().map(|s| s.to_string()).collect(),
        }
    }

    pub fn exact(pattern: impl Into<String>, responses: &[&str]) -> Self {
        Self {
            match_kind: MatchKind::Exact,
            ..Self::contains(pattern, responses)
        }
    }

    fn matches(&self, req: &ChatRequest) -> bool {
        match self.match_kind {
            MatchKind::Contains => req.messages.iter().any(|m| m.content.contains(&self.pattern)),
            MatchKind::Exact => req.last_user_content() == self.pattern,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ScriptedFixture {
    pub rules: Vec<FixtureRule>,
    pub default_response: String,
}

#[derive(Deserialize, Serialize)]
#[serde(untagged)]
enum FixtureEntry {
    Rule(FixtureRule),
    Default { default: String },
}

impl ScriptedFixture {
    pub fn new(rules: Vec<FixtureRule>, default_response: impl Into<String>) -> Self {
        Self {
            rules,
            default_response: default_response.into(),
        }
    }

    /// Parses the fixture file format: a JSON array of rule objects
    /// (`{match, match_kind, responses}`) plus at most one `{"default": ...}`.
    pub fn from_json(text: &str) -> Result<Self, BackendError> {
        let entries: Vec<FixtureEntry> =
            serde_json::from_str(text).map_err(|e| BackendError::Fixture(e.to_string()))?;
        let mut fixture = Self::default();
        let mut seen_default = false;
        for entry in entries {
            match entry {
                FixtureEntry::Rule(rule) => {
                    if rule.responses.is_empty() {
                        return Err(BackendError::Fixture(format!(
                            "rule '{}' has no responses",
                            rule.pattern
                        )));
                    }
                    fixture.rules.push(rule);
                }
                FixtureEntry::Default { default } => {
                    if seen_default {
                        return Err(BackendError::Fixture("more than one default entry".into()));
                    }
                    seen_default = true;
                    fixture.default_response = default;
                }
            }
        }
        Ok(fixture)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, BackendError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| BackendError::Fixture(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        let mut entries: Vec<FixtureEntry> = self.rules.iter().cloned().map(FixtureEntry::Rule).collect();
        entries.push(FixtureEntry::Default {
            default: self.default_response.clone(),
        });
        serde_json::to_string_pretty(&entries).expect("fixture serialization is infallible")
    }
}

#[derive(Debug, Default)]
struct ScriptState {
    hits: Vec<usize>,
    log: Vec<ChatRequest>,
}

/// Chat backend answering from a [`ScriptedFixture`].
#[derive(Debug)]
pub struct ScriptedChat {
    fixture: ScriptedFixture,
    state: Mutex<ScriptState>,
}

impl ScriptedChat {
    pub fn new(fixture: ScriptedFixture) -> Self {
        let hits = vec![0; fixture.rules.len()];
        Self {
            fixture,
            state: Mutex::new(ScriptState {
                hits,
                log: Vec::new(),
            }),
        }
    }

    /// Backend that always answers with `text`.
    pub fn constant(text: impl Into<String>) -> Self {
        Self::new(ScriptedFixture::new(Vec::new(), text))
    }

    pub fn fixture(&self) -> &ScriptedFixture {
        &self.fixture
    }

    /// Every request received so far, in arrival order.
    pub fn request_log(&self) -> Vec<ChatRequest> {
        self.state.lock().expect("scripted state poisoned").log.clone()
    }

    pub fn calls(&self) -> usize {
        self.state.lock().expect("scripted state poisoned").log.len()
    }

    /// Number of requests whose content contains `needle`.
    pub fn calls_containing(&self, needle: &str) -> usize {
        self.state
            .lock()
            .expect("scripted state poisoned")
            .log
            .iter()
            .filter(|r| r.messages.iter().any(|m| m.content.contains(needle)))
            .count()
    }

    fn respond(&self, req: &ChatRequest) -> String {
        let mut state = self.state.lock().expect("scripted state poisoned");
        state.log.push(req.clone());
        match self.fixture.rules.iter().position(|r| r.matches(req)) {
            Some(i) => {
                let rule = &self.fixture.rules[i];
                let n = state.hits[i];
                state.hits[i] += 1;
                rule.responses[n % rule.responses.len()].clone()
            }
            None => self.fixture.default_response.clone(),
        }
    }
}

#[async_trait]
impl ChatBackend for ScriptedChat {
    async fn chat_complete(&self, req: &ChatRequest) -> Result<ChatResponse, BackendError> {
        req.validate()?;
        Ok(ChatResponse {
            text: self.respond(req),
            usage: None,
            latency_ms: 0,
        })
    }
}

/// Text → vector table for the scripted embedder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingTable {
    pub dimension: usize,
    #[serde(default)]
    pub vectors: HashMap<String, Vec<f64>>,
}

impl EmbeddingTable {
    pub fn empty(dimension: usize) -> Self {
        Self {
            dimension,
            vectors: HashMap::new(),
        }
    }

    pub fn with(mut self, text: impl Into<String>, values: Vec<f64>) -> Self {
        self.vectors.insert(text.into(), values);
        self
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, BackendError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| BackendError::Fixture(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| BackendError::Fixture(format!("{}: {e}", path.display())))
    }
}

/// Embedding backend backed by an [`EmbeddingTable`], falling back to a
/// deterministic hash-seeded unit vector for unlisted texts.
#[derive(Debug)]
pub struct ScriptedEmbedder {
    table: HashMap<String, Embedding>,
    dimension: usize,
    calls: Mutex<usize>,
}

impl ScriptedEmbedder {
    pub fn new(table: EmbeddingTable) -> Result<Self, BackendError> {
        if table.dimension == 0 {
            return Err(BackendError::Fixture("embedding dimension must be positive".into()));
        }
        let mut vectors = HashMap::with_capacity(table.vectors.len());
        for (text, values) in table.vectors {
            if values.len() != table.dimension {
                return Err(BackendError::DimensionMismatch {
                    expected: table.dimension,
                    found: values.len(),
                });
            }
            let e = Embedding::new(values).map_err(|e| BackendError::Fixture(format!("'{text}': {e}")))?;
            vectors.insert(text, e);
        }
        Ok(Self {
            table: vectors,
            dimension: table.dimension,
            calls: Mutex::new(0),
        })
    }

    /// Embedder with no table entries: every text uses the hash fallback.
    pub fn hashed(dimension: usize) -> Self {
        Self::new(EmbeddingTable::empty(dimension)).expect("empty table is valid for positive dimension")
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn calls(&self) -> usize {
        *self.calls.lock().expect("embedder state poisoned")
    }

    pub fn lookup(&self, text: &str) -> Embedding {
        self.table
            .get(text)
            .cloned()
            .unwrap_or_else(|| hashed_unit_vector(text, self.dimension))
    }
}

#[async_trait]
impl EmbedBackend for ScriptedEmbedder {
    async fn embed(&self, texts: &[String]) -> Result<Vec<Embedding>, BackendError> {
        check_embed_inputs(texts)?;
        *self.calls.lock().expect("embedder state poisoned") += 1;
        let out: Vec<Embedding> = texts.iter().map(|t| self.lookup(t)).collect();
        check_uniform_dim(&out)?;
        Ok(out)
    }
}

/// Unit vector derived from the SHA-256 of `text`.
pub fn hashed_unit_vector(text: &str, dimension: usize) -> Embedding {
    let digest = Sha256::digest(text.as_bytes());
    let mut seed = [0u8; 32];
    seed.copy_from_slice(&digest);
    let mut rng = ChaCha8Rng::from_seed(seed);
    loop {
        let values: Vec<f64> = (0..dimension).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 1e-9 {
            let unit = values.into_iter().map(|v| v / norm).collect();
            return Embedding::new(unit).expect("finite unit vector");
        }
    }
}
