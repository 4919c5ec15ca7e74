//! Domain types shared by every stage of an inquiry: queries, embeddings,
//! clarifying questions, feedback, configuration and the session record.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Label substituted for a skipped clarifying question when the augmented
/// query is rendered.
pub const NO_ANSWER_LABEL: &str = "(no answer provided)";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("query text must not be empty")]
    EmptyQuery,
    #[error("embedding must have at least one dimension")]
    EmptyEmbedding,
    #[error("embedding component {index} is not finite")]
    NonFiniteEmbedding { index: usize },
    #[error("clarifying question text must not be empty")]
    EmptyQuestion,
    #[error("invalid configuration: {}", .0.join("; "))]
    InvalidConfig(Vec<String>),
    #[error("illegal session transition {from} -> {to}")]
    IllegalTransition { from: SessionState, to: SessionState },
    #[error("malformed transcript: {0}")]
    Transcript(String),
}

/// An exemplar question/answer pair shown to the model before the query.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Demonstration {
    pub question: String,
    pub answer: String,
}

impl Demonstration {
    pub fn new(question: impl Into<String>, answer: impl Into<String>) -> Self {
        Self {
            question: question.into(),
            answer: answer.into(),
        }
    }
}

/// The user's original query plus the in-context demonstrations that
/// accompany it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserQuery {
    text: String,
    #[serde(default)]
    demonstrations: Vec<Demonstration>,
}

impl UserQuery {
    pub fn new(text: impl Into<String>, demonstrations: Vec<Demonstration>) -> Result<Self, ModelError> {
        let text = text.into();
        if text.trim().is_empty() {
            return Err(ModelError::EmptyQuery);
        }
        Ok(Self {
            text,
            demonstrations,
        })
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn demonstrations(&self) -> &[Demonstration] {
        &self.demonstrations
    }
}

/// Fixed-dimension real vector with finite entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Embedding(Vec<f64>);

impl Embedding {
    pub fn new(values: Vec<f64>) -> Result<Self, ModelError> {
        if values.is_empty() {
            return Err(ModelError::EmptyEmbedding);
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(ModelError::NonFiniteEmbedding { index });
        }
        Ok(Self(values))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Returns a unit-length copy, or the vector unchanged when its norm is zero.
    pub fn normalized(&self) -> Self {
        let norm = self.norm();
        if norm == 0.0 {
            return self.clone();
        }
        Self(self.0.iter().map(|v| v / norm).collect())
    }
}

impl TryFrom<Vec<f64>> for Embedding {
    type Error = ModelError;

    fn try_from(values: Vec<f64>) -> Result<Self, Self::Error> {
        Self::new(values)
    }
}

impl From<Embedding> for Vec<f64> {
    fn from(e: Embedding) -> Self {
        e.0
    }
}

/// One of the T answers sampled while estimating uncertainty.
#[derive(Debug, Clone, PartialEq)]
pub struct AnswerSample {
    pub text: String,
    pub index: usize,
    pub embedding: Option<Embedding>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClarifyingQuestion {
    pub text: String,
    pub origin_index: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embedding: Option<Embedding>,
}

impl ClarifyingQuestion {
    pub fn new(text: impl Into<String>, origin_index: usize) -> Result<Self, ModelError> {
        let text = text.into();
        if text.trim().is_empty() {
            return Err(ModelError::EmptyQuestion);
        }
        Ok(Self {
            text,
            origin_index,
            embedding: None,
        })
    }

    pub fn with_embedding(mut self, embedding: Embedding) -> Self {
        self.embedding = Some(embedding);
        self
    }
}

/// A user's reply to one surfaced question. An empty answer means the user
/// skipped the question.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedbackItem {
    pub question: ClarifyingQuestion,
    pub answer_text: String,
}

impl FeedbackItem {
    pub fn new(question: ClarifyingQuestion, answer_text: impl Into<String>) -> Self {
        Self {
            question,
            answer_text: answer_text.into(),
        }
    }

    pub fn is_skipped(&self) -> bool {
        self.answer_text.trim().is_empty()
    }

    /// Answer text as it appears in a rendered prompt.
    pub fn display_answer(&self) -> &str {
        if self.is_skipped() {
            NO_ANSWER_LABEL
        } else {
            &self.answer_text
        }
    }
}

/// Questions surfaced in a single inquiry round together with the feedback.
#[derive(Debug, Clone, PartialEq)]
pub struct InquiryRound {
    pub questions: Vec<ClarifyingQuestion>,
    pub feedback: Vec<FeedbackItem>,
}

/// The original query extended with every clarification round so far.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedQuery {
    base: UserQuery,
    rounds: Vec<InquiryRound>,
}

impl AugmentedQuery {
    pub fn new(base: UserQuery) -> Self {
        Self {
            base,
            rounds: Vec::new(),
        }
    }

    pub(crate) fn from_parts(base: UserQuery, rounds: Vec<InquiryRound>) -> Self {
        Self { base, rounds }
    }

    pub fn base(&self) -> &UserQuery {
        &self.base
    }

    pub fn rounds(&self) -> &[InquiryRound] {
        &self.rounds
    }

    pub(crate) fn push_round(&mut self, round: InquiryRound) {
        self.rounds.push(round);
    }

    /// All clarification lines, numbered continuously across rounds in
    /// chronological order. Empty when no round has happened.
    pub fn render_clarifications(&self) -> String {
        let mut lines = Vec::new();
        let mut n = 0;
        for round in &self.rounds {
            for item in &round.feedback {
                n += 1;
                lines.push(format!(
                    "Clarification {n} — Q: {} A: {}",
                    item.question.text,
                    item.display_answer()
                ));
            }
        }
        lines.join("\n")
    }

    /// The base query text followed by the clarification block.
    pub fn render(&self) -> String {
        let qa = self.render_clarifications();
        if qa.is_empty() {
            self.base.text.clone()
        } else {
            format!("{}\n{}", self.base.text, qa)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Similarity,
    Diversity,
    Random,
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Strategy::Similarity => "similarity",
            Strategy::Diversity => "diversity",
            Strategy::Random => "random",
        })
    }
}

impl std::str::FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "similarity" => Ok(Strategy::Similarity),
            "diversity" => Ok(Strategy::Diversity),
            "random" => Ok(Strategy::Random),
            other => Err(format!("unknown strategy '{other}'")),
        }
    }
}

/// Knobs for one inquiry run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InquiryConfig {
    /// Active-inquiry threshold on the answer-embedding variance.
    pub delta: f64,
    /// Number of answers sampled for uncertainty estimation.
    pub t_samples: usize,
    /// Number of candidate clarifying questions requested.
    pub n_candidates: usize,
    /// Number of questions surfaced to the user per round.
    pub m_select: usize,
    pub strategy: Strategy,
    pub sample_temperature: f64,
    pub answer_temperature: f64,
    pub max_iterations: usize,
    pub rng_seed: u64,
    pub top_p: f64,
    pub presence_penalty: f64,
    /// Number of in-context demonstrations each query carries.
    pub demonstrations: usize,
    /// L2-normalize answer embeddings before computing the variance.
    pub normalize_embeddings: bool,
    /// Use the step-by-step prompt for the final answer.
    pub chain_of_thought: bool,
}

impl Default for InquiryConfig {
    fn default() -> Self {
        Self {
            delta: 0.005,
            t_samples: 5,
            n_candidates: 10,
            m_select: 3,
            strategy: Strategy::Diversity,
            sample_temperature: 0.5,
            answer_temperature: 0.0,
            max_iterations: 1,
            rng_seed: 0,
            top_p: 1.0,
            presence_penalty: 1.0,
            demonstrations: 2,
            normalize_embeddings: false,
            chain_of_thought: false,
        }
    }
}

impl InquiryConfig {
    /// Checks every invariant and reports all violations at once.
    pub fn validate(self) -> Result<Self, ModelError> {
        let mut errors = Vec::new();
        if !self.delta.is_finite() || self.delta < 0.0 {
            errors.push(format!("delta must be a non-negative number (got {})", self.delta));
        }
        if self.t_samples < 2 {
            errors.push(format!(
                "t_samples must be ≥ 2 since the variance divides by T−1 (got {})",
                self.t_samples
            ));
        }
        if self.n_candidates < 1 {
            errors.push("n_candidates must be ≥ 1".to_string());
        }
        if self.m_select < 1 {
            errors.push("m_select must be ≥ 1".to_string());
        }
        if self.m_select > self.n_candidates {
            errors.push(format!(
                "m_select exceeds n_candidates ({} > {})",
                self.m_select, self.n_candidates
            ));
        }
        for (name, t) in [
            ("sample_temperature", self.sample_temperature),
            ("answer_temperature", self.answer_temperature),
        ] {
            if !(0.0..=2.0).contains(&t) {
                errors.push(format!("{name} must lie in [0, 2] (got {t})"));
            }
        }
        if self.max_iterations < 1 {
            errors.push("max_iterations must be ≥ 1".to_string());
        }
        if !self.top_p.is_finite() || self.top_p <= 0.0 || self.top_p > 1.0 {
            errors.push(format!("top_p must lie in (0, 1] (got {})", self.top_p));
        }
        if !self.presence_penalty.is_finite() {
            errors.push("presence_penalty must be finite".to_string());
        }
        if errors.is_empty() {
            Ok(self)
        } else {
            Err(ModelError::InvalidConfig(errors))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SessionState {
    Created,
    Estimating,
    AwaitingFeedback,
    Completed,
    Failed,
}

impl SessionState {
    pub fn can_transition_to(self, next: SessionState) -> bool {
        use SessionState::*;
        matches!(
            (self, next),
            (Created, Estimating)
                | (Estimating, AwaitingFeedback)
                | (Estimating, Completed)
                | (AwaitingFeedback, Estimating)
                | (AwaitingFeedback, Completed)
                | (_, Failed)
        )
    }

    pub fn is_terminal(self) -> bool {
        matches!(self, SessionState::Completed | SessionState::Failed)
    }
}

impl fmt::Display for SessionState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// Lifecycle and transcript of one query.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionRecord {
    session_id: String,
    state: SessionState,
    query: AugmentedQuery,
    variance_history: Vec<f64>,
    surfaced_questions: Vec<ClarifyingQuestion>,
    pending_questions: Vec<ClarifyingQuestion>,
    final_answer: Option<String>,
    error: Option<String>,
}

impl SessionRecord {
    pub fn new(session_id: impl Into<String>, query: UserQuery) -> Self {
        Self {
            session_id: session_id.into(),
            state: SessionState::Created,
            query: AugmentedQuery::new(query),
            variance_history: Vec::new(),
            surfaced_questions: Vec::new(),
            pending_questions: Vec::new(),
            final_answer: None,
            error: None,
        }
    }

    /// New record with a random 128-bit hex identifier.
    pub fn with_random_id(query: UserQuery) -> Self {
        Self::new(random_session_id(), query)
    }

    pub fn session_id(&self) -> &str {
        &self.session_id
    }

    pub fn state(&self) -> SessionState {
        self.state
    }

    pub fn query(&self) -> &AugmentedQuery {
        &self.query
    }

    pub fn variance_history(&self) -> &[f64] {
        &self.variance_history
    }

    pub fn surfaced_questions(&self) -> &[ClarifyingQuestion] {
        &self.surfaced_questions
    }

    /// Questions waiting for an answer; non-empty only while awaiting feedback.
    pub fn pending_questions(&self) -> &[ClarifyingQuestion] {
        &self.pending_questions
    }

    pub fn final_answer(&self) -> Option<&str> {
        self.final_answer.as_deref()
    }

    pub fn error(&self) -> Option<&str> {
        self.error.as_deref()
    }

    pub fn rounds(&self) -> usize {
        self.query.rounds().len()
    }

    fn transition(&mut self, next: SessionState) -> Result<(), ModelError> {
        if !self.state.can_transition_to(next) {
            return Err(ModelError::IllegalTransition {
                from: self.state,
                to: next,
            });
        }
        self.state = next;
        Ok(())
    }

    /// Enter `Estimating`, from `Created` or after feedback arrived.
    pub fn begin_estimating(&mut self) -> Result<(), ModelError> {
        self.transition(SessionState::Estimating)?;
        self.pending_questions.clear();
        Ok(())
    }

    pub fn record_variance(&mut self, variance: f64) {
        self.variance_history.push(variance);
    }

    pub fn await_feedback(&mut self, questions: Vec<ClarifyingQuestion>) -> Result<(), ModelError> {
        self.transition(SessionState::AwaitingFeedback)?;
        self.surfaced_questions.extend(questions.iter().cloned());
        self.pending_questions = questions;
        Ok(())
    }

    pub(crate) fn push_round(&mut self, round: InquiryRound) {
        self.query.push_round(round);
    }

    pub fn complete(&mut self, answer: impl Into<String>) -> Result<(), ModelError> {
        self.transition(SessionState::Completed)?;
        self.pending_questions.clear();
        self.final_answer = Some(answer.into());
        Ok(())
    }

    pub fn fail(&mut self, message: impl Into<String>) {
        // Failed is reachable from every state.
        self.state = SessionState::Failed;
        self.pending_questions.clear();
        self.final_answer = None;
        self.error = Some(message.into());
    }

    /// Canonical JSON transcript of the session.
    pub fn render_transcript(&self) -> String {
        serde_json::to_string_pretty(&Transcript::from(self))
            .expect("transcript serialization is infallible")
    }

    pub fn parse_transcript(text: &str) -> Result<Self, ModelError> {
        let t: Transcript =
            serde_json::from_str(text).map_err(|e| ModelError::Transcript(e.to_string()))?;
        t.try_into()
    }

    pub fn to_transcript_value(&self) -> serde_json::Value {
        serde_json::to_value(Transcript::from(self)).expect("transcript serialization is infallible")
    }
}

pub fn random_session_id() -> String {
    format!("{:032x}", rand::random::<u128>())
}

#[derive(Serialize, Deserialize)]
struct TranscriptRound {
    questions: Vec<ClarifyingQuestion>,
    answers: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct Transcript {
    session_id: String,
    state: SessionState,
    base_query: String,
    #[serde(default)]
    demonstrations: Vec<Demonstration>,
    rounds: Vec<TranscriptRound>,
    variances: Vec<f64>,
    final_answer: Option<String>,
    #[serde(default)]
    surfaced_questions: Vec<ClarifyingQuestion>,
    #[serde(default)]
    pending_questions: Vec<ClarifyingQuestion>,
    #[serde(default)]
    error: Option<String>,
}

impl From<&SessionRecord> for Transcript {
    fn from(s: &SessionRecord) -> Self {
        Self {
            session_id: s.session_id.clone(),
            state: s.state,
            base_query: s.query.base.text.clone(),
            demonstrations: s.query.base.demonstrations.clone(),
            rounds: s
                .query
                .rounds
                .iter()
                .map(|r| TranscriptRound {
                    questions: r.questions.clone(),
                    answers: r.feedback.iter().map(|f| f.answer_text.clone()).collect(),
                })
                .collect(),
            variances: s.variance_history.clone(),
            final_answer: s.final_answer.clone(),
            surfaced_questions: s.surfaced_questions.clone(),
            pending_questions: s.pending_questions.clone(),
            error: s.error.clone(),
        }
    }
}

impl TryFrom<Transcript> for SessionRecord {
    type Error = ModelError;

    fn try_from(t: Transcript) -> Result<Self, Self::Error> {
        let base = UserQuery::new(t.base_query, t.demonstrations)
            .map_err(|e| ModelError::Transcript(e.to_string()))?;
        let mut rounds = Vec::with_capacity(t.rounds.len());
        for (i, r) in t.rounds.into_iter().enumerate() {
            if r.questions.len() != r.answers.len() {
                return Err(ModelError::Transcript(format!(
                    "round {i} has {} questions but {} answers",
                    r.questions.len(),
                    r.answers.len()
                )));
            }
            let feedback = r
                .questions
                .iter()
                .cloned()
                .zip(r.answers)
                .map(|(q, a)| FeedbackItem::new(q, a))
                .collect();
            rounds.push(InquiryRound {
                questions: r.questions,
                feedback,
            });
        }
        if (t.state == SessionState::Completed) != t.final_answer.is_some() {
            return Err(ModelError::Transcript(
                "final_answer must be present exactly when the state is Completed".into(),
            ));
        }
        Ok(SessionRecord {
            session_id: t.session_id,
            state: t.state,
            query: AugmentedQuery::from_parts(base, rounds),
            variance_history: t.variances,
            surfaced_questions: t.surfaced_questions,
            pending_questions: t.pending_questions,
            final_answer: t.final_answer,
            error: t.error,
        })
    }
}
