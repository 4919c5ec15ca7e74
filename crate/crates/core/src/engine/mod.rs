//! The inquiry control loop: estimate uncertainty, ask clarifying questions
//! when it is high, fold the feedback into the query, and answer.

mod channel;
mod questions;
pub mod templates;

use std::sync::Arc;

use thiserror::Error;

use crate::backends::{BackendError, ChatBackend, ChatRequest, EmbedBackend};
use crate::model::{
    AnswerSample, AugmentedQuery, ClarifyingQuestion, Embedding, FeedbackItem, InquiryConfig, InquiryRound,
    ModelError, SessionRecord, UserQuery,
};
use crate::selection::{self, SelectionError};
use crate::uncertainty::{self, UncertaintyError};

pub use channel::{ChannelError, OracleChannel, SessionObserver, StaticChannel, UserChannel};
pub use questions::parse_question_list;
pub use templates::{PromptTemplateSet, Template, TemplateError};

/// Appended to the question-generation prompt when the first reply had no
/// parseable questions.
pub const QUESTION_FORMAT_REMINDER: &str =
    "\n\nReply ONLY with the numbered list, one question per line, for example:\n1. <first question>?\n2. <second question>?";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EngineError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Uncertainty(#[from] UncertaintyError),
    #[error(transparent)]
    Selection(#[from] SelectionError),
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error("no clarifying questions could be parsed from the model output")]
    NoQuestionsParsed,
    #[error("expected {expected} feedback items, got {got}")]
    ArityMismatch { expected: usize, got: usize },
    #[error("precondition violated: {0}")]
    Precondition(String),
}

/// Appends one clarification round to `query`.
pub fn augment_query(
    query: &AugmentedQuery,
    selected: &[ClarifyingQuestion],
    feedback: &[FeedbackItem],
) -> Result<AugmentedQuery, EngineError> {
    if selected.is_empty() {
        return Err(EngineError::Precondition("a round needs at least one question".into()));
    }
    if selected.len() != feedback.len() {
        return Err(EngineError::ArityMismatch {
            expected: selected.len(),
            got: feedback.len(),
        });
    }
    if let Some(i) = selected.iter().zip(feedback).position(|(q, f)| q.text != f.question.text) {
        return Err(EngineError::Precondition(format!("feedback item {i} answers a different question")));
    }
    let mut next = query.clone();
    next.push_round(InquiryRound {
        questions: selected.to_vec(),
        feedback: feedback.to_vec(),
    });
    Ok(next)
}

/// Text after the last "Answer:" marker, or the whole reply when absent.
pub fn extract_final_answer(text: &str) -> String {
    match text.rfind("Answer:") {
        Some(i) => text[i + "Answer:".len()..].trim().to_string(),
        None => text.trim().to_string(),
    }
}

/// Chat and embedding backends plus the prompt set.
#[derive(Clone)]
pub struct Engine {
    chat: Arc<dyn ChatBackend>,
    embed: Arc<dyn EmbedBackend>,
    templates: Arc<PromptTemplateSet>,
}

impl Engine {
    pub fn new(chat: Arc<dyn ChatBackend>, embed: Arc<dyn EmbedBackend>) -> Self {
        Self::with_templates(chat, embed, Arc::new(PromptTemplateSet::default()))
    }

    pub fn with_templates(
        chat: Arc<dyn ChatBackend>,
        embed: Arc<dyn EmbedBackend>,
        templates: Arc<PromptTemplateSet>,
    ) -> Self {
        Self { chat, embed, templates }
    }

    pub fn templates(&self) -> &PromptTemplateSet {
        &self.templates
    }

    fn request(&self, prompt: String, temperature: f64, cfg: &InquiryConfig) -> ChatRequest {
        ChatRequest::user(prompt)
            .temperature(temperature)
            .top_p(cfg.top_p)
            .presence_penalty(cfg.presence_penalty)
    }

    async fn embed_texts(&self, texts: Vec<String>) -> Result<Vec<Embedding>, EngineError> {
        let out = self.embed.embed(&texts).await?;
        if out.len() != texts.len() {
            return Err(EngineError::Backend(BackendError::Malformed(format!(
                "embedder returned {} vectors for {} texts",
                out.len(),
                texts.len()
            ))));
        }
        Ok(out)
    }

    /// T answers to the current query at the sampling temperature, embedded.
    pub async fn sample_answers(
        &self,
        query: &AugmentedQuery,
        cfg: &InquiryConfig,
    ) -> Result<Vec<AnswerSample>, EngineError> {
        let prompt = self.templates.render_answer(query, false)?;
        let req = self.request(prompt, cfg.sample_temperature, cfg);
        let mut samples = uncertainty::sample_answers(self.chat.as_ref(), &req, cfg.t_samples).await?;
        // Empty replies still need a vector; embed a visible stand-in.
        let texts = samples
            .iter()
            .map(|s| if s.text.is_empty() { "(empty)".to_string() } else { s.text.clone() })
            .collect();
        let embeddings = self.embed_texts(texts).await?;
        for (s, e) in samples.iter_mut().zip(embeddings) {
            s.embedding = Some(if cfg.normalize_embeddings { e.normalized() } else { e });
        }
        Ok(samples)
    }

    /// Samples answers and returns their embedding variance.
    pub async fn estimate_uncertainty(&self, query: &AugmentedQuery, cfg: &InquiryConfig) -> Result<f64, EngineError> {
        let samples = self.sample_answers(query, cfg).await?;
        let embeddings: Vec<Embedding> = samples.into_iter().filter_map(|s| s.embedding).collect();
        Ok(uncertainty::answer_variance(&embeddings)?)
    }

    /// Asks the model for `n` clarifying questions, retrying once with a
    /// stricter format reminder if nothing parses.
    pub async fn generate_clarifying_questions(
        &self,
        query: &AugmentedQuery,
        n: usize,
        cfg: &InquiryConfig,
    ) -> Result<Vec<ClarifyingQuestion>, EngineError> {
        if n == 0 {
            return Err(EngineError::Precondition("n must be at least 1".into()));
        }
        let prompt = self.templates.render_generate_questions(query, n)?;
        for attempt in 0..2 {
            let p = if attempt == 0 {
                prompt.clone()
            } else {
                format!("{prompt}{QUESTION_FORMAT_REMINDER}")
            };
            let resp = self.chat.chat_complete(&self.request(p, cfg.sample_temperature, cfg)).await?;
            let mut parsed = parse_question_list(&resp.text);
            if !parsed.is_empty() {
                parsed.truncate(n);
                return Ok(parsed);
            }
            tracing::debug!(attempt, "no clarifying questions parsed");
        }
        Err(EngineError::NoQuestionsParsed)
    }

    /// Embeds the candidates (and the query, for similarity) and picks up to
    /// `cfg.m_select` of them.
    pub async fn select_questions(
        &self,
        query: &AugmentedQuery,
        candidates: Vec<ClarifyingQuestion>,
        cfg: &InquiryConfig,
        round: usize,
    ) -> Result<Vec<ClarifyingQuestion>, EngineError> {
        let mut texts: Vec<String> = candidates.iter().map(|q| q.text.clone()).collect();
        let with_query = cfg.strategy == crate::model::Strategy::Similarity;
        if with_query {
            texts.push(query.render());
        }
        let mut embeddings = self.embed_texts(texts).await?;
        let query_embedding = if with_query { embeddings.pop() } else { None };
        let candidates: Vec<ClarifyingQuestion> = candidates
            .into_iter()
            .zip(embeddings)
            .map(|(q, e)| q.with_embedding(e))
            .collect();
        let seed = selection::mix_seed(cfg.rng_seed, round as u64);
        Ok(selection::select(
            cfg.strategy,
            &candidates,
            query_embedding.as_ref(),
            cfg.m_select,
            seed,
        )?)
    }

    /// Final answer for the query in its current form.
    pub async fn answer(&self, query: &AugmentedQuery, cfg: &InquiryConfig) -> Result<String, EngineError> {
        let prompt = self.templates.render_answer(query, cfg.chain_of_thought)?;
        let resp = self
            .chat
            .chat_complete(&self.request(prompt, cfg.answer_temperature, cfg))
            .await?;
        Ok(if cfg.chain_of_thought {
            extract_final_answer(&resp.text)
        } else {
            resp.text.trim().to_string()
        })
    }

    /// Direct generation baseline: one deterministic call.
    pub async fn answer_direct(&self, query: &AugmentedQuery, cfg: &InquiryConfig) -> Result<String, EngineError> {
        let cfg = InquiryConfig {
            answer_temperature: 0.0,
            chain_of_thought: false,
            ..cfg.clone()
        };
        self.answer(query, &cfg).await
    }

    /// Chain-of-thought baseline: the answer prompt ends with the step-by-step
    /// trigger and the reply is cut after its last "Answer:" marker.
    pub async fn answer_cot(&self, query: &AugmentedQuery, cfg: &InquiryConfig) -> Result<String, EngineError> {
        let cfg = InquiryConfig {
            answer_temperature: 0.0,
            chain_of_thought: true,
            ..cfg.clone()
        };
        self.answer(query, &cfg).await
    }

    /// Runs a full inquiry for `query` under a fresh random session id.
    pub async fn run_inquiry(&self, channel: &dyn UserChannel, query: UserQuery, cfg: &InquiryConfig) -> SessionRecord {
        self.run_session(channel, SessionRecord::with_random_id(query), cfg, &())
            .await
    }

    /// Drives `session` from `Created` to `Completed` or `Failed`. The
    /// observer sees every state change; no lock is held while the channel
    /// waits for feedback.
    pub async fn run_session(
        &self,
        channel: &dyn UserChannel,
        mut session: SessionRecord,
        cfg: &InquiryConfig,
        observer: &dyn SessionObserver,
    ) -> SessionRecord {
        if let Err(e) = self.drive(channel, &mut session, cfg, observer).await {
            tracing::warn!(session = session.session_id(), error = %e, "inquiry failed");
            session.fail(e.to_string());
            observer.on_update(&session);
        }
        session
    }

    async fn drive(
        &self,
        channel: &dyn UserChannel,
        session: &mut SessionRecord,
        cfg: &InquiryConfig,
        observer: &dyn SessionObserver,
    ) -> Result<(), EngineError> {
        let cfg = cfg.clone().validate()?;
        let demos = session.query().base().demonstrations().len();
        if demos != cfg.demonstrations {
            return Err(EngineError::Precondition(format!(
                "query carries {demos} demonstrations but the configuration expects {}",
                cfg.demonstrations
            )));
        }
        session.begin_estimating()?;
        observer.on_update(session);

        loop {
            let variance = self.estimate_uncertainty(session.query(), &cfg).await?;
            session.record_variance(variance);
            observer.on_update(session);

            let rounds = session.rounds();
            if !uncertainty::should_inquire(variance, cfg.delta) || rounds >= cfg.max_iterations {
                let answer = self.answer(session.query(), &cfg).await?;
                session.complete(answer)?;
                observer.on_update(session);
                return Ok(());
            }

            let candidates = self
                .generate_clarifying_questions(session.query(), cfg.n_candidates, &cfg)
                .await?;
            let selected = self.select_questions(session.query(), candidates, &cfg, rounds).await?;
            if selected.is_empty() {
                return Err(EngineError::NoQuestionsParsed);
            }
            session.await_feedback(selected.clone())?;
            observer.on_update(session);

            let feedback = channel.ask(&selected).await?;
            let augmented = augment_query(session.query(), &selected, &feedback)?;
            let round = augmented.rounds().last().cloned().expect("round just appended");
            session.push_round(round);
            session.begin_estimating()?;
            observer.on_update(session);
        }
    }
}
