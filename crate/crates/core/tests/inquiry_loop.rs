use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use async_trait::async_trait;
use inquest_core::backends::{EmbeddingTable, FixtureRule, ScriptedChat, ScriptedEmbedder, ScriptedFixture};
use inquest_core::engine::{ChannelError, StaticChannel};
use inquest_core::{
    ClarifyingQuestion, Engine, FeedbackItem, InquiryConfig, SessionRecord, SessionState, Strategy, UserChannel,
    UserQuery,
};

const GENERATE: &str = "numbered clarifying questions";

#[derive(Default)]
struct CountingChannel {
    calls: AtomicUsize,
    seen: Mutex<Vec<String>>,
}

#[async_trait]
impl UserChannel for CountingChannel {
    async fn ask(&self, questions: &[ClarifyingQuestion]) -> Result<Vec<FeedbackItem>, ChannelError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        self.seen.lock().unwrap().extend(questions.iter().map(|q| q.text.clone()));
        Ok(questions.iter().map(|q| FeedbackItem::new(q.clone(), "in 2019")).collect())
    }
}

fn config(strategy: Strategy) -> InquiryConfig {
    InquiryConfig {
        demonstrations: 0,
        strategy,
        ..InquiryConfig::default()
    }
}

fn query() -> UserQuery {
    UserQuery::new("Who won the cup?", vec![]).unwrap()
}

fn divergent_chat(question_list: &str) -> Arc<ScriptedChat> {
    Arc::new(ScriptedChat::new(ScriptedFixture::new(
        vec![
            FixtureRule::contains(GENERATE, &[question_list]),
            FixtureRule::contains("Who won the cup?", &["Ajax", "Celtic", "Porto", "Benfica", "Milan"]),
        ],
        "unused",
    )))
}

#[tokio::test]
async fn zero_variance_answers_directly() {
    let chat = Arc::new(ScriptedChat::constant("Paris"));
    let channel = CountingChannel::default();
    let engine = Engine::new(chat.clone(), Arc::new(ScriptedEmbedder::hashed(8)));
    let cfg = config(Strategy::Diversity);
    let done = engine.run_inquiry(&channel, query(), &cfg).await;
    assert_eq!(done.state(), SessionState::Completed);
    assert_eq!(done.final_answer(), Some("Paris"));
    assert_eq!(chat.calls(), cfg.t_samples + 1);
    assert_eq!(channel.calls.load(Ordering::SeqCst), 0);
    assert_eq!(done.variance_history(), &[0.0]);
}

async fn run_divergent(list: &str, strategy: Strategy) -> (Arc<ScriptedChat>, CountingChannel, SessionRecord) {
    let chat = divergent_chat(list);
    let channel = CountingChannel::default();
    let engine = Engine::new(chat.clone(), Arc::new(ScriptedEmbedder::hashed(8)));
    let done = engine.run_inquiry(&channel, query(), &config(strategy)).await;
    (chat, channel, done)
}

#[tokio::test]
async fn divergent_single_iteration() {
    let five = "1. Which cup?\n2. Which year?\n3. Men or women?\n4. Which country?\n5. Which level?";
    for strategy in [Strategy::Diversity, Strategy::Similarity, Strategy::Random] {
        let (chat, channel, done) = run_divergent(five, strategy).await;
        assert_eq!(done.state(), SessionState::Completed, "{strategy}: {:?}", done.error());
        assert_eq!(chat.calls_containing(GENERATE), 1);
        assert_eq!(channel.calls.load(Ordering::SeqCst), 1);
        assert_eq!(done.surfaced_questions().len(), 3);
        assert_eq!(channel.seen.lock().unwrap().len(), 3);
        let log = chat.request_log();
        let final_calls = log.iter().filter(|r| r.temperature == 0.0).count();
        assert_eq!(final_calls, 1);
        // T samples, one generation, T samples on the augmented query, one answer.
        assert_eq!(log.len(), 2 * 5 + 2);
        let last = log.last().unwrap().last_user_content().to_string();
        assert!(last.contains("in 2019"), "final prompt lacks feedback: {last}");
        assert_eq!(done.rounds(), 1);
        assert_eq!(done.variance_history().len(), 2);
    }
}

#[tokio::test]
async fn fewer_parsed_than_m_surfaces_all() {
    let (chat, _, done) = run_divergent("1. Which cup?\n2. Which year?", Strategy::Diversity).await;
    assert_eq!(done.state(), SessionState::Completed);
    assert_eq!(done.surfaced_questions().len(), 2);
    assert_eq!(chat.calls_containing(GENERATE), 1);
}

#[tokio::test]
async fn unparseable_generation_retries_once_then_fails() {
    let (chat, channel, done) = run_divergent("I cannot think of any.", Strategy::Diversity).await;
    assert_eq!(done.state(), SessionState::Failed);
    assert_eq!(chat.calls_containing(GENERATE), 2);
    assert_eq!(channel.calls.load(Ordering::SeqCst), 0);
}

async fn run_two_valued(delta: f64) -> (SessionRecord, usize) {
    // Embeddings 0 and 0.1 alternate over five samples: 0, 0.1, 0, 0.1, 0.
    let table = EmbeddingTable::empty(1).with("x", vec![0.0]).with("y", vec![0.1]);
    let chat = Arc::new(ScriptedChat::new(ScriptedFixture::new(
        vec![
            FixtureRule::contains(GENERATE, &["1. Which cup?"]),
            FixtureRule::contains("Who won", &["x", "y"]),
        ],
        "unused",
    )));
    let engine = Engine::new(chat, Arc::new(ScriptedEmbedder::new(table).unwrap()));
    let channel = CountingChannel::default();
    let cfg = InquiryConfig {
        delta,
        ..config(Strategy::Diversity)
    };
    let done = engine.run_inquiry(&channel, query(), &cfg).await;
    let calls = channel.calls.load(Ordering::SeqCst);
    (done, calls)
}

#[tokio::test]
async fn variance_at_threshold_answers_directly() {
    let (probe, _) = run_two_valued(1.0).await;
    let v = probe.variance_history()[0];
    // Mean 0.04; squared deviations 3 × 0.0016 + 2 × 0.0036 = 0.012; / (T − 1).
    assert!((v - 0.003).abs() < 1e-15, "{v}");

    let (done, calls) = run_two_valued(v).await;
    assert_eq!(calls, 0);
    assert_eq!(done.state(), SessionState::Completed);

    let (done, calls) = run_two_valued(v - 1e-6).await;
    assert_eq!(calls, 1);
    assert_eq!(done.rounds(), 1);
}

#[tokio::test]
async fn skipped_answers_are_marked() {
    let five = "1. Which cup?\n2. Which year?\n3. Men or women?";
    let chat = divergent_chat(five);
    let engine = Engine::new(chat.clone(), Arc::new(ScriptedEmbedder::hashed(8)));
    let done = engine.run_inquiry(&StaticChannel(vec![]), query(), &config(Strategy::Random)).await;
    assert_eq!(done.state(), SessionState::Completed);
    let last = chat.request_log().last().unwrap().last_user_content().to_string();
    assert!(last.contains("(no answer provided)"));
}

#[tokio::test]
async fn demonstration_count_must_match() {
    let engine = Engine::new(Arc::new(ScriptedChat::constant("x")), Arc::new(ScriptedEmbedder::hashed(4)));
    let cfg = InquiryConfig::default();
    let done = engine.run_inquiry(&StaticChannel(vec![]), query(), &cfg).await;
    assert_eq!(done.state(), SessionState::Failed);
    assert!(done.error().unwrap().contains("demonstrations"));
}
