//! Experiment runner: evaluates each enabled method on every dataset record
//! and aggregates the scores.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use futures::stream::{self, StreamExt};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::dataset::{load_dataset, AnswerType, DatasetRecord};
use super::judge::{judge_accuracy, pairwise_judge, PairwiseVerdict};
use super::mask::mask_context;
use super::metrics::{canonical_boolean, exact_match, f1_score};
use super::report::{ExperimentReport, MethodOutcome, MethodRow, PairwiseSummary, RecordOutcome, SweepReport, SweepRow};
use super::EvalError;
use crate::backends::openai::{ENV_API_KEY, ENV_BASE_URL, ENV_CHAT_MODEL, ENV_EMBED_MODEL};
use crate::backends::{ChatSource, EmbedSource, EmbeddingTable, OpenAiClient, OpenAiSettings, ScriptedFixture};
use crate::engine::{Engine, OracleChannel, PromptTemplateSet};
use crate::model::{AugmentedQuery, Demonstration, InquiryConfig, SessionRecord, Strategy, UserQuery};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Dg,
    Cot,
    Lamai,
    LamaiCot,
}

impl Method {
    pub fn label(self) -> &'static str {
        match self {
            Method::Dg => "DG",
            Method::Cot => "CoT",
            Method::Lamai => "LaMAI",
            Method::LamaiCot => "LaMAI+CoT",
        }
    }

    pub fn inquires(self) -> bool {
        matches!(self, Method::Lamai | Method::LamaiCot)
    }

    fn chain_of_thought(self) -> bool {
        matches!(self, Method::Cot | Method::LamaiCot)
    }
}

/// A chat backend, either scripted from a fixture file or live.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum BackendSpec {
    Scripted {
        fixture: PathBuf,
    },
    Openai {
        #[serde(default)]
        base_url: Option<String>,
        #[serde(default)]
        model: Option<String>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum EmbedSpec {
    Scripted {
        #[serde(default)]
        table: Option<PathBuf>,
        #[serde(default = "default_dimension")]
        dimension: usize,
    },
    Openai {
        #[serde(default)]
        base_url: Option<String>,
        #[serde(default)]
        model: Option<String>,
    },
}

fn default_dimension() -> usize {
    8
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackendsConfig {
    pub chat: BackendSpec,
    pub embed: EmbedSpec,
    /// Pseudo-user holding the supporting facts; defaults to `chat`.
    #[serde(default)]
    pub oracle: Option<BackendSpec>,
    #[serde(default)]
    pub judge: Option<BackendSpec>,
}

/// Command-line overrides for live backends; they win over the
/// environment and the config file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LiveOverrides {
    pub base_url: Option<String>,
    pub chat_model: Option<String>,
    pub embed_model: Option<String>,
}

/// Grid axes. An empty axis keeps the base configuration's value.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepAxes {
    pub delta: Vec<f64>,
    pub m_select: Vec<usize>,
    pub strategy: Vec<Strategy>,
    pub mask_rate: Vec<f64>,
}

impl SweepAxes {
    pub fn is_empty(&self) -> bool {
        self.delta.is_empty() && self.m_select.is_empty() && self.strategy.is_empty() && self.mask_rate.is_empty()
    }
}

fn default_methods() -> Vec<Method> {
    vec![Method::Dg, Method::Lamai]
}

fn default_concurrency() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub dataset: PathBuf,
    #[serde(default = "default_methods")]
    pub methods: Vec<Method>,
    #[serde(default)]
    pub inquiry: InquiryConfig,
    pub backends: BackendsConfig,
    #[serde(default)]
    pub mask_rate: f64,
    #[serde(default)]
    pub seed: u64,
    /// Records evaluated at once. Left out of the report snapshot since it
    /// never changes results.
    #[serde(default = "default_concurrency", skip_serializing)]
    pub concurrency: usize,
    /// JSONL file in dataset format used as the demonstration pool;
    /// defaults to the dataset itself.
    #[serde(default)]
    pub demonstrations_file: Option<PathBuf>,
    #[serde(default)]
    pub templates: Option<PathBuf>,
    #[serde(default)]
    pub pairwise: bool,
    #[serde(default)]
    pub limit: Option<usize>,
    #[serde(default, skip_serializing_if = "SweepAxes::is_empty")]
    pub sweep: SweepAxes,
    #[serde(skip)]
    pub overrides: LiveOverrides,
}

fn resolve(base: &Path, p: &mut PathBuf) {
    if p.is_relative() {
        *p = base.join(&*p);
    }
}

fn resolve_spec(base: &Path, spec: &mut BackendSpec) {
    if let BackendSpec::Scripted { fixture } = spec {
        resolve(base, fixture);
    }
}

impl ExperimentConfig {
    /// Parses a config; relative paths are taken relative to `base_dir`.
    pub fn from_json(text: &str, base_dir: &Path) -> Result<Self, EvalError> {
        let mut cfg: Self = serde_json::from_str(text).map_err(|e| EvalError::Config(e.to_string()))?;
        resolve(base_dir, &mut cfg.dataset);
        for p in [&mut cfg.demonstrations_file, &mut cfg.templates].into_iter().flatten() {
            resolve(base_dir, p);
        }
        resolve_spec(base_dir, &mut cfg.backends.chat);
        for spec in [&mut cfg.backends.oracle, &mut cfg.backends.judge].into_iter().flatten() {
            resolve_spec(base_dir, spec);
        }
        if let EmbedSpec::Scripted { table: Some(t), .. } = &mut cfg.backends.embed {
            resolve(base_dir, t);
        }
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, EvalError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| EvalError::Io {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        Self::from_json(&text, path.parent().unwrap_or(Path::new(".")))
    }
}

/// Seed for one record: the first eight bytes of SHA-256 over the global
/// seed and the record id.
pub fn record_seed(global_seed: u64, record_id: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(global_seed.to_le_bytes());
    h.update(record_id.as_bytes());
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("digest has at least 8 bytes"))
}

#[derive(Clone, Copy)]
enum Role {
    Chat,
    Embed,
    Aux,
}

fn live_settings(base_url: &Option<String>, model: &Option<String>, role: Role, o: &LiveOverrides) -> OpenAiSettings {
    let env = |k: &str| std::env::var(k).ok().filter(|v| !v.is_empty());
    let mut s = OpenAiSettings::default();
    if let Some(u) = base_url {
        s.base_url = u.clone();
    }
    if let Some(m) = model {
        s.chat_model = m.clone();
        s.embed_model = m.clone();
    }
    if let Some(u) = env(ENV_BASE_URL) {
        s.base_url = u;
    }
    s.api_key = env(ENV_API_KEY);
    match role {
        Role::Chat => {
            if let Some(m) = env(ENV_CHAT_MODEL) {
                s.chat_model = m;
            }
            if let Some(m) = &o.chat_model {
                s.chat_model = m.clone();
            }
        }
        Role::Embed => {
            if let Some(m) = env(ENV_EMBED_MODEL) {
                s.embed_model = m;
            }
            if let Some(m) = &o.embed_model {
                s.embed_model = m.clone();
            }
        }
        Role::Aux => {}
    }
    if let Some(u) = &o.base_url {
        s.base_url = u.clone();
    }
    s
}

fn chat_source(spec: &BackendSpec, role: Role, o: &LiveOverrides) -> Result<ChatSource, EvalError> {
    Ok(match spec {
        BackendSpec::Scripted { fixture } => ChatSource::Scripted(ScriptedFixture::load(fixture)?),
        BackendSpec::Openai { base_url, model } => {
            ChatSource::Shared(Arc::new(OpenAiClient::new(live_settings(base_url, model, role, o))?))
        }
    })
}

fn embed_source(spec: &EmbedSpec, o: &LiveOverrides) -> Result<EmbedSource, EvalError> {
    Ok(match spec {
        EmbedSpec::Scripted { table: Some(path), .. } => EmbedSource::Scripted(EmbeddingTable::load(path)?),
        EmbedSpec::Scripted { table: None, dimension } => EmbedSource::Scripted(EmbeddingTable::empty(*dimension)),
        EmbedSpec::Openai { base_url, model } => {
            EmbedSource::Shared(Arc::new(OpenAiClient::new(live_settings(base_url, model, Role::Embed, o))?))
        }
    })
}

struct Context {
    methods: Vec<Method>,
    inquiry: InquiryConfig,
    mask_rate: f64,
    seed: u64,
    pairwise: bool,
    demo_pool: Vec<(String, Demonstration)>,
    templates: Arc<PromptTemplateSet>,
    chat: ChatSource,
    embed: EmbedSource,
    oracle: ChatSource,
    judge: Option<ChatSource>,
}

fn demonstration_pool(records: &[DatasetRecord]) -> Vec<(String, Demonstration)> {
    records
        .iter()
        .map(|r| (r.id.clone(), Demonstration::new(r.question.clone(), r.gold_answers[0].clone())))
        .collect()
}

fn pick_demonstrations(
    pool: &[(String, Demonstration)],
    exclude: &str,
    count: usize,
    seed: u64,
) -> Result<Vec<Demonstration>, String> {
    let eligible: Vec<&Demonstration> = pool.iter().filter(|(id, _)| id != exclude).map(|(_, d)| d).collect();
    if eligible.len() < count {
        return Err(format!(
            "demonstration pool has {} usable entries but {count} are required",
            eligible.len()
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x6465_6d6f);
    let mut idx = rand::seq::index::sample(&mut rng, eligible.len(), count).into_vec();
    idx.sort_unstable();
    Ok(idx.into_iter().map(|i| eligible[i].clone()).collect())
}

fn session_id(seed: u64, method: Method) -> String {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(method.label().as_bytes());
    h.finalize()[..16].iter().map(|b| format!("{b:02x}")).collect()
}

fn score(rec: &DatasetRecord, pred: &str) -> (u8, f64) {
    if rec.answer_type == AnswerType::Boolean {
        let p = canonical_boolean(pred);
        let golds: Vec<String> = rec.gold_answers.iter().map(|g| canonical_boolean(g)).collect();
        (exact_match(&p, &golds), f1_score(&p, &golds))
    } else {
        (exact_match(pred, &rec.gold_answers), f1_score(pred, &rec.gold_answers))
    }
}

async fn run_method(
    ctx: &Context,
    rec: &DatasetRecord,
    query: &UserQuery,
    facts: &[String],
    method: Method,
    seed: u64,
) -> MethodOutcome {
    let embed = match ctx.embed.instance() {
        Ok(e) => e,
        Err(e) => return MethodOutcome::failed(method, e.to_string()),
    };
    let engine = Engine::with_templates(ctx.chat.instance(), embed, ctx.templates.clone());
    let mut cfg = ctx.inquiry.clone();
    cfg.rng_seed = seed;
    cfg.chain_of_thought = method.chain_of_thought();

    let (prediction, inquired, rounds, transcript) = if method.inquires() {
        let channel = OracleChannel::new(ctx.oracle.instance(), facts.to_vec());
        let session = SessionRecord::new(session_id(seed, method), query.clone());
        let done = engine.run_session(&channel, session, &cfg, &()).await;
        let inquired = done.variance_history().first().is_some_and(|v| *v > cfg.delta);
        let transcript = Some(done.to_transcript_value());
        match done.final_answer() {
            Some(a) => (a.to_string(), inquired, done.rounds(), transcript),
            None => {
                let mut out = MethodOutcome::failed(method, done.error().unwrap_or("session did not complete"));
                out.inquired = inquired;
                out.transcript = transcript;
                return out;
            }
        }
    } else {
        let q = AugmentedQuery::new(query.clone());
        let answer = if method.chain_of_thought() {
            engine.answer_cot(&q, &cfg).await
        } else {
            engine.answer_direct(&q, &cfg).await
        };
        match answer {
            Ok(a) => (a, false, 0, None),
            Err(e) => return MethodOutcome::failed(method, e.to_string()),
        }
    };

    let (em, f1) = score(rec, &prediction);
    let (acc, judge_error) = match &ctx.judge {
        None => (None, None),
        Some(j) => {
            let judge = j.instance();
            match judge_accuracy(judge.as_ref(), &ctx.templates, &rec.question, &prediction, &rec.gold_answers).await {
                Ok(v) => (Some(v), None),
                Err(e) => (None, Some(e.to_string())),
            }
        }
    };
    MethodOutcome {
        method,
        prediction: Some(prediction),
        em: Some(em),
        f1: Some(f1),
        acc,
        error: None,
        judge_error,
        inquired,
        rounds,
        transcript,
    }
}

async fn evaluate_record(ctx: &Context, rec: &DatasetRecord) -> RecordOutcome {
    let seed = record_seed(ctx.seed, &rec.id);
    let shown_facts = mask_context(&rec.supporting_facts, ctx.mask_rate, seed);
    let query = pick_demonstrations(&ctx.demo_pool, &rec.id, ctx.inquiry.demonstrations, seed)
        .and_then(|demos| UserQuery::new(rec.question.clone(), demos).map_err(|e| e.to_string()));

    let mut methods = Vec::with_capacity(ctx.methods.len());
    for &m in &ctx.methods {
        methods.push(match &query {
            Ok(q) => run_method(ctx, rec, q, &shown_facts, m, seed).await,
            Err(e) => MethodOutcome::failed(m, e.clone()),
        });
    }

    let mut outcome = RecordOutcome {
        id: rec.id.clone(),
        question: rec.question.clone(),
        gold_answers: rec.gold_answers.clone(),
        shown_facts,
        methods,
        pairwise: None,
    };
    if ctx.pairwise {
        if let (Some(judge), Some(a), Some(b)) = (
            &ctx.judge,
            outcome.outcome(Method::Lamai).and_then(|o| o.prediction.clone()),
            outcome.outcome(Method::Dg).and_then(|o| o.prediction.clone()),
        ) {
            let j = judge.instance();
            match pairwise_judge(j.as_ref(), &ctx.templates, &rec.question, &a, &b, seed).await {
                Ok(v) => outcome.pairwise = Some(v),
                Err(e) => tracing::warn!(record = %rec.id, error = %e, "pairwise judge failed"),
            }
        }
    }
    outcome
}

fn pairwise_summary(records: &[RecordOutcome]) -> PairwiseSummary {
    let mut s = PairwiseSummary::default();
    for r in records {
        let eligible = r.outcome(Method::Lamai).is_some_and(|o| o.succeeded())
            && r.outcome(Method::Dg).is_some_and(|o| o.succeeded());
        match r.pairwise {
            Some(PairwiseVerdict::A) => s.wins += 1,
            Some(PairwiseVerdict::B) => s.losses += 1,
            Some(PairwiseVerdict::Tie) => s.ties += 1,
            None if eligible => s.failures += 1,
            None => {}
        }
    }
    s
}

/// Evaluates every enabled method on every record. Per-record failures are
/// recorded in the report and left out of the metric denominators.
pub async fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport, EvalError> {
    let inquiry = cfg
        .inquiry
        .clone()
        .validate()
        .map_err(|e| EvalError::Config(e.to_string()))?;
    if cfg.methods.is_empty() {
        return Err(EvalError::Config("no methods enabled".into()));
    }
    if !(0.0..=1.0).contains(&cfg.mask_rate) {
        return Err(EvalError::Config(format!("mask_rate must lie in [0, 1] (got {})", cfg.mask_rate)));
    }
    let mut records = load_dataset(&cfg.dataset)?;
    if let Some(limit) = cfg.limit {
        records.truncate(limit);
    }
    let demo_pool = match &cfg.demonstrations_file {
        Some(p) => demonstration_pool(&load_dataset(p)?),
        None => demonstration_pool(&records),
    };
    let o = &cfg.overrides;
    let ctx = Context {
        methods: cfg.methods.clone(),
        inquiry,
        mask_rate: cfg.mask_rate,
        seed: cfg.seed,
        pairwise: cfg.pairwise,
        demo_pool,
        templates: Arc::new(PromptTemplateSet::resolve(cfg.templates.as_deref())?),
        chat: chat_source(&cfg.backends.chat, Role::Chat, o)?,
        embed: embed_source(&cfg.backends.embed, o)?,
        oracle: chat_source(cfg.backends.oracle.as_ref().unwrap_or(&cfg.backends.chat), Role::Aux, o)?,
        judge: cfg
            .backends
            .judge
            .as_ref()
            .map(|j| chat_source(j, Role::Aux, o))
            .transpose()?,
    };

    // `buffered` keeps dataset order regardless of completion order.
    let outcomes: Vec<RecordOutcome> = stream::iter(records.iter())
        .map(|r| evaluate_record(&ctx, r))
        .buffered(cfg.concurrency.max(1))
        .collect()
        .await;

    let rows = ctx.methods.iter().map(|m| MethodRow::aggregate(*m, &outcomes)).collect();
    let pairwise = (cfg.pairwise && ctx.judge.is_some()).then(|| pairwise_summary(&outcomes));
    Ok(ExperimentReport {
        config: serde_json::to_value(cfg).map_err(|e| EvalError::Config(e.to_string()))?,
        rows,
        records: outcomes,
        pairwise,
    })
}

fn axis<T: Clone>(values: &[T], base: T) -> Vec<T> {
    if values.is_empty() {
        vec![base]
    } else {
        values.to_vec()
    }
}

/// Runs the experiment once per point of the δ × M × strategy × mask-rate
/// grid, in that nesting order.
pub async fn run_sweep(cfg: &ExperimentConfig) -> Result<SweepReport, EvalError> {
    let mut rows = Vec::new();
    for delta in axis(&cfg.sweep.delta, cfg.inquiry.delta) {
        for m in axis(&cfg.sweep.m_select, cfg.inquiry.m_select) {
            for strategy in axis(&cfg.sweep.strategy, cfg.inquiry.strategy) {
                for mask_rate in axis(&cfg.sweep.mask_rate, cfg.mask_rate) {
                    let mut point = cfg.clone();
                    point.inquiry.delta = delta;
                    point.inquiry.m_select = m;
                    point.inquiry.strategy = strategy;
                    point.mask_rate = mask_rate;
                    point.sweep = SweepAxes::default();
                    let report = run_experiment(&point).await?;
                    let inquiry_triggers = report
                        .rows
                        .iter()
                        .find(|r| r.method.inquires())
                        .map_or(0, |r| r.inquiries);
                    rows.push(SweepRow {
                        delta,
                        m_select: m,
                        strategy,
                        mask_rate,
                        inquiry_triggers,
                        methods: report.rows,
                    });
                }
            }
        }
    }
    Ok(SweepReport {
        config: serde_json::to_value(cfg).map_err(|e| EvalError::Config(e.to_string()))?,
        rows,
    })
}
