//! Resolution of run settings from flags, environment, an optional JSON
//! settings file and built-in defaults, in that order of precedence.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::Args;
use inquest_core::backends::openai::{ENV_API_KEY, ENV_BASE_URL, ENV_CHAT_MODEL, ENV_EMBED_MODEL};
use inquest_core::backends::{ChatSource, EmbedSource, EmbeddingTable, OpenAiClient, OpenAiSettings, ScriptedFixture};
use inquest_core::engine::PromptTemplateSet;
use inquest_core::eval::load_dataset;
use inquest_core::{Demonstration, InquiryConfig, Strategy};
use serde::Deserialize;

use crate::CliError;

pub const ENV_TEMPLATES: &str = "INQUEST_TEMPLATES";

/// Dimension used for hash-derived embeddings when a chat fixture is given
/// without an embedding table.
pub const FALLBACK_EMBED_DIM: usize = 8;

#[derive(Debug, Clone, Default, Args)]
pub struct InquiryFlags {
    /// Inquiry threshold on the answer-embedding variance.
    #[arg(long)]
    pub delta: Option<f64>,
    /// Answers sampled per uncertainty estimate.
    #[arg(long = "t-samples")]
    pub t_samples: Option<usize>,
    /// Candidate clarifying questions requested per round.
    #[arg(long = "n-candidates")]
    pub n_candidates: Option<usize>,
    /// Questions shown to the user per round.
    #[arg(long = "m")]
    pub m_select: Option<usize>,
    /// Question selection strategy: similarity, diversity or random.
    #[arg(long)]
    pub strategy: Option<Strategy>,
    /// Maximum number of inquiry rounds.
    #[arg(long = "max-iters")]
    pub max_iterations: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
}

impl InquiryFlags {
    pub fn apply(&self, cfg: &mut InquiryConfig) {
        if let Some(v) = self.delta {
            cfg.delta = v;
        }
        if let Some(v) = self.t_samples {
            cfg.t_samples = v;
        }
        if let Some(v) = self.n_candidates {
            cfg.n_candidates = v;
        }
        if let Some(v) = self.m_select {
            cfg.m_select = v;
        }
        if let Some(v) = self.strategy {
            cfg.strategy = v;
        }
        if let Some(v) = self.max_iterations {
            cfg.max_iterations = v;
        }
        if let Some(v) = self.seed {
            cfg.rng_seed = v;
        }
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct LiveFlags {
    /// Base URL of an OpenAI-compatible API.
    #[arg(long = "base-url")]
    pub base_url: Option<String>,
    #[arg(long = "chat-model")]
    pub chat_model: Option<String>,
    #[arg(long = "embed-model")]
    pub embed_model: Option<String>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct RunFlags {
    /// JSON settings file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub inquiry: InquiryFlags,
    #[command(flatten)]
    pub live: LiveFlags,
    /// Directory of prompt templates.
    #[arg(long)]
    pub templates: Option<PathBuf>,
    /// Scripted chat fixture; replaces the live chat backend.
    #[arg(long = "chat-fixture")]
    pub chat_fixture: Option<PathBuf>,
    /// Scripted embedding table; replaces the live embedding backend.
    #[arg(long = "embed-table")]
    pub embed_table: Option<PathBuf>,
    /// Demonstrations in dataset JSONL format.
    #[arg(long)]
    pub demos: Option<PathBuf>,
}

/// Contents of the `--config` file. Relative paths are resolved against
/// the file's directory.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileSettings {
    pub inquiry: InquiryConfig,
    pub base_url: Option<String>,
    pub chat_model: Option<String>,
    pub embed_model: Option<String>,
    pub templates: Option<PathBuf>,
    pub chat_fixture: Option<PathBuf>,
    pub embed_table: Option<PathBuf>,
    pub demonstrations_file: Option<PathBuf>,
    pub host: Option<String>,
    pub port: Option<u16>,
}

impl FileSettings {
    pub fn from_json(text: &str, base_dir: &Path) -> Result<Self, CliError> {
        let mut s: Self = serde_json::from_str(text).map_err(|e| CliError::Usage(format!("settings file: {e}")))?;
        for p in [
            &mut s.templates,
            &mut s.chat_fixture,
            &mut s.embed_table,
            &mut s.demonstrations_file,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base_dir.join(&*p);
            }
        }
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
        Self::from_json(&text, path.parent().unwrap_or(Path::new(".")))
    }
}

/// Inquiry configuration: flags over file over defaults.
pub fn resolve_inquiry(file: &FileSettings, flags: &InquiryFlags) -> InquiryConfig {
    let mut cfg = file.inquiry.clone();
    flags.apply(&mut cfg);
    cfg
}

/// Live backend settings: flags over environment over file over defaults.
pub fn resolve_live(file: &FileSettings, flags: &LiveFlags, env: &dyn Fn(&str) -> Option<String>) -> OpenAiSettings {
    let mut s = OpenAiSettings::default();
    let pick = |flag: &Option<String>, key: &str, from_file: &Option<String>| {
        flag.clone()
            .or_else(|| env(key).filter(|v| !v.is_empty()))
            .or_else(|| from_file.clone())
    };
    if let Some(v) = pick(&flags.base_url, ENV_BASE_URL, &file.base_url) {
        s.base_url = v;
    }
    if let Some(v) = pick(&flags.chat_model, ENV_CHAT_MODEL, &file.chat_model) {
        s.chat_model = v;
    }
    if let Some(v) = pick(&flags.embed_model, ENV_EMBED_MODEL, &file.embed_model) {
        s.embed_model = v;
    }
    s.api_key = env(ENV_API_KEY).filter(|v| !v.is_empty());
    s
}

/// Everything a session needs besides the user channel.
pub struct Runtime {
    pub inquiry: InquiryConfig,
    pub chat: ChatSource,
    pub embed: EmbedSource,
    pub templates: Arc<PromptTemplateSet>,
    pub demonstrations: Vec<Demonstration>,
    pub file: FileSettings,
}

fn load_demonstrations(path: &Path, count: usize) -> Result<Vec<Demonstration>, CliError> {
    let records = load_dataset(path).map_err(|e| CliError::Runtime(e.to_string()))?;
    if records.len() < count {
        return Err(CliError::Usage(format!(
            "{} holds {} demonstrations but {count} were requested",
            path.display(),
            records.len()
        )));
    }
    Ok(records
        .into_iter()
        .take(count)
        .map(|r| Demonstration::new(r.question, r.gold_answers[0].clone()))
        .collect())
}

impl Runtime {
    pub fn from_flags(flags: &RunFlags) -> Result<Self, CliError> {
        Self::resolve(flags, &|k| std::env::var(k).ok())
    }

    pub fn resolve(flags: &RunFlags, env: &dyn Fn(&str) -> Option<String>) -> Result<Self, CliError> {
        let file = match &flags.config {
            Some(p) => FileSettings::load(p)?,
            None => FileSettings::default(),
        };
        let mut inquiry = resolve_inquiry(&file, &flags.inquiry);

        let demos_path = flags.demos.clone().or_else(|| file.demonstrations_file.clone());
        let demonstrations = match demos_path {
            Some(p) => load_demonstrations(&p, inquiry.demonstrations)?,
            None => {
                inquiry.demonstrations = 0;
                Vec::new()
            }
        };
        let inquiry = inquiry.validate().map_err(|e| CliError::Usage(e.to_string()))?;

        let template_dir = flags
            .templates
            .clone()
            .or_else(|| env(ENV_TEMPLATES).filter(|v| !v.is_empty()).map(PathBuf::from))
            .or_else(|| file.templates.clone());
        let templates = match template_dir {
            Some(dir) => PromptTemplateSet::load_dir(dir).map_err(|e| CliError::Runtime(e.to_string()))?,
            None => PromptTemplateSet::default(),
        };

        let live = resolve_live(&file, &flags.live, env);
        let client = || -> Result<Arc<OpenAiClient>, CliError> {
            Ok(Arc::new(OpenAiClient::new(live.clone()).map_err(|e| CliError::Runtime(e.to_string()))?))
        };
        let chat_fixture = flags.chat_fixture.clone().or_else(|| file.chat_fixture.clone());
        let embed_table = flags.embed_table.clone().or_else(|| file.embed_table.clone());
        let chat = match &chat_fixture {
            Some(p) => ChatSource::Scripted(ScriptedFixture::load(p).map_err(|e| CliError::Runtime(e.to_string()))?),
            None => ChatSource::Shared(client()?),
        };
        let embed = match (&embed_table, &chat_fixture) {
            (Some(p), _) => EmbedSource::Scripted(EmbeddingTable::load(p).map_err(|e| CliError::Runtime(e.to_string()))?),
            (None, Some(_)) => EmbedSource::Scripted(EmbeddingTable::empty(FALLBACK_EMBED_DIM)),
            (None, None) => EmbedSource::Shared(client()?),
        };
        Ok(Self {
            inquiry,
            chat,
            embed,
            templates: Arc::new(templates),
            demonstrations,
            file,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn no_env(_: &str) -> Option<String> {
        None
    }

    #[test]
    fn flags_beat_file_beat_defaults() {
        let file = FileSettings::from_json(r#"{"inquiry":{"delta":0.01,"m_select":4}}"#, Path::new(".")).unwrap();
        let flags = InquiryFlags {
            m_select: Some(2),
            ..Default::default()
        };
        let cfg = resolve_inquiry(&file, &flags);
        assert_eq!(cfg.delta, 0.01);
        assert_eq!(cfg.m_select, 2);
        assert_eq!(cfg.n_candidates, 10);
    }

    #[test]
    fn live_precedence() {
        let file = FileSettings {
            base_url: Some("http://file".into()),
            chat_model: Some("file-chat".into()),
            embed_model: Some("file-embed".into()),
            ..Default::default()
        };
        let env = |k: &str| match k {
            ENV_BASE_URL => Some("http://env".to_string()),
            ENV_CHAT_MODEL => Some("env-chat".to_string()),
            ENV_API_KEY => Some("k".to_string()),
            _ => None,
        };
        let flags = LiveFlags {
            chat_model: Some("flag-chat".into()),
            ..Default::default()
        };
        let s = resolve_live(&file, &flags, &env);
        assert_eq!(s.base_url, "http://env");
        assert_eq!(s.chat_model, "flag-chat");
        assert_eq!(s.embed_model, "file-embed");
        assert_eq!(s.api_key.as_deref(), Some("k"));
        let s = resolve_live(&FileSettings::default(), &LiveFlags::default(), &no_env);
        assert_eq!(s, OpenAiSettings::default());
    }

    #[test]
    fn unknown_settings_keys_are_rejected() {
        assert!(FileSettings::from_json(r#"{"dleta":1}"#, Path::new(".")).is_err());
    }

    #[test]
    fn without_demos_the_count_drops_to_zero() {
        let dir = tempfile::tempdir().unwrap();
        let fixture = dir.path().join("chat.json");
        std::fs::write(&fixture, r#"[{"default":"ok"}]"#).unwrap();
        let flags = RunFlags {
            chat_fixture: Some(fixture),
            ..Default::default()
        };
        let rt = Runtime::resolve(&flags, &no_env).unwrap();
        assert_eq!(rt.inquiry.demonstrations, 0);
        assert!(matches!(rt.embed, EmbedSource::Scripted(ref t) if t.dimension == FALLBACK_EMBED_DIM));
    }

    #[test]
    fn invalid_flags_are_usage_errors() {
        let dir = tempfile::tempdir().unwrap();
        let fixture = dir.path().join("chat.json");
        std::fs::write(&fixture, r#"[{"default":"ok"}]"#).unwrap();
        let flags = RunFlags {
            chat_fixture: Some(fixture),
            inquiry: InquiryFlags {
                t_samples: Some(1),
                ..Default::default()
            },
            ..Default::default()
        };
        assert!(matches!(Runtime::resolve(&flags, &no_env), Err(CliError::Usage(_))));
    }
}
