use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use inquest_core::engine::Engine;
use inquest_core::eval::{run_experiment, run_sweep, ExperimentConfig, LiveOverrides};
use inquest_core::{SessionState, Strategy, UserQuery};

use crate::service::{router, AppState};
use crate::settings::{InquiryFlags, LiveFlags, RunFlags, Runtime, ENV_TEMPLATES};
use crate::store::{spawn_sweeper, SessionStore};
use crate::terminal::TerminalChannel;
use crate::CliError;

#[derive(Debug, Parser)]
#[command(name = "inquest", version, about = "Ask clarifying questions before answering when the model is unsure")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Answer one query, asking clarifying questions on the terminal.
    Ask(AskArgs),
    /// Start the HTTP session service.
    Serve(ServeArgs),
    /// Run an experiment described by a JSON config.
    Eval(EvalArgs),
    /// Run an experiment over a grid of settings.
    Sweep(SweepArgs),
}

#[derive(Debug, Args)]
pub struct AskArgs {
    /// The question; read from standard input when omitted.
    pub query: Option<String>,
    #[command(flatten)]
    pub run: RunFlags,
    /// Write the session transcript to this file.
    #[arg(long)]
    pub transcript: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[command(flatten)]
    pub run: RunFlags,
    #[arg(long)]
    pub host: Option<String>,
    #[arg(long)]
    pub port: Option<u16>,
    /// Directory of static files served under `/`.
    #[arg(long)]
    pub assets: Option<PathBuf>,
    /// Idle time after which a session is dropped.
    #[arg(long = "ttl-secs")]
    pub ttl_secs: Option<u64>,
    /// Accepted for symmetry with `eval`; the service has no batch work.
    #[arg(long, hide = true)]
    pub concurrency: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    /// Experiment config (JSON).
    #[arg(long)]
    pub config: PathBuf,
    /// Report destination; printed to standard output when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Records evaluated at once.
    #[arg(long)]
    pub concurrency: Option<usize>,
    #[command(flatten)]
    pub live: LiveFlags,
    #[arg(long)]
    pub templates: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub experiment: ExperimentArgs,
    #[command(flatten)]
    pub inquiry: InquiryFlags,
    #[arg(long = "mask-rate")]
    pub mask_rate: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub experiment: ExperimentArgs,
    /// Threshold values, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub delta: Vec<f64>,
    /// Questions-per-round values, comma separated.
    #[arg(long = "m", value_delimiter = ',')]
    pub m_select: Vec<usize>,
    #[arg(long, value_delimiter = ',')]
    pub strategy: Vec<Strategy>,
    #[arg(long = "mask-rate", value_delimiter = ',')]
    pub mask_rate: Vec<f64>,
}

pub async fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Ask(a) => ask(a).await,
        Command::Serve(s) => serve(s).await,
        Command::Eval(e) => eval(e).await,
        Command::Sweep(s) => sweep(s).await,
    }
}

fn read_query_from_stdin() -> Result<String, CliError> {
    eprint!("Question: ");
    let mut line = String::new();
    std::io::stdin()
        .read_line(&mut line)
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    Ok(line.trim().to_string())
}

async fn ask(args: AskArgs) -> Result<(), CliError> {
    let rt = Runtime::from_flags(&args.run)?;
    let text = match args.query {
        Some(q) => q,
        None => read_query_from_stdin()?,
    };
    let query = UserQuery::new(text, rt.demonstrations.clone()).map_err(|e| CliError::Usage(e.to_string()))?;
    let embed = rt.embed.instance().map_err(|e| CliError::Runtime(e.to_string()))?;
    let engine = Engine::with_templates(rt.chat.instance(), embed, rt.templates.clone());
    let done = engine.run_inquiry(&TerminalChannel::stdio(), query, &rt.inquiry).await;
    if let Some(path) = &args.transcript {
        write_file(path, &done.render_transcript())?;
    }
    match done.state() {
        SessionState::Completed => {
            println!("{}", done.final_answer().unwrap_or_default());
            Ok(())
        }
        _ => Err(CliError::Runtime(done.error().unwrap_or("session did not complete").to_string())),
    }
}

fn default_assets() -> Option<PathBuf> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("assets");
    dir.is_dir().then_some(dir)
}

async fn serve(args: ServeArgs) -> Result<(), CliError> {
    let rt = Runtime::from_flags(&args.run)?;
    let host = args.host.or_else(|| rt.file.host.clone()).unwrap_or_else(|| "127.0.0.1".into());
    let port = args.port.or(rt.file.port).unwrap_or(8080);
    let addr: SocketAddr = format!("{host}:{port}")
        .parse()
        .map_err(|e| CliError::Usage(format!("bad listen address {host}:{port}: {e}")))?;
    let ttl = args.ttl_secs.map(Duration::from_secs).unwrap_or(crate::store::DEFAULT_TTL);
    let store = SessionStore::new(ttl);
    let sweeper = spawn_sweeper(store.clone());
    let assets = args.assets.or_else(default_assets);
    let app = router(AppState::new(rt, store), assets.as_deref());

    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .map_err(|e| CliError::Runtime(format!("bind {addr}: {e}")))?;
    let local = listener.local_addr().map_err(|e| CliError::Runtime(e.to_string()))?;
    eprintln!("listening on http://{local}");
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    sweeper.abort();
    Ok(())
}

fn load_experiment(args: &ExperimentArgs) -> Result<ExperimentConfig, CliError> {
    let mut cfg = ExperimentConfig::load(&args.config).map_err(|e| CliError::Runtime(e.to_string()))?;
    if let Some(c) = args.concurrency {
        if c == 0 {
            return Err(CliError::Usage("--concurrency must be at least 1".into()));
        }
        cfg.concurrency = c;
    }
    if let Some(t) = args
        .templates
        .clone()
        .or_else(|| std::env::var(ENV_TEMPLATES).ok().filter(|v| !v.is_empty()).map(PathBuf::from))
    {
        cfg.templates = Some(t);
    }
    cfg.overrides = LiveOverrides {
        base_url: args.live.base_url.clone(),
        chat_model: args.live.chat_model.clone(),
        embed_model: args.live.embed_model.clone(),
    };
    Ok(cfg)
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))
}

fn emit(out: &Option<PathBuf>, json: &str, table: &str) -> Result<(), CliError> {
    match out {
        Some(path) => {
            write_file(path, json)?;
            print!("{table}");
        }
        None => println!("{json}"),
    }
    Ok(())
}

fn eval_error(e: inquest_core::eval::EvalError) -> CliError {
    match e {
        inquest_core::eval::EvalError::Config(m) => CliError::Usage(m),
        other => CliError::Runtime(other.to_string()),
    }
}

async fn eval(args: EvalArgs) -> Result<(), CliError> {
    let mut cfg = load_experiment(&args.experiment)?;
    args.inquiry.apply(&mut cfg.inquiry);
    if let Some(r) = args.mask_rate {
        cfg.mask_rate = r;
    }
    let report = run_experiment(&cfg).await.map_err(eval_error)?;
    emit(&args.experiment.out, &report.to_json_pretty(), &report.render_table())
}

async fn sweep(args: SweepArgs) -> Result<(), CliError> {
    let mut cfg = load_experiment(&args.experiment)?;
    if !args.delta.is_empty() {
        cfg.sweep.delta = args.delta;
    }
    if !args.m_select.is_empty() {
        cfg.sweep.m_select = args.m_select;
    }
    if !args.strategy.is_empty() {
        cfg.sweep.strategy = args.strategy;
    }
    if !args.mask_rate.is_empty() {
        cfg.sweep.mask_rate = args.mask_rate;
    }
    let report = run_sweep(&cfg).await.map_err(eval_error)?;
    emit(&args.experiment.out, &report.to_json_pretty(), &report.render_table())
}
