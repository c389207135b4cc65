use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use semsched_core::backend::{Completer, Embedder, HashingEmbedder, HttpBackend, HttpConfig, MockCompleter};
use semsched_core::Config;

mod eval;
mod gen;
mod logs;
mod simulate;

#[derive(Parser)]
#[command(name = "semsched", version, about = "GPU cluster scheduling simulator with log and code analysis tools")]
struct Cli {
    /// TOML config file; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Completion and embedding backend. `http` reads SM_LLM_URL, SM_LLM_MODEL and SM_LLM_API_KEY.
    #[arg(long, global = true, value_enum, default_value_t = BackendKind::Mock)]
    backend: BackendKind,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum BackendKind {
    Mock,
    Http,
}

#[derive(Subcommand)]
enum Command {
    /// Replay a trace under a scheduling policy.
    Simulate(simulate::SimulateArgs),
    /// Estimate duration and utilization of a job from similar past jobs.
    Advise(logs::AdviseArgs),
    /// Extract step times from a training log, or compare before/after packing.
    Track(logs::TrackArgs),
    /// Locate and classify the root cause in a failure log.
    Triage(logs::TriageArgs),
    /// Generate traces, log corpora, repository fixtures or history snapshots.
    Gen(gen::GenArgs),
    /// Score a module against a labeled corpus.
    Eval(eval::EvalArgs),
    /// Compare simulation reports side by side.
    Report(simulate::ReportArgs),
}

/// Overrides shared by the commands that take a config.
#[derive(Args, Clone, Default)]
pub struct ConfigOverrides {
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    detection_rate: Option<f64>,
    #[arg(long)]
    checkpoint_interval: Option<u64>,
    #[arg(long)]
    similarity_threshold: Option<f64>,
    #[arg(long)]
    top_k: Option<usize>,
    #[arg(long)]
    slowdown_threshold: Option<f64>,
    #[arg(long)]
    chunk_lines: Option<usize>,
}

pub struct Ctx {
    pub config: Config,
    pub completer: Arc<dyn Completer>,
    pub embedder: Arc<dyn Embedder>,
}

impl Ctx {
    fn new(cli: &Cli, o: &ConfigOverrides) -> Result<Self> {
        let mut config = match &cli.config {
            Some(p) => {
                let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
                Config::from_toml(&text)?
            }
            None => Config::default(),
        };
        if let Some(v) = o.seed {
            config.sim.rng_seed = v;
        }
        if let Some(v) = o.detection_rate {
            config.sim.detection_rate = v;
        }
        if let Some(v) = o.checkpoint_interval {
            config.sim.checkpoint_interval_s = v;
        }
        if let Some(v) = o.similarity_threshold {
            config.advisor.similarity_threshold = v;
        }
        if let Some(v) = o.top_k {
            config.advisor.top_k = v;
        }
        if let Some(v) = o.slowdown_threshold {
            config.packing.slowdown_rate_threshold = v;
        }
        if let Some(v) = o.chunk_lines {
            config.triage.chunk_lines = v;
        }
        config.validate()?;
        let (completer, embedder): (Arc<dyn Completer>, Arc<dyn Embedder>) = match cli.backend {
            BackendKind::Mock => (Arc::new(MockCompleter), Arc::new(HashingEmbedder::default())),
            BackendKind::Http => {
                let b = Arc::new(HttpBackend::new(HttpConfig::from_env()?)?);
                (b.clone(), b)
            }
        };
        Ok(Ctx {
            config,
            completer,
            embedder,
        })
    }
}

pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    std::fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

pub fn to_json<T: serde::Serialize>(v: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(v)?;
    s.push('\n');
    Ok(s)
}

fn run(cli: &Cli) -> Result<ExitCode> {
    match &cli.command {
        Command::Simulate(a) => simulate::simulate(&Ctx::new(cli, &a.overrides)?, a),
        Command::Advise(a) => logs::advise(&Ctx::new(cli, &a.overrides)?, a),
        Command::Track(a) => logs::track(&Ctx::new(cli, &a.overrides)?, a),
        Command::Triage(a) => logs::triage(&Ctx::new(cli, &a.overrides)?, a),
        Command::Gen(a) => gen::gen(&Ctx::new(cli, &ConfigOverrides::default())?, a),
        Command::Eval(a) => eval::eval(&Ctx::new(cli, &a.overrides)?, a),
        Command::Report(a) => simulate::report(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

/// Rejects a value that is not one of `allowed`.
pub fn one_of(flag: &str, value: &str, allowed: &[&str]) -> Result<()> {
    if !allowed.contains(&value) {
        bail!("--{flag} must be one of {}", allowed.join(", "));
    }
    Ok(())
}
