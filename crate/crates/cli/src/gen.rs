use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, ValueEnum};
use serde::de::DeserializeOwned;

use semsched_core::backend::{JobOutcome, StoreEntry, VectorStore};
use semsched_core::corpus::{
    gen_failure_corpus, gen_repo_corpus, gen_trace, gen_training_corpus, write_corpus, FailureCorpusSpec,
    RepoCorpusSpec, TraceSpec, TrainingCorpusSpec,
};
use semsched_core::sim::{prepare_trace, runtime_s, PrepOptions};
use semsched_core::{parse_trace_file, FinalStatus};

use crate::Ctx;

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum What {
    /// Synthetic job trace (`trace.csv` plus metadata documents).
    Trace,
    /// Labeled training logs with step times.
    Logs,
    /// Labeled failure logs.
    FailureLogs,
    /// Source-tree fixtures with their metadata.
    Repos,
    /// History snapshot built from the completed jobs of an existing trace.
    History,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    Default,
    HeavyInterference,
    InfraHeavy,
}

#[derive(Args)]
pub struct GenArgs {
    #[arg(value_enum)]
    what: What,
    /// TOML spec; missing fields take their defaults.
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Trace preset used when no spec file is given.
    #[arg(long, value_enum, default_value_t = Preset::Default)]
    preset: Preset,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory (snapshot file for `history`).
    #[arg(long)]
    out: PathBuf,
    /// For `trace`: point jobs at generated repositories instead of metadata documents.
    #[arg(long)]
    with_repos: bool,
    /// For `history`: the trace whose jobs are recorded.
    #[arg(long, required_if_eq("what", "history"))]
    trace: Option<PathBuf>,
}

fn spec<T: DeserializeOwned + Default>(path: &Option<PathBuf>) -> Result<T> {
    match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            toml::from_str(&text).with_context(|| format!("parsing {}", p.display()))
        }
        None => Ok(T::default()),
    }
}

fn history(ctx: &Ctx, trace: &Path, out: &Path) -> Result<usize> {
    let records = parse_trace_file(trace)?;
    let base = trace.parent().map(PathBuf::from).unwrap_or_default();
    let mut opts = PrepOptions::offline(&ctx.config, Some(&base));
    opts.embedder = ctx.embedder.clone();
    opts.completer = ctx.completer.clone();
    let p = prepare_trace(&records, &opts)?;
    let mut store: Option<VectorStore> = None;
    for j in &p.jobs {
        let (Some(md), Some(fp)) = (&j.metadata, &j.fingerprint) else {
            continue;
        };
        if j.truth.final_status != FinalStatus::Completed {
            continue;
        }
        store.get_or_insert_with(|| VectorStore::new(fp.dim())).upsert(
            &j.spec.job_id,
            StoreEntry {
                vector: fp.clone(),
                metadata: md.clone(),
                outcome: JobOutcome {
                    duration_s: runtime_s(&j.truth) as f64,
                    sm_util: Some(j.truth.sm_util_steady),
                    status: FinalStatus::Completed,
                },
            },
        )?;
    }
    let store = store.context("no completed job with metadata in the trace")?;
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    store.save(out)?;
    Ok(store.len())
}

pub fn gen(ctx: &Ctx, a: &GenArgs) -> Result<ExitCode> {
    match a.what {
        What::Trace => {
            let s: TraceSpec = match (&a.spec, a.preset) {
                (Some(_), _) => spec(&a.spec)?,
                (None, Preset::Default) => TraceSpec::default(),
                (None, Preset::HeavyInterference) => TraceSpec::heavy_interference(),
                (None, Preset::InfraHeavy) => TraceSpec::infra_heavy(),
            };
            let g = gen_trace(&s, a.seed)?;
            let path = if a.with_repos { g.write_with_repos(&a.out)? } else { g.write(&a.out)? };
            println!("{} jobs from {} families -> {}", g.records.len(), g.families.len(), path.display());
        }
        What::Logs => {
            let s: TrainingCorpusSpec = spec(&a.spec)?;
            let c = gen_training_corpus(&s, a.seed);
            write_corpus(&a.out, &c)?;
            println!("{} training logs -> {}", c.len(), a.out.display());
        }
        What::FailureLogs => {
            let s: FailureCorpusSpec = spec(&a.spec)?;
            let c = gen_failure_corpus(&s, a.seed)?;
            write_corpus(&a.out, &c)?;
            println!("{} failure logs ({} INFRA) -> {}", c.len(), s.num_infra, a.out.display());
        }
        What::Repos => {
            let s: RepoCorpusSpec = spec(&a.spec)?;
            let labels = gen_repo_corpus(&s, a.seed, &a.out)?;
            println!("{} repositories -> {}", labels.len(), a.out.display());
        }
        What::History => {
            let trace = a.trace.as_ref().expect("clap enforces --trace");
            let n = history(ctx, trace, &a.out)?;
            println!("{n} completed jobs -> {}", a.out.display());
        }
    }
    Ok(ExitCode::SUCCESS)
}
