use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Result};
use clap::{Args, ValueEnum};
use serde_json::json;

use semsched_core::corpus::{read_corpus, FailureLabel, TrainingLabel};
use semsched_core::eval::{eval_advisor, eval_tracker, eval_triage, AdvisorMode, FlippingCompleter};
use semsched_core::parse_trace_file;
use semsched_core::sim::{prepare_trace, PrepOptions};
use semsched_core::tracker::LogClassifier;

use crate::{to_json, write_file, ConfigOverrides, Ctx};

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    Triage,
    Tracker,
    Advisor,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Online,
    Oracle,
}

#[derive(Args)]
pub struct EvalArgs {
    #[arg(value_enum)]
    suite: Suite,
    /// Labeled log corpus (`labels.jsonl` + `logs/`) for triage and tracker.
    #[arg(long)]
    corpus: Option<PathBuf>,
    /// Trace for the advisor suite.
    #[arg(long)]
    trace: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Mode::Online)]
    mode: Mode,
    /// Tracker: minimum progress lines for a log to count; defaults to the scan depth.
    #[arg(long)]
    min_progress_lines: Option<usize>,
    /// Tracker: also count completer calls without the classifier stage.
    #[arg(long)]
    unfiltered: bool,
    /// Triage: invert every Nth failure classification.
    #[arg(long)]
    flip_every: Option<usize>,
    /// Metrics file; printed to stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    pub overrides: ConfigOverrides,
}

pub fn eval(ctx: &Ctx, a: &EvalArgs) -> Result<ExitCode> {
    let cfg = &ctx.config;
    let classifier = || LogClassifier::new(ctx.embedder.clone(), &cfg.tracker.category_labels);
    let corpus = || match &a.corpus {
        Some(c) => Ok(c.clone()),
        None => bail!("--corpus is required for this suite"),
    };
    let (metrics, summary) = match a.suite {
        Suite::Triage => {
            let c = read_corpus::<FailureLabel>(&corpus()?)?;
            let e = match a.flip_every {
                Some(n) => {
                    let flip = FlippingCompleter::new(ctx.completer.as_ref(), n);
                    eval_triage(&c, &classifier()?, &flip, &cfg.triage)?
                }
                None => eval_triage(&c, &classifier()?, ctx.completer.as_ref(), &cfg.triage)?,
            };
            let s = format!(
                "F1 {:.3} precision {:.3} recall {:.3} accuracy {:.3}; locator exact {}/{}, within call bound {}/{}",
                e.f1,
                e.precision,
                e.confusion.recall(),
                e.accuracy,
                e.locator_exact,
                e.total,
                e.within_call_bound,
                e.total
            );
            (serde_json::to_value(e)?, s)
        }
        Suite::Tracker => {
            let c = read_corpus::<TrainingLabel>(&corpus()?)?;
            let n = a.min_progress_lines.unwrap_or(cfg.tracker.max_metric_lines);
            let e = eval_tracker(&c, &classifier()?, ctx.completer.as_ref(), &cfg.tracker, n, a.unfiltered)?;
            let mut s = format!(
                "success {}/{} ({:.1}%), RMSRE {}, {} completer calls",
                e.successes,
                e.qualifying,
                e.success_rate * 100.0,
                e.rmsre.map_or("n/a".to_string(), |r| format!("{r:.4}")),
                e.completer_calls
            );
            if let (Some(u), Some(x)) = (e.unfiltered_calls, e.call_reduction()) {
                s.push_str(&format!(" vs {u} unfiltered ({x:.1}x fewer)"));
            }
            (serde_json::to_value(e)?, s)
        }
        Suite::Advisor => {
            let Some(trace) = &a.trace else {
                bail!("--trace is required for the advisor suite");
            };
            let records = parse_trace_file(trace)?;
            let base = trace.parent().map(PathBuf::from).unwrap_or_default();
            let mut opts = PrepOptions::offline(cfg, Some(&base));
            opts.embedder = ctx.embedder.clone();
            opts.completer = ctx.completer.clone();
            let p = prepare_trace(&records, &opts)?;
            let mode = match a.mode {
                Mode::Online => AdvisorMode::Online,
                Mode::Oracle => AdvisorMode::Oracle,
            };
            let e = eval_advisor(&p, cfg, mode)?;
            let s = format!(
                "{} of {} jobs matched; duration error < 100% for {:.1}% (learned-estimator baseline {:.1}%)",
                e.matched,
                e.jobs,
                e.within_100pct * 100.0,
                e.baseline_within_100pct * 100.0
            );
            (serde_json::to_value(e)?, s)
        }
    };
    let doc = to_json(&json!({"metrics": metrics, "config": cfg}))?;
    match &a.out {
        Some(p) => write_file(p, &doc)?,
        None => print!("{doc}"),
    }
    eprintln!("{summary}");
    Ok(ExitCode::SUCCESS)
}
