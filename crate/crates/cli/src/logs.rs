use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::Args;
use serde_json::json;

use semsched_core::advisor::{estimate_from_matches, fingerprint, retrieve_by_vector, AdvisorError};
use semsched_core::backend::VectorStore;
use semsched_core::extractor::{extract_metadata, write_transcript, AgentBudget};
use semsched_core::tracker::{assess_packing, extract_metrics, throughput, LogClassifier, TrackerError};
use semsched_core::triage::{plan_recovery, triage_log, ErrorType};
use semsched_core::{JobSpec, LogDocument};

use crate::{one_of, to_json, ConfigOverrides, Ctx};

#[derive(Args)]
pub struct AdviseArgs {
    /// Job working directory.
    #[arg(long)]
    workdir: PathBuf,
    /// Launch command as submitted.
    #[arg(long)]
    command: String,
    /// History snapshot to search.
    #[arg(long)]
    history: PathBuf,
    #[arg(long, default_value = "job")]
    job_id: String,
    /// Where the extraction transcript goes.
    #[arg(long, default_value = "transcripts")]
    transcripts: PathBuf,
    #[command(flatten)]
    pub overrides: ConfigOverrides,
}

pub fn advise(ctx: &Ctx, a: &AdviseArgs) -> Result<ExitCode> {
    let mut spec = JobSpec::new(a.job_id.clone(), 1, 0);
    spec.workdir = Some(a.workdir.clone());
    spec.launch_command = Some(a.command.clone());
    let store = VectorStore::load(&a.history).with_context(|| format!("loading {}", a.history.display()))?;
    let (md, steps) = extract_metadata(&spec, ctx.completer.as_ref(), &AgentBudget::default())?;
    let transcript = write_transcript(&a.transcripts, &a.job_id, &steps)?;
    let fp = fingerprint(&md, ctx.embedder.as_ref())?;
    let found = retrieve_by_vector(&fp, &store, &ctx.config.advisor)?;
    let estimate = match estimate_from_matches(&found, &store) {
        Ok(e) => Some(e),
        Err(AdvisorError::NoSimilarJobs) => None,
        Err(e) => return Err(e.into()),
    };
    print!(
        "{}",
        to_json(&json!({
            "metadata": md,
            "matches": found.matches,
            "estimate": estimate,
            "transcript": transcript,
        }))?
    );
    match &estimate {
        Some(e) => eprintln!(
            "estimate: {:.0} s, {:.1}% SM from {} similar jobs",
            e.duration_s,
            e.sm_util,
            e.matched_job_ids.len()
        ),
        None => eprintln!("no similar jobs above threshold {}", ctx.config.advisor.similarity_threshold),
    }
    eprintln!("transcript: {}", transcript.display());
    Ok(ExitCode::SUCCESS)
}

#[derive(Args)]
pub struct TrackArgs {
    #[arg(long)]
    log: PathBuf,
    /// First line written after packing; lines before it are the exclusive run.
    #[arg(long)]
    after_line: Option<usize>,
    /// Separate post-packing log instead of splitting `--log`.
    #[arg(long, conflicts_with = "after_line")]
    log_after: Option<PathBuf>,
    /// Training steps completed since packing; derived from step numbers when absent.
    #[arg(long)]
    steps_after: Option<u64>,
    #[command(flatten)]
    pub overrides: ConfigOverrides,
}

fn last_step(lines: &[String], classifier: &LogClassifier, ctx: &Ctx) -> Option<u64> {
    extract_metrics(lines, classifier, ctx.completer.as_ref(), &ctx.config.tracker)
        .ok()?
        .samples
        .iter()
        .filter_map(|s| s.step)
        .max()
}

pub fn track(ctx: &Ctx, a: &TrackArgs) -> Result<ExitCode> {
    let classifier = LogClassifier::new(ctx.embedder.clone(), &ctx.config.tracker.category_labels)?;
    let doc = LogDocument::from_file(&a.log)?;
    let (before, after) = match (a.after_line, &a.log_after) {
        (Some(k), _) => {
            if k > doc.len() {
                bail!("--after-line {k} is past the end of the log ({} lines)", doc.len());
            }
            (doc.lines[..k].to_vec(), Some(doc.lines[k..].to_vec()))
        }
        (None, Some(p)) => (doc.lines.clone(), Some(LogDocument::from_file(p)?.lines)),
        (None, None) => (doc.lines.clone(), None),
    };
    let Some(after) = after else {
        let x = match extract_metrics(&before, &classifier, ctx.completer.as_ref(), &ctx.config.tracker) {
            Ok(x) => x,
            Err(TrackerError::NoMetrics { completer_calls }) => {
                print!("{}", to_json(&json!({"samples": [], "throughput": null, "completer_calls": completer_calls}))?);
                eprintln!("no step-time metrics found");
                return Ok(ExitCode::from(2));
            }
            Err(e) => return Err(e.into()),
        };
        let tp = throughput(&x.samples)?;
        print!(
            "{}",
            to_json(&json!({"samples": x.samples, "throughput": tp, "completer_calls": x.completer_calls}))?
        );
        eprintln!("{} samples, {tp:.3} steps/s", x.samples.len());
        return Ok(ExitCode::SUCCESS);
    };
    let steps_after = match a.steps_after {
        Some(n) => n,
        None => match (last_step(&before, &classifier, ctx), last_step(&after, &classifier, ctx)) {
            (Some(b), Some(f)) => f.saturating_sub(b),
            _ => 0,
        },
    };
    let r = assess_packing(
        &before,
        &after,
        steps_after,
        &classifier,
        ctx.completer.as_ref(),
        &ctx.config.tracker,
        &ctx.config.packing,
    )?;
    print!("{}", to_json(&json!({"steps_after": steps_after, "slowdown": r}))?);
    eprintln!("decision: {:?}", r.decision);
    Ok(ExitCode::SUCCESS)
}

#[derive(Args)]
pub struct TriageArgs {
    #[arg(long)]
    log: PathBuf,
    /// Recovery plans are printed, never executed; only `no` is accepted.
    #[arg(long, default_value = "no")]
    execute_plan: String,
    #[command(flatten)]
    pub overrides: ConfigOverrides,
}

/// Exit status for each verdict.
pub fn exit_code(t: ErrorType) -> u8 {
    match t {
        ErrorType::Infra => 10,
        ErrorType::Framework => 11,
        ErrorType::UserScript => 12,
        ErrorType::Unknown => 13,
    }
}

pub fn triage(ctx: &Ctx, a: &TriageArgs) -> Result<ExitCode> {
    one_of("execute-plan", &a.execute_plan, &["no"])?;
    let classifier = LogClassifier::new(ctx.embedder.clone(), &ctx.config.tracker.category_labels)?;
    let doc = LogDocument::from_file(&a.log)?;
    let report = triage_log(&doc.lines, &classifier, ctx.completer.as_ref(), &ctx.config.triage)?;
    let plan = plan_recovery(&report);
    print!("{}", to_json(&json!({"report": report, "plan": plan}))?);
    eprintln!("error_type:       {}", report.error_type);
    eprintln!("faulty_component: {}", report.faulty_component);
    match report.located_line {
        Some(l) => eprintln!("first error:      line {} ({})", l + 1, doc.lines[l]),
        None => eprintln!("first error:      not located, classified the log tail"),
    }
    if plan.applicable {
        eprintln!("recovery plan:    {:?} (not executed)", plan.steps);
    }
    Ok(ExitCode::from(exit_code(report.error_type)))
}
