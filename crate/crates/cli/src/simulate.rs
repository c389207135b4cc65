use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::Args;

use semsched_core::backend::VectorStore;
use semsched_core::eval::{compare_reports, ReportBundle};
use semsched_core::policy::build_policy;
use semsched_core::sim::{prepare_trace, run_simulation, PrepOptions};
use semsched_core::{parse_trace_file, ClusterSpec};

use crate::{to_json, write_file, ConfigOverrides, Ctx};

#[derive(Args)]
pub struct SimulateArgs {
    /// Trace CSV; relative paths inside it resolve against its directory.
    #[arg(long)]
    trace: PathBuf,
    /// Cluster shape file (JSON or TOML with `nodes` and `gpus_per_node`).
    #[arg(long, conflicts_with_all = ["nodes", "gpus_per_node"])]
    cluster: Option<PathBuf>,
    #[arg(long, requires = "gpus_per_node")]
    nodes: Option<u32>,
    #[arg(long, requires = "nodes")]
    gpus_per_node: Option<u32>,
    #[arg(long)]
    policy: String,
    /// History snapshot for the semantic policies; overrides `policy.history_snapshot`.
    #[arg(long)]
    history: Option<PathBuf>,
    /// Clamp every job's GPU request to at most this many GPUs.
    #[arg(long)]
    cap_gpus: Option<u32>,
    /// Also write the per-event log.
    #[arg(long)]
    events: bool,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    pub overrides: ConfigOverrides,
}

pub fn simulate(ctx: &Ctx, a: &SimulateArgs) -> Result<ExitCode> {
    let cluster = match (&a.cluster, a.nodes, a.gpus_per_node) {
        (Some(p), _, _) => ClusterSpec::from_file(p)?,
        (None, Some(n), Some(g)) => {
            let c = ClusterSpec::new(n, g);
            c.validate()?;
            c
        }
        _ => bail!("give --cluster or both --nodes and --gpus-per-node"),
    };
    let mut records = parse_trace_file(&a.trace)?;
    if let Some(cap) = a.cap_gpus {
        if cap == 0 {
            bail!("--cap-gpus must be positive");
        }
        for r in &mut records {
            r.spec.num_gpus = r.spec.num_gpus.min(cap);
        }
    }
    let base = a.trace.parent().map(PathBuf::from).unwrap_or_default();
    let cfg = &ctx.config;
    let mut opts = PrepOptions::offline(cfg, Some(&base));
    opts.embedder = ctx.embedder.clone();
    opts.completer = ctx.completer.clone();
    opts.transcripts_dir = Some(a.out.join("transcripts"));
    let trace = prepare_trace(&records, &opts)?;
    let history = match a.history.as_ref().or(cfg.policy.history_snapshot.as_ref()) {
        Some(p) => Some(VectorStore::load(p).with_context(|| format!("loading {}", p.display()))?),
        None => None,
    };
    let mut policy = build_policy(&a.policy, cfg, history)?;
    let out = run_simulation(&trace, &cluster, policy.as_mut(), cfg)?;

    let bundle = ReportBundle::new(policy.name(), &trace, &cluster, cfg, &out);
    write_file(&a.out.join("report.json"), &bundle.to_json())?;
    write_file(&a.out.join("jobs.csv"), &out.report.jobs_csv_string())?;
    let mut cdf = String::from("jct_s,fraction\n");
    for (x, y) in &out.report.jct_cdf {
        cdf.push_str(&format!("{x},{y}\n"));
    }
    write_file(&a.out.join("jct_cdf.csv"), &cdf)?;
    if a.events {
        let mut log = out.events.join("\n");
        log.push('\n');
        write_file(&a.out.join("events.log"), &log)?;
    }
    if !trace.metadata_errors.is_empty() {
        write_file(&a.out.join("metadata_errors.json"), &to_json(&trace.metadata_errors)?)?;
    }

    let r = &out.report;
    println!("policy      {}", policy.name());
    println!("jobs        {} ({} rejected)", r.per_job.len(), out.rejected.len());
    println!("avg JCT     {:.1} s ({:.2} h)", r.avg_jct_s, r.avg_jct_s / 3600.0);
    println!("p99 JCT     {:.1} s", r.p99_jct_s);
    println!("makespan    {:.1} s", r.makespan_s);
    println!("avg queue   {:.1} s", r.avg_queue_s);
    println!(
        "packs {} evictions {} failures {} preemptions {}",
        out.stats.packs, out.stats.evictions, out.stats.failures, out.stats.preemptions
    );
    println!("wrote {}", a.out.display());
    Ok(ExitCode::SUCCESS)
}

#[derive(Args)]
pub struct ReportArgs {
    /// `report.json` files (or the directories holding them); the first is the baseline.
    #[arg(required = true)]
    reports: Vec<PathBuf>,
    /// Compare reports from different traces.
    #[arg(long)]
    force: bool,
    /// Directory for `comparison.json`, `table.txt` and `cdf.csv`.
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn report(a: &ReportArgs) -> Result<ExitCode> {
    let mut bundles = Vec::new();
    for p in &a.reports {
        let path = if p.is_dir() { p.join("report.json") } else { p.clone() };
        let text = std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
        bundles.push(ReportBundle::from_json(&text)?);
    }
    let c = compare_reports(&bundles, a.force)?;
    let table = c.table();
    if let Some(dir) = &a.out {
        write_file(&dir.join("comparison.json"), &to_json(&c)?)?;
        write_file(&dir.join("cdf.csv"), &c.cdf_csv())?;
        write_file(&dir.join("table.txt"), &table)?;
    }
    print!("{table}");
    Ok(ExitCode::SUCCESS)
}
