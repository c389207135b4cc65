//! Metric harnesses for the semantic modules and side-by-side report comparison.

use std::fmt::Write as _;
use std::sync::atomic::{AtomicUsize, Ordering};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backend::{BackendError, Completer, CompletionRequest, CompletionResult, SchemaId, VectorStore};
use crate::corpus::{FailureLabel, TrainingLabel};
use crate::model::{
    empirical_cdf, relative_errors, rmsre, ClusterSpec, Config, FinalStatus, LogDocument, ModelError, SimReport,
    TrackerConfig, TriageConfig,
};
use crate::policy::FinishInfo;
use crate::sim::{runtime_s, PreparedTrace, SimOutput, SimStats};
use crate::tracker::{extract_metrics, extract_metrics_unfiltered, median_step_time, LogClassifier, TrackerError};
use crate::triage::{call_bound, triage_log, ErrorType};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("corpus: {0}")]
    Corpus(String),
    #[error("reports come from different traces ({0} vs {1}); pass --force to compare anyway")]
    TraceMismatch(String, String),
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Wraps a completer and inverts the INFRA verdict of every `period`-th
/// failure classification, for checking the harness against a known confusion matrix.
pub struct FlippingCompleter<C> {
    inner: C,
    period: usize,
    calls: AtomicUsize,
}

impl<C: Completer> FlippingCompleter<C> {
    pub fn new(inner: C, period: usize) -> Self {
        FlippingCompleter {
            inner,
            period: period.max(1),
            calls: AtomicUsize::new(0),
        }
    }
}

impl<C: Completer> Completer for FlippingCompleter<C> {
    fn complete(&self, req: &CompletionRequest) -> Result<CompletionResult, BackendError> {
        let r = self.inner.complete(req)?;
        if req.schema != SchemaId::FailureClass {
            return Ok(r);
        }
        let n = self.calls.fetch_add(1, Ordering::SeqCst) + 1;
        if n % self.period != 0 {
            return Ok(r);
        }
        let was_infra = r
            .parsed
            .as_ref()
            .and_then(|v| v.get("error_type"))
            .and_then(|v| v.as_str())
            == Some("INFRA");
        let raw = if was_infra {
            r#"{"error_type": "USER_SCRIPT", "faulty_component": "NONE"}"#
        } else {
            r#"{"error_type": "INFRA", "faulty_component": "GPU"}"#
        };
        Ok(CompletionResult::from_raw(SchemaId::FailureClass, raw.to_string()))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl Confusion {
    pub fn add(&mut self, truth: bool, predicted: bool) {
        match (truth, predicted) {
            (true, true) => self.tp += 1,
            (false, true) => self.fp += 1,
            (false, false) => self.tn += 1,
            (true, false) => self.fn_ += 1,
        }
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn precision(&self) -> f64 {
        ratio_or(self.tp, self.tp + self.fp, 0.0)
    }

    pub fn recall(&self) -> f64 {
        ratio_or(self.tp, self.tp + self.fn_, 0.0)
    }

    pub fn f1(&self) -> f64 {
        let (p, r) = (self.precision(), self.recall());
        if p + r == 0.0 {
            0.0
        } else {
            2.0 * p * r / (p + r)
        }
    }

    pub fn accuracy(&self) -> f64 {
        ratio_or(self.tp + self.tn, self.total(), 0.0)
    }
}

fn ratio_or(a: usize, b: usize, default: f64) -> f64 {
    if b == 0 {
        default
    } else {
        a as f64 / b as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TriageCase {
    pub id: String,
    pub label: String,
    pub predicted: String,
    pub label_line: usize,
    pub located_line: Option<usize>,
    pub classifier_calls: usize,
    pub call_bound: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TriageEval {
    /// INFRA vs everything else.
    pub confusion: Confusion,
    pub f1: f64,
    pub precision: f64,
    pub accuracy: f64,
    /// Logs whose located line equals the labeled first error.
    pub locator_exact: usize,
    /// Logs where the locator stayed within its call bound.
    pub within_call_bound: usize,
    pub total: usize,
    /// Correct faulty component among true positives.
    pub component_correct: usize,
    pub cases: Vec<TriageCase>,
}

/// Triage every log and score the verdicts against the corpus labels.
pub fn eval_triage(
    corpus: &[(LogDocument, FailureLabel)],
    classifier: &LogClassifier,
    completer: &dyn Completer,
    cfg: &TriageConfig,
) -> Result<TriageEval, EvalError> {
    if corpus.is_empty() {
        return Err(EvalError::Corpus("empty triage corpus".into()));
    }
    let mut confusion = Confusion::default();
    let mut exact = 0;
    let mut within = 0;
    let mut component_correct = 0;
    let mut cases = Vec::with_capacity(corpus.len());
    for (doc, label) in corpus {
        let r = triage_log(&doc.lines, classifier, completer, cfg)?;
        let truth = label.kind.is_infra();
        let predicted = r.error_type == ErrorType::Infra;
        confusion.add(truth, predicted);
        if truth && predicted && r.faulty_component == label.kind.component {
            component_correct += 1;
        }
        if r.located_line == Some(label.first_error_line) {
            exact += 1;
        }
        let bound = call_bound(doc.len().div_ceil(cfg.chunk_lines.max(1)));
        if r.classifier_calls <= bound {
            within += 1;
        }
        cases.push(TriageCase {
            id: label.id.clone(),
            label: label.kind.to_string(),
            predicted: format!("{}/{}", r.error_type, r.faulty_component),
            label_line: label.first_error_line,
            located_line: r.located_line,
            classifier_calls: r.classifier_calls,
            call_bound: bound,
        });
    }
    Ok(TriageEval {
        f1: confusion.f1(),
        precision: confusion.precision(),
        accuracy: confusion.accuracy(),
        confusion,
        locator_exact: exact,
        within_call_bound: within,
        total: corpus.len(),
        component_correct,
        cases,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackerEval {
    /// Logs with at least `min_progress_lines` progress lines.
    pub qualifying: usize,
    pub successes: usize,
    pub success_rate: f64,
    /// Over successful qualifying logs; `None` when there are none.
    pub rmsre: Option<f64>,
    pub completer_calls: usize,
    /// Completer calls of extraction without the classifier stage, when measured.
    pub unfiltered_calls: Option<usize>,
    /// Non-qualifying logs that still produced a metric.
    pub extra_successes: usize,
}

impl TrackerEval {
    /// How many times fewer completer calls the filtered pipeline made.
    pub fn call_reduction(&self) -> Option<f64> {
        self.unfiltered_calls.map(|u| u as f64 / self.completer_calls.max(1) as f64)
    }
}

/// Step-time extraction over a labeled training-log corpus.
pub fn eval_tracker(
    corpus: &[(LogDocument, TrainingLabel)],
    classifier: &LogClassifier,
    completer: &dyn Completer,
    cfg: &TrackerConfig,
    min_progress_lines: usize,
    measure_unfiltered: bool,
) -> Result<TrackerEval, EvalError> {
    if corpus.is_empty() {
        return Err(EvalError::Corpus("empty tracker corpus".into()));
    }
    let mut qualifying = 0;
    let mut successes = 0;
    let mut extra = 0;
    let mut calls = 0;
    let mut unfiltered = 0;
    let mut pairs = Vec::new();
    for (doc, label) in corpus {
        let q = label.qualifies(min_progress_lines);
        qualifying += q as usize;
        match extract_metrics(&doc.lines, classifier, completer, cfg) {
            Ok(x) => {
                calls += x.completer_calls;
                let est = median_step_time(&x.samples).map_err(|e| EvalError::Corpus(e.to_string()))?;
                if q {
                    successes += 1;
                    pairs.push((est, label.step_time_s));
                } else {
                    extra += 1;
                }
            }
            Err(TrackerError::NoMetrics { completer_calls }) => calls += completer_calls,
            Err(TrackerError::Backend(e)) => return Err(e.into()),
            Err(TrackerError::Empty) => {}
        }
        if measure_unfiltered {
            unfiltered += match extract_metrics_unfiltered(&doc.lines, completer, cfg) {
                Ok(x) => x.completer_calls,
                Err(TrackerError::NoMetrics { completer_calls }) => completer_calls,
                Err(TrackerError::Backend(e)) => return Err(e.into()),
                Err(TrackerError::Empty) => 0,
            };
        }
    }
    Ok(TrackerEval {
        qualifying,
        successes,
        success_rate: ratio_or(successes, qualifying, 0.0),
        rmsre: if pairs.is_empty() { None } else { Some(rmsre(&pairs)?) },
        completer_calls: calls,
        unfiltered_calls: measure_unfiltered.then_some(unfiltered),
        extra_successes: extra,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AdvisorMode {
    /// Jobs replayed in submission order; each finished job joins the history.
    Online,
    /// Every job is looked up against its own true outcome.
    Oracle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdvisorEval {
    pub jobs: usize,
    /// Jobs with at least one match above the threshold.
    pub matched: usize,
    pub duration_errors: Vec<f64>,
    pub util_errors: Vec<f64>,
    /// Relative errors of the noisy learned-estimator baseline on the same jobs.
    pub baseline_errors: Vec<f64>,
    pub duration_cdf: Vec<(f64, f64)>,
    pub util_cdf: Vec<(f64, f64)>,
    pub baseline_cdf: Vec<(f64, f64)>,
    pub within_100pct: f64,
    pub baseline_within_100pct: f64,
}

fn within(errors: &[f64], bound: f64) -> f64 {
    ratio_or(errors.iter().filter(|e| **e < bound).count(), errors.len(), 0.0)
}

/// Relative errors of history-based estimates for the jobs of a prepared trace.
pub fn eval_advisor(trace: &PreparedTrace, cfg: &Config, mode: AdvisorMode) -> Result<AdvisorEval, EvalError> {
    let mut order: Vec<usize> = (0..trace.jobs.len()).collect();
    order.sort_by_key(|&i| (trace.jobs[i].spec.submit_time, i));
    let mut store: Option<VectorStore> = None;
    let mut dur = Vec::new();
    let mut util = Vec::new();
    let mut base = Vec::new();
    let mut matched = 0;
    let mut with_md = 0;
    for i in order {
        let j = &trace.jobs[i];
        let (Some(md), Some(fp)) = (&j.metadata, &j.fingerprint) else {
            continue;
        };
        with_md += 1;
        let truth = runtime_s(&j.truth) as f64;
        let est = match mode {
            AdvisorMode::Oracle => Some((truth, j.truth.sm_util_steady)),
            AdvisorMode::Online => match &store {
                Some(s) => {
                    let r = crate::advisor::retrieve_by_vector(fp, s, &cfg.advisor)?;
                    crate::advisor::estimate_from_matches(&r, s).ok().map(|e| (e.duration_s, e.sm_util))
                }
                None => None,
            },
        };
        if let Some((d, u)) = est {
            matched += 1;
            dur.push((d, truth));
            util.push((u, j.truth.sm_util_steady.max(f64::MIN_POSITIVE)));
            base.push((j.lucid_estimate_s, truth));
        }
        if mode == AdvisorMode::Online && j.truth.final_status == FinalStatus::Completed {
            let info = FinishInfo {
                runtime_s: truth,
                status: FinalStatus::Completed,
                sm_util: j.truth.sm_util_steady,
                end: 0,
            };
            let s = store.get_or_insert_with(|| VectorStore::new(fp.dim()));
            s.upsert(
                &j.spec.job_id,
                crate::backend::StoreEntry {
                    vector: fp.clone(),
                    metadata: md.clone(),
                    outcome: crate::backend::JobOutcome {
                        duration_s: info.runtime_s,
                        sm_util: Some(info.sm_util),
                        status: info.status,
                    },
                },
            )?;
        }
    }
    if with_md == 0 {
        return Err(EvalError::Corpus("no job in the trace carries metadata".into()));
    }
    let errs = |p: &[(f64, f64)]| -> Result<Vec<f64>, EvalError> {
        if p.is_empty() {
            Ok(Vec::new())
        } else {
            Ok(relative_errors(p)?)
        }
    };
    let duration_errors = errs(&dur)?;
    let util_errors = errs(&util)?;
    let baseline_errors = errs(&base)?;
    Ok(AdvisorEval {
        jobs: with_md,
        matched,
        duration_cdf: empirical_cdf(&duration_errors),
        util_cdf: empirical_cdf(&util_errors),
        baseline_cdf: empirical_cdf(&baseline_errors),
        within_100pct: within(&duration_errors, 1.0),
        baseline_within_100pct: within(&baseline_errors, 1.0),
        duration_errors,
        util_errors,
        baseline_errors,
    })
}

/// Everything `simulate` writes about one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportBundle {
    pub policy: String,
    pub trace_digest: String,
    pub seed: u64,
    pub cluster: ClusterSpec,
    pub config: Config,
    pub report: SimReport,
    pub rejected: Vec<(String, String)>,
    pub stats: SimStats,
}

impl ReportBundle {
    pub fn new(policy: &str, trace: &PreparedTrace, cluster: &ClusterSpec, cfg: &Config, out: &SimOutput) -> Self {
        ReportBundle {
            policy: policy.to_string(),
            trace_digest: trace.digest.clone(),
            seed: cfg.sim.rng_seed,
            cluster: *cluster,
            config: cfg.clone(),
            report: out.report.clone(),
            rejected: out.rejected.clone(),
            stats: out.stats.clone(),
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report bundles always serialize");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, EvalError> {
        serde_json::from_str(text).map_err(|e| EvalError::Corpus(format!("bad report: {e}")))
    }
}

/// `baseline_avg / candidate_avg`.
pub fn improvement_ratio(baseline_avg_jct: f64, candidate_avg_jct: f64) -> f64 {
    baseline_avg_jct / candidate_avg_jct
}

pub fn format_ratio(r: f64) -> String {
    format!("{r:.2}×")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub policy: String,
    pub avg_jct_s: f64,
    pub p99_jct_s: f64,
    pub makespan_s: f64,
    pub avg_queue_s: f64,
    /// Against the first report.
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub rows: Vec<ComparisonRow>,
    /// Every distinct JCT across reports, with each policy's CDF value there.
    pub cdf_grid: Vec<(f64, Vec<f64>)>,
}

/// Compares reports against the first one.
pub fn compare_reports(bundles: &[ReportBundle], force: bool) -> Result<Comparison, EvalError> {
    let Some(first) = bundles.first() else {
        return Err(EvalError::Corpus("no reports to compare".into()));
    };
    for b in &bundles[1..] {
        if b.trace_digest != first.trace_digest && !force {
            return Err(EvalError::TraceMismatch(first.trace_digest.clone(), b.trace_digest.clone()));
        }
    }
    let rows = bundles
        .iter()
        .map(|b| ComparisonRow {
            policy: b.policy.clone(),
            avg_jct_s: b.report.avg_jct_s,
            p99_jct_s: b.report.p99_jct_s,
            makespan_s: b.report.makespan_s,
            avg_queue_s: b.report.avg_queue_s,
            ratio: improvement_ratio(first.report.avg_jct_s, b.report.avg_jct_s),
        })
        .collect();
    let mut grid: Vec<f64> = bundles
        .iter()
        .flat_map(|b| b.report.per_job.iter().map(|r| r.jct_s as f64))
        .collect();
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    let cdf_grid = grid
        .into_iter()
        .map(|x| {
            let ys = bundles
                .iter()
                .map(|b| {
                    let n = b.report.per_job.len();
                    b.report.per_job.iter().filter(|r| r.jct_s as f64 <= x).count() as f64 / n as f64
                })
                .collect();
            (x, ys)
        })
        .collect();
    Ok(Comparison { rows, cdf_grid })
}

impl Comparison {
    /// Plain-text table, one row per report, times in hours.
    pub fn table(&self) -> String {
        let mut s = String::new();
        let w = self.rows.iter().map(|r| r.policy.len()).max().unwrap_or(6).max(6);
        let _ = writeln!(
            s,
            "{:<w$}  {:>10}  {:>10}  {:>10}  {:>10}  {:>7}",
            "policy", "avg_jct_h", "p99_jct_h", "makespan_h", "avg_queue_h", "ratio"
        );
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{:<w$}  {:>10.2}  {:>10.2}  {:>10.2}  {:>10.2}  {:>7}",
                r.policy,
                r.avg_jct_s / 3600.0,
                r.p99_jct_s / 3600.0,
                r.makespan_s / 3600.0,
                r.avg_queue_s / 3600.0,
                format_ratio(r.ratio)
            );
        }
        s
    }

    /// CSV with a `jct_s` column and one CDF column per report.
    pub fn cdf_csv(&self) -> String {
        let mut s = String::from("jct_s");
        for r in &self.rows {
            s.push(',');
            s.push_str(&r.policy);
        }
        s.push('\n');
        for (x, ys) in &self.cdf_grid {
            let _ = write!(s, "{x}");
            for y in ys {
                let _ = write!(s, ",{y}");
            }
            s.push('\n');
        }
        s
    }
}
