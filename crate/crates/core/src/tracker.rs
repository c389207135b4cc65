//! Two-stage log pipeline: embedding-based line classification, then
//! completion-based metric extraction on the few progress lines needed.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backend::{
    cosine, BackendError, CompletionRequest, Completer, Embedder, Embedding, SchemaId,
};
use crate::model::{CategoryLabels, PackingConfig, TrackerConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Category {
    Progress,
    Init,
    Warning,
    Error,
    Misc,
}

impl Category {
    pub const ALL: [Category; 5] = [
        Category::Progress,
        Category::Init,
        Category::Warning,
        Category::Error,
        Category::Misc,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Category::Progress => "PROGRESS",
            Category::Init => "INIT",
            Category::Warning => "WARNING",
            Category::Error => "ERROR",
            Category::Misc => "MISC",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogLineClass {
    pub category: Category,
    pub score: f64,
}

#[derive(Debug, Error)]
pub enum TrackerError {
    /// No line yielded a metric; callers fall back to their default behavior.
    #[error("no step-time metrics found ({completer_calls} completer calls)")]
    NoMetrics { completer_calls: usize },
    #[error("throughput of an empty sample set")]
    Empty,
    #[error(transparent)]
    Backend(#[from] BackendError),
}

pub fn label_text(labels: &CategoryLabels, c: Category) -> &str {
    match c {
        Category::Progress => &labels.progress,
        Category::Init => &labels.init,
        Category::Warning => &labels.warning,
        Category::Error => &labels.error,
        Category::Misc => &labels.misc,
    }
}

/// Nearest-label classifier over the five category vectors.
#[derive(Clone)]
pub struct LogClassifier {
    embedder: Arc<dyn Embedder>,
    vectors: Vec<(Category, Embedding)>,
    norms: Vec<f64>,
}

impl LogClassifier {
    /// Embeds each label text once.
    pub fn new(embedder: Arc<dyn Embedder>, labels: &CategoryLabels) -> Result<Self, BackendError> {
        let vectors: Vec<(Category, Embedding)> = Category::ALL
            .iter()
            .map(|&c| Ok((c, embedder.embed(label_text(labels, c))?)))
            .collect::<Result<_, BackendError>>()?;
        let norms = vectors.iter().map(|(_, v)| v.norm()).collect();
        Ok(LogClassifier {
            embedder,
            vectors,
            norms,
        })
    }

    /// Argmax category. Equal scores go to the later category in `Category::ALL`,
    /// so a line with no tokens lands on MISC.
    pub fn classify(&self, line: &str) -> Result<LogLineClass, BackendError> {
        let mut best = LogLineClass {
            category: Category::Progress,
            score: f64::NEG_INFINITY,
        };
        if let Some(sparse) = self.embedder.embed_sparse(line) {
            let norm = sparse.iter().map(|(_, w)| w * w).sum::<f64>().sqrt();
            for ((c, cv), cn) in self.vectors.iter().zip(&self.norms) {
                let s = if norm == 0.0 || *cn == 0.0 {
                    0.0
                } else {
                    let dot: f64 = sparse.iter().map(|(i, w)| w * cv.values[*i]).sum();
                    dot / (norm * cn)
                };
                if s >= best.score {
                    best = LogLineClass {
                        category: *c,
                        score: s,
                    };
                }
            }
            return Ok(best);
        }
        let v = self.embedder.embed(line)?;
        for (c, cv) in &self.vectors {
            let s = cosine(&v, cv)?;
            if s >= best.score {
                best = LogLineClass {
                    category: *c,
                    score: s,
                };
            }
        }
        Ok(best)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSample {
    pub step: Option<u64>,
    pub step_time_s: f64,
    pub line_index: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricExtraction {
    /// Chronological, outliers removed.
    pub samples: Vec<MetricSample>,
    pub completer_calls: usize,
    /// Index of the earliest line inspected by the reverse scan.
    pub scanned_from: usize,
}

const METRIC_PROMPT: &str = "Extract the training step number and the time per step from this \
log line. Reply with a JSON object {\"step\": <integer or null>, \"step_time_s\": <seconds>}. \
Convert milliseconds to seconds. If the line reports no step time, reply with {}.";

fn metric_request(line: &str) -> CompletionRequest {
    CompletionRequest::new(SchemaId::MetricLine, METRIC_PROMPT, line)
}

fn sample_from(
    completer: &dyn Completer,
    line: &str,
    index: usize,
) -> Result<Option<MetricSample>, BackendError> {
    if line.trim().is_empty() {
        return Ok(None);
    }
    let r = completer.complete(&metric_request(line))?;
    if !r.ok {
        return Ok(None);
    }
    let p = r.parsed.unwrap_or_default();
    let t = match p.get("step_time_s").and_then(|v| v.as_f64()) {
        Some(t) if t > 0.0 => t,
        _ => return Ok(None),
    };
    Ok(Some(MetricSample {
        step: p.get("step").and_then(|v| v.as_u64()),
        step_time_s: t,
        line_index: index,
    }))
}

/// Newest-first scan over PROGRESS lines, stopping after `max_metric_lines` successes.
pub fn extract_metrics(
    lines: &[String],
    classifier: &LogClassifier,
    completer: &dyn Completer,
    cfg: &TrackerConfig,
) -> Result<MetricExtraction, TrackerError> {
    let mut samples = Vec::new();
    let mut calls = 0;
    let mut scanned_from = lines.len();
    for (i, line) in lines.iter().enumerate().rev() {
        if samples.len() >= cfg.max_metric_lines {
            break;
        }
        scanned_from = i;
        if classifier.classify(line)?.category != Category::Progress {
            continue;
        }
        calls += 1;
        if let Some(s) = sample_from(completer, line, i)? {
            samples.push(s);
        }
    }
    finish(samples, calls, scanned_from, cfg)
}

/// Baseline without the classifier stage: the completer sees every line.
pub fn extract_metrics_unfiltered(
    lines: &[String],
    completer: &dyn Completer,
    cfg: &TrackerConfig,
) -> Result<MetricExtraction, TrackerError> {
    let mut samples = Vec::new();
    let mut calls = 0;
    for (i, line) in lines.iter().enumerate().rev() {
        if line.trim().is_empty() {
            continue;
        }
        calls += 1;
        if let Some(s) = sample_from(completer, line, i)? {
            if samples.len() < cfg.max_metric_lines {
                samples.push(s);
            }
        }
    }
    finish(samples, calls, 0, cfg)
}

fn finish(
    mut samples: Vec<MetricSample>,
    calls: usize,
    scanned_from: usize,
    cfg: &TrackerConfig,
) -> Result<MetricExtraction, TrackerError> {
    if samples.is_empty() {
        return Err(TrackerError::NoMetrics {
            completer_calls: calls,
        });
    }
    samples.reverse();
    Ok(MetricExtraction {
        samples: mad_filter(samples, cfg.outlier_mad_k),
        completer_calls: calls,
        scanned_from,
    })
}

pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    })
}

/// Keeps samples with `|x - median| <= k * MAD` (raw, unscaled MAD).
pub fn mad_filter(samples: Vec<MetricSample>, k: f64) -> Vec<MetricSample> {
    let times: Vec<f64> = samples.iter().map(|s| s.step_time_s).collect();
    let Some(m) = median(&times) else {
        return samples;
    };
    let devs: Vec<f64> = times.iter().map(|t| (t - m).abs()).collect();
    let mad = median(&devs).unwrap_or(0.0);
    samples
        .into_iter()
        .filter(|s| (s.step_time_s - m).abs() <= k * mad)
        .collect()
}

/// Median step time of the samples.
pub fn median_step_time(samples: &[MetricSample]) -> Result<f64, TrackerError> {
    let times: Vec<f64> = samples.iter().map(|s| s.step_time_s).collect();
    median(&times).ok_or(TrackerError::Empty)
}

/// Steps per second: `1 / median(step_time)`.
pub fn throughput(samples: &[MetricSample]) -> Result<f64, TrackerError> {
    Ok(1.0 / median_step_time(samples)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum PackDecision {
    Keep,
    Evict,
    Untrackable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlowdownReport {
    pub tp_before: Option<f64>,
    pub tp_after: Option<f64>,
    pub slowdown_rate: Option<f64>,
    pub decision: PackDecision,
    pub completer_calls: usize,
}

impl SlowdownReport {
    fn untrackable(calls: usize) -> Self {
        SlowdownReport {
            tp_before: None,
            tp_after: None,
            slowdown_rate: None,
            decision: PackDecision::Untrackable,
            completer_calls: calls,
        }
    }
}

/// KEEP/EVICT from two throughputs.
pub fn decide(tp_before: f64, tp_after: f64, packing: &PackingConfig) -> (f64, PackDecision) {
    let rate = tp_after / tp_before;
    let d = if rate < packing.slowdown_rate_threshold {
        PackDecision::Evict
    } else {
        PackDecision::Keep
    };
    (rate, d)
}

/// Compares throughput before and after packing.
pub fn assess_packing(
    log_before: &[String],
    log_after: &[String],
    steps_completed_after_pack: u64,
    classifier: &LogClassifier,
    completer: &dyn Completer,
    tracker: &TrackerConfig,
    packing: &PackingConfig,
) -> Result<SlowdownReport, BackendError> {
    if steps_completed_after_pack < tracker.min_steps_after_pack {
        return Ok(SlowdownReport::untrackable(0));
    }
    let before = match extract_metrics(log_before, classifier, completer, tracker) {
        Ok(x) => x,
        Err(TrackerError::Backend(e)) => return Err(e),
        Err(TrackerError::NoMetrics { completer_calls }) => {
            return Ok(SlowdownReport::untrackable(completer_calls))
        }
        Err(TrackerError::Empty) => return Ok(SlowdownReport::untrackable(0)),
    };
    let after = match extract_metrics(log_after, classifier, completer, tracker) {
        Ok(x) => x,
        Err(TrackerError::Backend(e)) => return Err(e),
        Err(TrackerError::NoMetrics { completer_calls }) => {
            return Ok(SlowdownReport::untrackable(
                before.completer_calls + completer_calls,
            ))
        }
        Err(TrackerError::Empty) => return Ok(SlowdownReport::untrackable(before.completer_calls)),
    };
    let calls = before.completer_calls + after.completer_calls;
    let (Ok(tb), Ok(ta)) = (throughput(&before.samples), throughput(&after.samples)) else {
        return Ok(SlowdownReport::untrackable(calls));
    };
    let (rate, decision) = decide(tb, ta, packing);
    Ok(SlowdownReport {
        tp_before: Some(tb),
        tp_after: Some(ta),
        slowdown_rate: Some(rate),
        decision,
        completer_calls: calls,
    })
}
