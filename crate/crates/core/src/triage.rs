//! Failure localization by chunked binary search, root-cause classification
//! and recovery planning.

use std::cell::RefCell;
use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::backend::{BackendError, CompletionRequest, Completer, SchemaId};
use crate::model::{Component, ErrorCategory, TriageConfig};
use crate::tracker::{Category, LogClassifier};

#[derive(Debug, Error)]
pub enum TriageError {
    /// No chunk contains an error line; callers fall back to the tail window.
    #[error("no failure message located ({chunk_calls} chunk evaluations)")]
    NotLocated { chunk_calls: usize },
    #[error(transparent)]
    Backend(#[from] BackendError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Location {
    pub chunk: usize,
    /// 0-based line index.
    pub line: usize,
    pub chunk_calls: usize,
    pub num_chunks: usize,
}

/// `ceil(log2(n)) + 2`, the bound on chunk-predicate evaluations.
pub fn call_bound(num_chunks: usize) -> usize {
    let mut bits = 0;
    while (1usize << bits) < num_chunks.max(1) {
        bits += 1;
    }
    bits + 2
}

/// First-true binary search over chunks, then a linear scan inside the chunk.
///
/// Assumes chunk-level sortedness (clean chunks, then chunks with error lines).
/// When that is violated the earliest true chunk the search lands on is accepted.
pub fn locate_failure<F>(lines: &[String], is_error: F, cfg: &TriageConfig) -> Result<Location, TriageError>
where
    F: Fn(&str) -> Result<bool, BackendError>,
{
    let c = cfg.chunk_lines.max(1);
    let num_chunks = lines.len().div_ceil(c);
    let memo: RefCell<HashMap<usize, bool>> = RefCell::new(HashMap::new());
    let chunk_has_error = |k: usize| -> Result<bool, BackendError> {
        if let Some(v) = memo.borrow().get(&k) {
            return Ok(*v);
        }
        let mut v = false;
        for l in &lines[k * c..((k + 1) * c).min(lines.len())] {
            if is_error(l)? {
                v = true;
                break;
            }
        }
        memo.borrow_mut().insert(k, v);
        Ok(v)
    };

    let (mut lo, mut hi) = (0, num_chunks);
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if chunk_has_error(mid)? {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    let chunk_calls = memo.borrow().len();
    if lo == num_chunks {
        return Err(TriageError::NotLocated { chunk_calls });
    }
    let start = lo * c;
    for (i, l) in lines[start..((lo + 1) * c).min(lines.len())].iter().enumerate() {
        if is_error(l)? {
            return Ok(Location {
                chunk: lo,
                line: start + i,
                chunk_calls,
                num_chunks,
            });
        }
    }
    unreachable!("chunk {lo} evaluated true but holds no error line")
}

pub fn locate_with_classifier(
    lines: &[String],
    classifier: &LogClassifier,
    cfg: &TriageConfig,
) -> Result<Location, TriageError> {
    locate_failure(
        lines,
        |l| Ok(classifier.classify(l)?.category == Category::Error),
        cfg,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ErrorType {
    Infra,
    Framework,
    UserScript,
    Unknown,
}

impl ErrorType {
    pub fn as_str(&self) -> &'static str {
        match self {
            ErrorType::Infra => "INFRA",
            ErrorType::Framework => "FRAMEWORK",
            ErrorType::UserScript => "USER_SCRIPT",
            ErrorType::Unknown => "UNKNOWN",
        }
    }

    fn parse(s: &str) -> ErrorType {
        match s {
            "INFRA" => ErrorType::Infra,
            "FRAMEWORK" => ErrorType::Framework,
            "USER_SCRIPT" => ErrorType::UserScript,
            _ => ErrorType::Unknown,
        }
    }
}

impl From<ErrorCategory> for ErrorType {
    fn from(c: ErrorCategory) -> Self {
        match c {
            ErrorCategory::Infra => ErrorType::Infra,
            ErrorCategory::Framework => ErrorType::Framework,
            ErrorCategory::UserScript => ErrorType::UserScript,
        }
    }
}

impl fmt::Display for ErrorType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureReport {
    pub error_type: ErrorType,
    pub faulty_component: Component,
    /// `None` when the locator fell back to the tail window.
    pub located_line: Option<usize>,
    pub context_start: usize,
    pub context: Vec<String>,
    pub classifier_calls: usize,
    pub completer_calls: usize,
}

const CLASS_PROMPT: &str = "The log excerpt below comes from a distributed training job that \
crashed. Identify the root cause: the earliest message that explains the crash, not the errors \
it triggered afterwards. Reply with a JSON object {\"error_type\": one of INFRA, FRAMEWORK, \
USER_SCRIPT, UNKNOWN, \"faulty_component\": one of GPU, NVLINK, NODE, NETWORK, NONE}. INFRA means \
hardware or network trouble that a restart on healthy machines would fix; FRAMEWORK means a bug \
or incompatibility in the training framework or libraries; USER_SCRIPT means a bug in the \
user's own code or configuration.";

const COMPONENT_PROMPT: &str = "The log excerpt below shows an infrastructure failure in a \
distributed training job. Which hardware component is most likely at fault? Reply with a JSON \
object {\"faulty_component\": one of GPU, NVLINK, NODE, NETWORK}.";

/// Line range of the context window.
pub fn context_range(n: usize, located: Option<usize>, cfg: &TriageConfig) -> (usize, usize) {
    match located {
        Some(line) => {
            let w = cfg.context_window_lines;
            let start = line.saturating_sub(w / 2);
            let end = (start + w).min(n);
            (end.saturating_sub(w).min(start), end)
        }
        None => (n.saturating_sub(cfg.baseline_tail_lines), n),
    }
}

fn field(v: &Option<Value>, k: &str) -> Option<String> {
    v.as_ref()?.get(k)?.as_str().map(str::to_string)
}

fn parse_component(s: &str) -> Component {
    s.parse().unwrap_or(Component::None)
}

/// Classifies the failure from a window around `located` (or the log tail).
pub fn classify_failure(
    lines: &[String],
    located: Option<usize>,
    completer: &dyn Completer,
    cfg: &TriageConfig,
) -> Result<FailureReport, BackendError> {
    let (start, end) = context_range(lines.len(), located, cfg);
    let context: Vec<String> = lines[start..end].to_vec();
    let mut report = FailureReport {
        error_type: ErrorType::Unknown,
        faulty_component: Component::None,
        located_line: located,
        context_start: start,
        context,
        classifier_calls: 0,
        completer_calls: 0,
    };
    let text = report.context.join("\n");
    if text.trim().is_empty() {
        return Ok(report);
    }
    let first = completer.complete(&CompletionRequest::new(SchemaId::FailureClass, CLASS_PROMPT, text.clone()))?;
    report.completer_calls += 1;
    if !first.ok {
        return Ok(report);
    }
    report.error_type = ErrorType::parse(&field(&first.parsed, "error_type").unwrap_or_default());
    if report.error_type != ErrorType::Infra {
        return Ok(report);
    }
    report.faulty_component = parse_component(&field(&first.parsed, "faulty_component").unwrap_or_default());
    let second = completer.complete(&CompletionRequest::new(SchemaId::FailureComponent, COMPONENT_PROMPT, text))?;
    report.completer_calls += 1;
    if let Some(c) = field(&second.parsed, "faulty_component").filter(|_| second.ok) {
        report.faulty_component = parse_component(&c);
    }
    Ok(report)
}

/// Locate, then classify; falls back to the tail window when nothing is located.
pub fn triage_log(
    lines: &[String],
    classifier: &LogClassifier,
    completer: &dyn Completer,
    cfg: &TriageConfig,
) -> Result<FailureReport, BackendError> {
    let (located, calls) = match locate_with_classifier(lines, classifier, cfg) {
        Ok(loc) => (Some(loc.line), loc.chunk_calls),
        Err(TriageError::NotLocated { chunk_calls }) => (None, chunk_calls),
        Err(TriageError::Backend(e)) => return Err(e),
    };
    let mut r = classify_failure(lines, located, completer, cfg)?;
    r.classifier_calls = calls;
    Ok(r)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum RecoveryStep {
    RunDiagnostic,
    IsolateNode,
    ProvisionReplacement,
    RestartFromCheckpoint,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecoveryPlan {
    pub steps: Vec<RecoveryStep>,
    pub applicable: bool,
}

/// Automated recovery applies to infrastructure failures only.
pub fn plan_recovery(report: &FailureReport) -> RecoveryPlan {
    if report.error_type == ErrorType::Infra {
        RecoveryPlan {
            steps: vec![
                RecoveryStep::RunDiagnostic,
                RecoveryStep::IsolateNode,
                RecoveryStep::ProvisionReplacement,
                RecoveryStep::RestartFromCheckpoint,
            ],
            applicable: true,
        }
    } else {
        RecoveryPlan {
            steps: Vec::new(),
            applicable: false,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::MockCompleter;
    use std::cell::Cell;

    fn log(n: usize, first_error: Option<usize>) -> Vec<String> {
        (0..n)
            .map(|i| match first_error {
                Some(e) if i >= e => "ERR".to_string(),
                _ => "ok".to_string(),
            })
            .collect()
    }

    fn is_err(l: &str) -> Result<bool, BackendError> {
        Ok(l == "ERR")
    }

    #[test]
    fn large_log_within_bound() {
        let lines = log(100_000, Some(70_001));
        let cfg = TriageConfig::default();
        let loc = locate_failure(&lines, is_err, &cfg).unwrap();
        assert_eq!(loc.line, 70_001);
        assert_eq!(loc.num_chunks, 1563);
        assert!(loc.chunk_calls <= 13, "{}", loc.chunk_calls);
        assert_eq!(call_bound(1563), 13);
    }

    #[test]
    fn all_normal_and_first_line() {
        let cfg = TriageConfig::default();
        assert!(matches!(
            locate_failure(&log(1000, None), is_err, &cfg),
            Err(TriageError::NotLocated { .. })
        ));
        let loc = locate_failure(&log(1000, Some(0)), is_err, &cfg).unwrap();
        assert_eq!(loc.line, 0);
        assert!(loc.chunk_calls <= call_bound(loc.num_chunks));
        assert!(matches!(
            locate_failure(&[], is_err, &cfg),
            Err(TriageError::NotLocated { chunk_calls: 0 })
        ));
    }

    #[test]
    fn predicate_is_memoized() {
        let lines = log(640, Some(300));
        let evals = Cell::new(0);
        let cfg = TriageConfig {
            chunk_lines: 64,
            ..TriageConfig::default()
        };
        let loc = locate_failure(
            &lines,
            |l| {
                evals.set(evals.get() + 1);
                Ok(l == "ERR")
            },
            &cfg,
        )
        .unwrap();
        assert_eq!(loc.line, 300);
        assert!(loc.chunk_calls <= call_bound(10));
    }

    #[test]
    fn classify_examples() {
        let cfg = TriageConfig::default();
        let mut lines = log(400, None);
        lines[250] = "RuntimeError: CUDA error: device-side assert triggered".into();
        let r = classify_failure(&lines, Some(250), &MockCompleter, &cfg).unwrap();
        assert_eq!((r.error_type, r.faulty_component), (ErrorType::UserScript, Component::None));
        assert_eq!(r.context.len(), 200);
        assert_eq!(r.context_start, 150);

        lines[250] = "[E ProcessGroupNCCL.cpp:828] NCCL watchdog timeout on rank 5".into();
        let r = classify_failure(&lines, Some(250), &MockCompleter, &cfg).unwrap();
        assert_eq!((r.error_type, r.faulty_component), (ErrorType::Infra, Component::Network));
        assert_eq!(r.completer_calls, 2);

        let r = classify_failure(&[], None, &MockCompleter, &cfg).unwrap();
        assert_eq!((r.error_type, r.faulty_component), (ErrorType::Unknown, Component::None));
    }

    #[test]
    fn window_clamps_at_edges() {
        let cfg = TriageConfig::default();
        assert_eq!(context_range(1000, Some(10), &cfg), (0, 200));
        assert_eq!(context_range(1000, Some(995), &cfg), (800, 1000));
        assert_eq!(context_range(50, Some(25), &cfg), (0, 50));
        assert_eq!(context_range(1000, None, &cfg), (500, 1000));
    }

    #[test]
    fn recovery_plan_only_for_infra() {
        let mut r = FailureReport {
            error_type: ErrorType::Infra,
            faulty_component: Component::Gpu,
            located_line: Some(1),
            context_start: 0,
            context: vec![],
            classifier_calls: 0,
            completer_calls: 0,
        };
        let p = plan_recovery(&r);
        assert!(p.applicable);
        assert_eq!(p.steps.len(), 4);
        assert_eq!(p.steps[3], RecoveryStep::RestartFromCheckpoint);
        r.error_type = ErrorType::UserScript;
        assert_eq!(plan_recovery(&r), RecoveryPlan { steps: vec![], applicable: false });
        r.error_type = ErrorType::Unknown;
        assert!(!plan_recovery(&r).applicable);
    }
}
