//! Labeled training and failure logs.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::vocab::{self, ProgressStyle};
use super::CorpusError;
use crate::model::{Component, FailureKind, LogDocument};

/// Shape of one training log.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingLogSpec {
    pub progress_lines: usize,
    pub style: ProgressStyle,
    pub step_time_ms: u32,
    pub noisy: bool,
    pub init_lines: usize,
    /// Noise lines emitted after each progress line when `noisy`.
    pub noise_block: (usize, usize),
    pub warning_prob: f64,
    pub log_interval: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingLabel {
    pub id: String,
    pub step_time_s: f64,
    pub progress_lines: usize,
    pub noisy: bool,
}

impl TrainingLabel {
    /// Whether the log carries enough progress lines for a full metric scan.
    pub fn qualifies(&self, n: usize) -> bool {
        self.progress_lines >= n
    }
}

pub fn gen_training_log<R: Rng + ?Sized>(spec: &TrainingLogSpec, rng: &mut R) -> LogDocument {
    let mut lines = Vec::new();
    for _ in 0..spec.init_lines {
        lines.push(vocab::init_line(rng));
    }
    let total = spec.progress_lines as u64 * spec.log_interval + spec.log_interval * 10;
    for i in 0..spec.progress_lines {
        if rng.random_bool(spec.warning_prob) {
            lines.push(vocab::warning_line(rng));
        }
        let step = (i as u64 + 1) * spec.log_interval;
        lines.push(vocab::progress_line(rng, spec.style, step, total, spec.step_time_ms));
        if spec.noisy {
            let n = rng.random_range(spec.noise_block.0..=spec.noise_block.1);
            for _ in 0..n {
                lines.push(vocab::noise_line(rng));
            }
        }
    }
    if spec.progress_lines == 0 && spec.noisy {
        let n = rng.random_range(spec.noise_block.0..=spec.noise_block.1);
        for _ in 0..n {
            lines.push(vocab::noise_line(rng));
        }
    }
    LogDocument::new(lines)
}

/// Shape of a training-log corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingCorpusSpec {
    pub num_logs: usize,
    pub noisy_fraction: f64,
    /// Fraction of logs that print no progress at all.
    pub silent_fraction: f64,
    pub progress_lines: (usize, usize),
    pub step_time_ms: (u32, u32),
    pub noise_block: (usize, usize),
    pub init_lines: (usize, usize),
    pub warning_prob: f64,
}

impl Default for TrainingCorpusSpec {
    fn default() -> Self {
        TrainingCorpusSpec {
            num_logs: 1000,
            noisy_fraction: 0.5,
            silent_fraction: 0.05,
            progress_lines: (1, 60),
            step_time_ms: (80, 3000),
            noise_block: (10, 60),
            init_lines: (5, 40),
            warning_prob: 0.05,
        }
    }
}

pub fn gen_training_corpus(spec: &TrainingCorpusSpec, seed: u64) -> Vec<(LogDocument, TrainingLabel)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..spec.num_logs)
        .map(|i| {
            let silent = rng.random_bool(spec.silent_fraction);
            let log_spec = TrainingLogSpec {
                progress_lines: if silent {
                    0
                } else {
                    rng.random_range(spec.progress_lines.0..=spec.progress_lines.1)
                },
                style: *ProgressStyle::ALL.choose(&mut rng).unwrap(),
                step_time_ms: rng.random_range(spec.step_time_ms.0..=spec.step_time_ms.1),
                noisy: rng.random_bool(spec.noisy_fraction),
                init_lines: rng.random_range(spec.init_lines.0..=spec.init_lines.1),
                noise_block: spec.noise_block,
                warning_prob: spec.warning_prob,
                log_interval: *[1u64, 10, 20, 50].choose(&mut rng).unwrap(),
            };
            let doc = gen_training_log(&log_spec, &mut rng);
            let label = TrainingLabel {
                id: format!("train-{i:05}"),
                step_time_s: f64::from(log_spec.step_time_ms) / 1000.0,
                progress_lines: log_spec.progress_lines,
                noisy: log_spec.noisy,
            };
            (doc, label)
        })
        .collect()
}

/// Shape of one failure log.
#[derive(Debug, Clone, PartialEq)]
pub struct FailureLogSpec {
    pub len: usize,
    pub first_error: usize,
    pub kind: FailureKind,
    /// Probability that a cascade line is a benign stack frame.
    pub interleave: f64,
    /// Longest run of benign lines allowed inside the cascade.
    pub max_benign_run: usize,
    /// Without a cascade the log ends at the first error line.
    pub cascade: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureLabel {
    pub id: String,
    pub first_error_line: usize,
    pub kind: FailureKind,
    pub len: usize,
}

/// Normal training output followed by the root-cause line and its cascade.
pub fn gen_failure_log<R: Rng + ?Sized>(spec: &FailureLogSpec, rng: &mut R) -> LogDocument {
    let first = spec.first_error.min(spec.len.saturating_sub(1));
    let end = if spec.cascade { spec.len.max(first + 1) } else { first + 1 };
    let style = *ProgressStyle::ALL.choose(rng).unwrap();
    let step_ms = vocab::num(rng, 80, 3000);
    let mut lines = Vec::with_capacity(end);
    let mut step = 0u64;
    for i in 0..first {
        let line = if i < 20 {
            vocab::init_line(rng)
        } else {
            match rng.random_range(0..100) {
                0..=49 => {
                    step += 1;
                    vocab::progress_line(rng, style, step, 1_000_000, step_ms)
                }
                50..=52 => vocab::warning_line(rng),
                _ => vocab::noise_line(rng),
            }
        };
        lines.push(line);
    }
    lines.push(vocab::root_cause_line(rng, spec.kind));
    let mut run = 0;
    for i in first + 1..end {
        let last = i + 1 == end;
        if !last && run < spec.max_benign_run && rng.random_bool(spec.interleave) {
            lines.push(vocab::benign_cascade_line(rng));
            run += 1;
        } else {
            lines.push(vocab::cascade_line(rng));
            run = 0;
        }
    }
    LogDocument::new(lines)
}

/// Shape of a failure-log corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FailureCorpusSpec {
    pub num_logs: usize,
    pub num_infra: usize,
    pub len: (usize, usize),
    /// First error position as a fraction of the log length.
    pub first_error: (f64, f64),
    pub interleave: f64,
    pub max_benign_run: usize,
    /// Fraction of logs whose cascade contains no benign lines.
    pub pure_cascade_fraction: f64,
    /// Fraction of logs that end at the first error line.
    pub no_cascade_fraction: f64,
}

impl Default for FailureCorpusSpec {
    fn default() -> Self {
        FailureCorpusSpec {
            num_logs: 300,
            num_infra: 75,
            len: (100, 100_000),
            first_error: (0.05, 0.95),
            interleave: 0.1,
            max_benign_run: 12,
            pure_cascade_fraction: 0.3,
            no_cascade_fraction: 0.1,
        }
    }
}

impl FailureCorpusSpec {
    pub fn validate(&self) -> Result<(), CorpusError> {
        if self.num_infra > self.num_logs {
            return Err(CorpusError::Spec("num_infra exceeds num_logs".into()));
        }
        if self.len.0 == 0 || self.len.0 > self.len.1 {
            return Err(CorpusError::Spec("len range must be 1 <= lo <= hi".into()));
        }
        let (a, b) = self.first_error;
        if !(0.0..=1.0).contains(&a) || !(a..=1.0).contains(&b) {
            return Err(CorpusError::Spec("first_error range must lie in [0,1]".into()));
        }
        if !(0.0..=1.0).contains(&self.interleave) {
            return Err(CorpusError::Spec("interleave must be in [0,1]".into()));
        }
        Ok(())
    }
}

pub fn gen_failure_corpus(
    spec: &FailureCorpusSpec,
    seed: u64,
) -> Result<Vec<(LogDocument, FailureLabel)>, CorpusError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(spec.num_logs);
    for i in 0..spec.num_logs {
        let kind = if i < spec.num_infra {
            FailureKind::infra(Component::HARDWARE[i % Component::HARDWARE.len()])
        } else if i % 2 == 0 {
            FailureKind::framework()
        } else {
            FailureKind::user_script()
        };
        let (lo, hi) = (spec.len.0 as f64, spec.len.1 as f64);
        let len = (lo * (hi / lo).powf(rng.random::<f64>())).round() as usize;
        let frac = rng.random_range(spec.first_error.0..=spec.first_error.1);
        let first_error = ((len as f64 * frac) as usize).min(len - 1);
        let r: f64 = rng.random();
        let log_spec = FailureLogSpec {
            len,
            first_error,
            kind,
            interleave: if r < spec.pure_cascade_fraction { 0.0 } else { spec.interleave },
            max_benign_run: spec.max_benign_run,
            cascade: r >= 1.0 - spec.no_cascade_fraction,
        };
        let doc = gen_failure_log(&log_spec, &mut rng);
        let label = FailureLabel {
            id: format!("fail-{i:05}"),
            first_error_line: first_error,
            kind,
            len: doc.len(),
        };
        out.push((doc, label));
    }
    Ok(out)
}

/// Writes `logs/<id>.log` files plus a `labels.jsonl` index.
pub fn write_corpus<L: Serialize + HasId>(dir: &Path, items: &[(LogDocument, L)]) -> Result<(), CorpusError> {
    let logs = dir.join("logs");
    fs::create_dir_all(&logs)?;
    let mut index = fs::File::create(dir.join("labels.jsonl"))?;
    for (doc, label) in items {
        fs::write(logs.join(format!("{}.log", label.id())), doc.to_text())?;
        let line = serde_json::to_string(label).map_err(|e| CorpusError::Format(e.to_string()))?;
        writeln!(index, "{line}")?;
    }
    Ok(())
}

pub fn read_corpus<L: for<'de> Deserialize<'de> + HasId>(dir: &Path) -> Result<Vec<(LogDocument, L)>, CorpusError> {
    let index = fs::File::open(dir.join("labels.jsonl"))?;
    let mut out = Vec::new();
    for (n, line) in BufReader::new(index).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let label: L = serde_json::from_str(&line)
            .map_err(|e| CorpusError::Format(format!("labels.jsonl line {}: {e}", n + 1)))?;
        let doc = LogDocument::from_file(&dir.join("logs").join(format!("{}.log", label.id())))
            .map_err(|e| CorpusError::Format(e.to_string()))?;
        out.push((doc, label));
    }
    Ok(out)
}

pub trait HasId {
    fn id(&self) -> &str;
}

impl HasId for TrainingLabel {
    fn id(&self) -> &str {
        &self.id
    }
}

impl HasId for FailureLabel {
    fn id(&self) -> &str {
        &self.id
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::mock::{first_failure_signature, parse_metric_line};
    use crate::backend::HashingEmbedder;
    use crate::model::CategoryLabels;
    use crate::tracker::{Category, LogClassifier};
    use std::sync::Arc;

    fn classifier() -> LogClassifier {
        LogClassifier::new(Arc::new(HashingEmbedder::default()), &CategoryLabels::default()).unwrap()
    }

    #[test]
    fn progress_values_parse_back_exactly() {
        let spec = TrainingCorpusSpec {
            num_logs: 60,
            ..Default::default()
        };
        let c = classifier();
        for (doc, label) in gen_training_corpus(&spec, 5) {
            let mut found = 0;
            for l in &doc.lines {
                if c.classify(l).unwrap().category == Category::Progress {
                    let (_, t) = parse_metric_line(l).expect(l);
                    assert_eq!(t, label.step_time_s, "{l}");
                    found += 1;
                }
            }
            assert_eq!(found, label.progress_lines, "{}", label.id);
        }
    }

    #[test]
    fn failure_log_labels_hold() {
        let spec = FailureCorpusSpec {
            num_logs: 40,
            num_infra: 10,
            len: (100, 3000),
            ..Default::default()
        };
        let c = classifier();
        for (doc, label) in gen_failure_corpus(&spec, 9).unwrap() {
            let first = doc
                .lines
                .iter()
                .position(|l| c.classify(l).unwrap().category == Category::Error);
            assert_eq!(first, Some(label.first_error_line), "{}", label.id);
            assert_eq!(c.classify(doc.lines.last().unwrap()).unwrap().category, Category::Error);
            let lo = label.first_error_line.saturating_sub(100);
            let window = doc.lines[lo..(lo + 200).min(doc.len())].join("\n");
            assert_eq!(
                first_failure_signature(&window),
                Some((label.kind.category, label.kind.component))
            );
        }
    }

    #[test]
    fn benign_runs_are_bounded() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let spec = FailureLogSpec {
            len: 5000,
            first_error: 100,
            kind: FailureKind::user_script(),
            interleave: 0.9,
            max_benign_run: 5,
            cascade: true,
        };
        let doc = gen_failure_log(&spec, &mut rng);
        let c = classifier();
        let mut run = 0;
        for l in &doc.lines[100..] {
            if c.classify(l).unwrap().category == Category::Error {
                run = 0;
            } else {
                run += 1;
                assert!(run <= 5);
            }
        }
    }

    #[test]
    fn corpus_round_trips_through_disk() {
        let dir = tempfile::tempdir().unwrap();
        let items = gen_failure_corpus(
            &FailureCorpusSpec {
                num_logs: 5,
                num_infra: 2,
                len: (50, 200),
                ..Default::default()
            },
            3,
        )
        .unwrap();
        write_corpus(dir.path(), &items).unwrap();
        let back: Vec<(LogDocument, FailureLabel)> = read_corpus(dir.path()).unwrap();
        assert_eq!(back, items);
    }
}
