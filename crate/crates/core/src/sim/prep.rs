//! Trace preparation: every stochastic or backend-dependent input of a run.
//!
//! The event engine never sees the seed. Detection sampling and the noisy
//! baseline estimator draw from per-(seed, job) streams here, and semantic
//! lookups (metadata, fingerprints, failure verdicts) are resolved up front so
//! the event loop never waits on a backend.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use statrs::distribution::{ContinuousCDF, Normal};

use super::synth;
use super::SimError;
use crate::backend::{Completer, Embedder, Embedding, HashingEmbedder, MockCompleter};
use crate::extractor::{resolve_metadata, write_transcript, AgentBudget};
use crate::model::{
    serialize_trace, CategoryLabels, Component, Config, FailureKind, FinalStatus, JobSpec,
    JobTruth, TraceRecord, TriageConfig, WorkloadMetadata,
};
use crate::tracker::LogClassifier;
use crate::triage::{triage_log, ErrorType};

/// Failure-handler verdict for one failure event.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub error_type: ErrorType,
    pub component: Component,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PreparedJob {
    pub spec: JobSpec,
    /// Failure events sorted by offset.
    pub truth: JobTruth,
    /// Whether this job's progress is visible to the tracker in this run.
    pub logs_progress: bool,
    /// Estimate of the noisy learned-estimator baseline.
    pub lucid_estimate_s: f64,
    pub metadata: Option<WorkloadMetadata>,
    pub fingerprint: Option<Embedding>,
    /// One verdict per failure event.
    pub verdicts: Vec<Verdict>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PreparedTrace {
    /// Sorted by job id.
    pub jobs: Vec<PreparedJob>,
    /// SHA-256 of the canonical trace serialization.
    pub digest: String,
    /// Jobs whose metadata could not be resolved, with the reason.
    pub metadata_errors: Vec<(String, String)>,
}

impl PreparedTrace {
    pub fn index_of(&self, job_id: &str) -> Option<usize> {
        self.jobs.binary_search_by(|j| j.spec.job_id.as_str().cmp(job_id)).ok()
    }
}

pub struct PrepOptions<'a> {
    pub seed: u64,
    pub detection_rate: f64,
    pub lucid_sigma: f64,
    pub lucid_within_2x: f64,
    /// Directory that relative trace paths resolve against; `None` skips metadata.
    pub base_dir: Option<&'a Path>,
    pub embedder: Arc<dyn Embedder>,
    pub completer: Arc<dyn Completer>,
    pub triage: TriageConfig,
    pub labels: CategoryLabels,
    pub budget: AgentBudget,
    pub transcripts_dir: Option<PathBuf>,
}

impl<'a> PrepOptions<'a> {
    /// Offline backends and the knobs from `cfg`.
    pub fn offline(cfg: &Config, base_dir: Option<&'a Path>) -> Self {
        PrepOptions {
            seed: cfg.sim.rng_seed,
            detection_rate: cfg.sim.detection_rate,
            lucid_sigma: cfg.policy.lucid_noise_sigma,
            lucid_within_2x: cfg.policy.lucid_within_2x,
            base_dir,
            embedder: Arc::new(HashingEmbedder::default()),
            completer: Arc::new(MockCompleter),
            triage: cfg.triage.clone(),
            labels: cfg.tracker.category_labels.clone(),
            budget: AgentBudget::default(),
            transcripts_dir: None,
        }
    }
}

/// Exclusive seconds the job runs before it terminates on its own.
pub fn runtime_s(truth: &JobTruth) -> u64 {
    truth
        .failure_events
        .iter()
        .filter(|(_, k)| !k.is_infra())
        .map(|(o, _)| *o)
        .min()
        .unwrap_or(truth.true_duration)
}

/// Utilization a profiler sees over `[0, t_prof]`.
pub fn observe_profile(truth: &JobTruth, t_prof: u64) -> f64 {
    if t_prof == 0 {
        return truth.sm_util_steady;
    }
    let w = truth.warmup_seconds.min(t_prof) as f64;
    let t = t_prof as f64;
    (w * truth.sm_util_warmup + (t - w) * truth.sm_util_steady) / t
}

/// Log-space offset that puts `within_2x` of estimates below twice the truth.
pub fn lucid_mu(sigma: f64, within_2x: f64) -> f64 {
    let z = Normal::new(0.0, 1.0).expect("standard normal").inverse_cdf(within_2x);
    std::f64::consts::LN_2 - sigma * z
}

fn stream(seed: u64, purpose: &str, job_id: &str) -> ChaCha8Rng {
    let h = Sha256::digest(format!("{seed}/{purpose}/{job_id}").as_bytes());
    let mut b = [0u8; 8];
    b.copy_from_slice(&h[..8]);
    ChaCha8Rng::seed_from_u64(u64::from_le_bytes(b))
}

/// Uniform draw deciding whether the job's progress is observable.
pub fn detection_draw(seed: u64, job_id: &str) -> f64 {
    use rand::Rng;
    stream(seed, "detect", job_id).random::<f64>()
}

pub fn trace_digest(records: &[TraceRecord]) -> Result<String, SimError> {
    let mut buf = Vec::new();
    serialize_trace(records, &mut buf)?;
    Ok(hex::encode(Sha256::digest(&buf)))
}

type Resolved = Result<(WorkloadMetadata, Embedding), String>;

fn resolve(
    spec: &JobSpec,
    base: &Path,
    opts: &PrepOptions<'_>,
    cache: &mut BTreeMap<String, Resolved>,
) -> Option<Resolved> {
    let key = match (&spec.metadata_path, &spec.workdir, &spec.launch_command) {
        (Some(p), _, _) => format!("md:{}", p.display()),
        (None, Some(w), Some(c)) => format!("wd:{}\u{0}{c}", w.display()),
        _ => return None,
    };
    if let Some(r) = cache.get(&key) {
        return Some(r.clone());
    }
    let r = match resolve_metadata(spec, base, opts.completer.as_ref(), &opts.budget) {
        Ok((md, steps)) => {
            if let (Some(dir), Some(steps)) = (&opts.transcripts_dir, &steps) {
                if let Err(e) = write_transcript(dir, &spec.job_id, steps) {
                    log::warn!("transcript for {}: {e}", spec.job_id);
                }
            }
            opts.embedder
                .embed(&md.canonical_text())
                .map(|fp| (md, fp))
                .map_err(|e| e.to_string())
        }
        Err(e) => Err(e.to_string()),
    };
    cache.insert(key, r.clone());
    Some(r)
}

pub fn prepare_trace(records: &[TraceRecord], opts: &PrepOptions<'_>) -> Result<PreparedTrace, SimError> {
    if !(0.0..=1.0).contains(&opts.detection_rate) {
        return Err(SimError::Config("detection_rate must be in [0,1]".into()));
    }
    let mut seen = std::collections::BTreeSet::new();
    for r in records {
        r.validate()?;
        if !seen.insert(r.spec.job_id.as_str()) {
            return Err(SimError::Prep(format!("duplicate job_id {}", r.spec.job_id)));
        }
    }
    let digest = trace_digest(records)?;
    let mu = lucid_mu(opts.lucid_sigma, opts.lucid_within_2x);
    let classifier = LogClassifier::new(opts.embedder.clone(), &opts.labels)?;
    let mut cache = BTreeMap::new();
    let mut verdict_cache: BTreeMap<(String, usize), Verdict> = BTreeMap::new();
    let mut metadata_errors = Vec::new();
    let mut jobs = Vec::with_capacity(records.len());

    let mut sorted: Vec<&TraceRecord> = records.iter().collect();
    sorted.sort_by(|a, b| a.spec.job_id.cmp(&b.spec.job_id));
    for r in sorted {
        let id = &r.spec.job_id;
        let mut truth = r.truth.clone();
        truth.failure_events.sort();

        let logs_progress = truth.logs_progress && detection_draw(opts.seed, id) < opts.detection_rate;
        let z: f64 = StandardNormal.sample(&mut stream(opts.seed, "lucid", id));
        let lucid_estimate_s = runtime_s(&truth) as f64 * (mu + opts.lucid_sigma * z).exp();

        let (metadata, fingerprint) = match opts.base_dir.and_then(|b| resolve(&r.spec, b, opts, &mut cache)) {
            Some(Ok((md, fp))) => (Some(md), Some(fp)),
            Some(Err(e)) => {
                log::warn!("metadata for {id}: {e}");
                metadata_errors.push((id.clone(), e));
                (None, None)
            }
            None => (None, None),
        };

        let mut verdicts = Vec::with_capacity(truth.failure_events.len());
        for (k, (_, kind)) in truth.failure_events.iter().enumerate() {
            let key = (id.clone(), k);
            let v = match verdict_cache.get(&key) {
                Some(v) => *v,
                None => {
                    let doc = synth::failure_log(id, k, *kind);
                    let rep = triage_log(&doc.lines, &classifier, opts.completer.as_ref(), &opts.triage)?;
                    let v = Verdict {
                        error_type: rep.error_type,
                        component: rep.faulty_component,
                    };
                    verdict_cache.insert(key, v);
                    v
                }
            };
            verdicts.push(v);
        }

        jobs.push(PreparedJob {
            spec: r.spec.clone(),
            truth,
            logs_progress,
            lucid_estimate_s,
            metadata,
            fingerprint,
            verdicts,
        });
    }
    Ok(PreparedTrace {
        jobs,
        digest,
        metadata_errors,
    })
}

/// True outcome of a failure event, for harnesses that check verdicts.
pub fn expected_verdict(kind: FailureKind) -> Verdict {
    Verdict {
        error_type: kind.category.into(),
        component: kind.component,
    }
}

/// Final status a job reaches if it runs to its own end.
pub fn natural_status(truth: &JobTruth) -> FinalStatus {
    if truth.failure_events.iter().any(|(_, k)| !k.is_infra()) {
        FinalStatus::Failed
    } else {
        truth.final_status
    }
}
