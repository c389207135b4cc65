//! Scheduling policies behind one interface.
//!
//! Every policy places jobs greedily in its own priority order and lets later
//! jobs backfill GPUs the head of the queue cannot use.

mod baseline;
mod lucid;
mod semantic;

use std::cmp::Ordering;

use crate::backend::VectorStore;
use crate::model::{Config, FinalStatus};
use crate::sim::{Action, ClusterView, PreparedJob, SimError, Verdict};

pub use baseline::{Fifo, OracleSjf, Qssf, Tiresias};
pub use lucid::{Lucid, LucidPlus};
pub use semantic::SemanticSjf;

/// Outcome handed to a policy when one of its jobs terminates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FinishInfo {
    /// Exclusive-equivalent seconds of work the job kept.
    pub runtime_s: f64,
    pub status: FinalStatus,
    pub sm_util: f64,
    pub end: u64,
}

/// Logs of a packed host around the moment its guest arrived.
#[derive(Debug, Clone, PartialEq)]
pub struct PackCheck {
    pub host: usize,
    pub guest: usize,
    pub log_before: Vec<String>,
    pub log_after: Vec<String>,
    pub steps_after: u64,
}

pub trait Policy {
    fn name(&self) -> &str;

    /// Reserves a profiler node when true.
    fn uses_profiler(&self) -> bool {
        false
    }

    fn handles_failures(&self) -> bool {
        false
    }

    fn wants_eviction_checks(&self) -> bool {
        false
    }

    /// Attained GPU-seconds at which the simulator reports a job again.
    fn service_threshold(&self) -> Option<u64> {
        None
    }

    fn on_arrival(&mut self, _job: usize, _info: &PreparedJob) -> Result<(), SimError> {
        Ok(())
    }

    fn on_profiled(&mut self, _job: usize, _observed_util: f64) {}

    fn on_finished(&mut self, _job: usize, _info: &PreparedJob, _outcome: &FinishInfo) -> Result<(), SimError> {
        Ok(())
    }

    fn schedule(&mut self, view: &ClusterView<'_>) -> Result<Vec<Action>, SimError>;

    fn on_eviction_check(&mut self, _check: &PackCheck) -> Result<Vec<Action>, SimError> {
        Ok(Vec::new())
    }

    /// Whether to recover an infrastructure failure automatically.
    fn on_failure(&mut self, _job: usize, _verdict: Verdict) -> bool {
        false
    }
}

pub const POLICY_NAMES: [&str; 8] = [
    "fifo",
    "sjf-oracle",
    "qssf",
    "tiresias",
    "lucid",
    "lucid-semantic",
    "semantic-sjf",
    "semantic-sjf-nofh",
];

/// Builds a policy by CLI name. `history` seeds the semantic policies' store.
pub fn build_policy(name: &str, cfg: &Config, history: Option<VectorStore>) -> Result<Box<dyn Policy>, SimError> {
    Ok(match name {
        "fifo" => Box::new(Fifo),
        "sjf-oracle" => Box::new(OracleSjf),
        "qssf" => Box::new(Qssf::new(cfg.policy.qssf_default_duration_s as f64)),
        "tiresias" => Box::new(Tiresias::new(cfg.policy.las_promotion_gpu_s)),
        "lucid" => Box::new(Lucid::new(cfg)),
        "lucid-semantic" => Box::new(LucidPlus::new(cfg, history)?),
        "semantic-sjf" => Box::new(SemanticSjf::new(cfg, history, true)),
        "semantic-sjf-nofh" => Box::new(SemanticSjf::new(cfg, history, false)),
        other => {
            return Err(SimError::Config(format!(
                "unknown policy {other:?}; expected one of {}",
                POLICY_NAMES.join(", ")
            )))
        }
    })
}

/// Ascending by key, then submit time, then trace order.
pub(crate) fn sort_by_key(view: &ClusterView<'_>, jobs: &mut [usize], key: impl Fn(usize) -> f64) {
    jobs.sort_by(|&a, &b| {
        key(a)
            .total_cmp(&key(b))
            .then_with(|| view.jobs[a].spec.submit_time.cmp(&view.jobs[b].spec.submit_time))
            .then(a.cmp(&b))
    });
}

/// Starts jobs in order wherever they fit.
pub(crate) fn greedy(view: &ClusterView<'_>, order: &[usize]) -> Vec<Action> {
    let mut planner = view.planner();
    order.iter().filter_map(|&j| planner.start(j)).collect()
}

pub(crate) fn cmp_f64(a: f64, b: f64) -> Ordering {
    a.total_cmp(&b)
}

#[cfg(test)]
mod tests;
