use std::sync::Arc;

use super::semantic::History;
use super::{cmp_f64, sort_by_key, FinishInfo, PackCheck, Policy};
use crate::backend::{HashingEmbedder, MockCompleter, VectorStore};
use crate::model::{Config, PackingConfig, TrackerConfig};
use crate::sim::{Action, ClusterView, PreparedJob, SimError};
use crate::tracker::{assess_packing, LogClassifier, PackDecision};

/// Profile new jobs, order by estimated duration, start exclusively when
/// possible and otherwise pack onto a running job under the utilization cap.
fn plan(
    view: &ClusterView<'_>,
    cap: f64,
    util: impl Fn(usize) -> Option<f64>,
    needs_profile: impl Fn(usize) -> bool,
    estimate: impl Fn(usize) -> f64,
) -> Vec<Action> {
    let gpn = view.cluster.gpus_per_node;
    let mut actions = Vec::new();
    let mut ready = Vec::new();
    for &j in &view.queue {
        if needs_profile(j) && view.num_gpus(j) <= gpn {
            actions.push(Action::Profile { job: j });
        } else {
            ready.push(j);
        }
    }
    sort_by_key(view, &mut ready, &estimate);
    let mut planner = view.planner();
    for j in ready {
        if let Some(a) = planner.start(j) {
            actions.push(a);
            continue;
        }
        let Some(uj) = util(j).filter(|_| !view.states[j].never_pack) else {
            continue;
        };
        let host = planner
            .hosts()
            .filter(|&h| planner.can_pack(j, h))
            .filter_map(|h| util(h).map(|uh| (uj + uh, h)))
            .filter(|(sum, _)| *sum <= cap)
            .min_by(|a, b| cmp_f64(a.0, b.0).then(a.1.cmp(&b.1)));
        if let Some((_, h)) = host {
            actions.extend(planner.pack(j, h));
        }
    }
    actions
}

/// Packing scheduler driven by profiled utilization and a noisy duration estimator.
pub struct Lucid {
    cap: f64,
}

impl Lucid {
    pub fn new(cfg: &Config) -> Self {
        Lucid {
            cap: cfg.packing.pack_util_cap,
        }
    }
}

impl Policy for Lucid {
    fn name(&self) -> &str {
        "lucid"
    }

    fn uses_profiler(&self) -> bool {
        true
    }

    fn schedule(&mut self, view: &ClusterView<'_>) -> Result<Vec<Action>, SimError> {
        Ok(plan(
            view,
            self.cap,
            |j| view.states[j].profiled_util,
            |j| view.states[j].profiled_util.is_none(),
            |j| view.jobs[j].lucid_estimate_s,
        ))
    }
}

/// Lucid with history lookups in place of profiling where a similar job is
/// known, and slowdown-based eviction of packed guests.
pub struct LucidPlus {
    cap: f64,
    history: History,
    /// (duration, utilization) from the history store, fixed at arrival.
    advised: Vec<Option<(f64, f64)>>,
    classifier: LogClassifier,
    tracker: TrackerConfig,
    packing: PackingConfig,
    pub completer_calls: usize,
}

impl LucidPlus {
    pub fn new(cfg: &Config, store: Option<VectorStore>) -> Result<Self, SimError> {
        Ok(LucidPlus {
            cap: cfg.packing.pack_util_cap,
            history: History::new(cfg, store),
            advised: Vec::new(),
            classifier: LogClassifier::new(Arc::new(HashingEmbedder::default()), &cfg.tracker.category_labels)?,
            tracker: cfg.tracker.clone(),
            packing: cfg.packing.clone(),
            completer_calls: 0,
        })
    }

    fn advised(&self, j: usize) -> Option<(f64, f64)> {
        self.advised.get(j).copied().flatten()
    }
}

impl Policy for LucidPlus {
    fn name(&self) -> &str {
        "lucid-semantic"
    }

    fn uses_profiler(&self) -> bool {
        true
    }

    fn wants_eviction_checks(&self) -> bool {
        true
    }

    fn on_arrival(&mut self, job: usize, info: &PreparedJob) -> Result<(), SimError> {
        if self.advised.len() <= job {
            self.advised.resize(job + 1, None);
        }
        if let Some(fp) = &info.fingerprint {
            self.advised[job] = self.history.lookup(fp)?.map(|e| (e.duration_s, e.sm_util));
        }
        Ok(())
    }

    fn on_finished(&mut self, _job: usize, info: &PreparedJob, outcome: &FinishInfo) -> Result<(), SimError> {
        self.history.record(info, outcome)
    }

    fn on_eviction_check(&mut self, check: &PackCheck) -> Result<Vec<Action>, SimError> {
        let r = assess_packing(
            &check.log_before,
            &check.log_after,
            check.steps_after,
            &self.classifier,
            &MockCompleter,
            &self.tracker,
            &self.packing,
        )?;
        self.completer_calls += r.completer_calls;
        Ok(match r.decision {
            PackDecision::Evict => vec![Action::Evict { job: check.guest }],
            PackDecision::Keep | PackDecision::Untrackable => Vec::new(),
        })
    }

    fn schedule(&mut self, view: &ClusterView<'_>) -> Result<Vec<Action>, SimError> {
        Ok(plan(
            view,
            self.cap,
            |j| self.advised(j).map(|a| a.1).or(view.states[j].profiled_util),
            |j| self.advised(j).is_none() && view.states[j].profiled_util.is_none(),
            |j| self.advised(j).map_or(view.jobs[j].lucid_estimate_s, |a| a.0),
        ))
    }
}
