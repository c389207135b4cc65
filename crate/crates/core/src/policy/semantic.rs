use super::{greedy, sort_by_key, FinishInfo, Policy};
use crate::advisor::{estimate_from_matches, retrieve_by_vector, AdvisorError};
use crate::backend::{Embedding, JobOutcome, StoreEntry, VectorStore};
use crate::model::{AdvisorConfig, Config, Estimate, FinalStatus};
use crate::sim::{Action, ClusterView, PreparedJob, SimError, Verdict};
use crate::triage::ErrorType;

/// History store shared by the semantic policies.
pub(crate) struct History {
    store: Option<VectorStore>,
    cfg: AdvisorConfig,
    learn: bool,
    /// Bumped on every insert.
    pub version: u64,
}

impl History {
    pub fn new(cfg: &Config, store: Option<VectorStore>) -> Self {
        History {
            store,
            cfg: cfg.advisor.clone(),
            learn: cfg.policy.learn_online,
            version: 0,
        }
    }

    pub fn lookup(&self, fp: &Embedding) -> Result<Option<Estimate>, SimError> {
        let Some(store) = &self.store else {
            return Ok(None);
        };
        let r = retrieve_by_vector(fp, store, &self.cfg)?;
        match estimate_from_matches(&r, store) {
            Ok(e) => Ok(Some(e)),
            Err(AdvisorError::NoSimilarJobs) => Ok(None),
            Err(AdvisorError::Backend(e)) => Err(e.into()),
        }
    }

    pub fn global_mean(&self) -> Option<f64> {
        let store = self.store.as_ref()?;
        if store.is_empty() {
            return None;
        }
        Some(store.iter().map(|(_, e)| e.outcome.duration_s).sum::<f64>() / store.len() as f64)
    }

    /// Stores completed jobs that carry metadata.
    pub fn record(&mut self, info: &PreparedJob, outcome: &FinishInfo) -> Result<(), SimError> {
        if !self.learn || outcome.status != FinalStatus::Completed {
            return Ok(());
        }
        let (Some(md), Some(fp)) = (&info.metadata, &info.fingerprint) else {
            return Ok(());
        };
        let store = self.store.get_or_insert_with(|| VectorStore::new(fp.dim()));
        store.upsert(
            &info.spec.job_id,
            StoreEntry {
                vector: fp.clone(),
                metadata: md.clone(),
                outcome: JobOutcome {
                    duration_s: outcome.runtime_s,
                    sm_util: Some(outcome.sm_util),
                    status: outcome.status,
                },
            },
        )?;
        self.version += 1;
        Ok(())
    }
}

/// Shortest job first on durations of semantically similar past jobs, with
/// optional automated recovery of infrastructure failures.
pub struct SemanticSjf {
    history: History,
    handler: bool,
    /// Retrieval estimate per job, with the store version it was computed at.
    estimates: Vec<Option<(u64, Option<f64>)>>,
}

impl SemanticSjf {
    pub fn new(cfg: &Config, store: Option<VectorStore>, failure_handler: bool) -> Self {
        SemanticSjf {
            history: History::new(cfg, store),
            handler: failure_handler,
            estimates: Vec::new(),
        }
    }

    fn refresh(&mut self, view: &ClusterView<'_>) -> Result<(), SimError> {
        if self.estimates.len() < view.jobs.len() {
            self.estimates.resize(view.jobs.len(), None);
        }
        for &j in &view.queue {
            let stale = match self.estimates[j] {
                None => true,
                Some((v, None)) => v != self.history.version,
                Some((_, Some(_))) => false,
            };
            if !stale {
                continue;
            }
            let est = match &view.jobs[j].fingerprint {
                Some(fp) => self.history.lookup(fp)?.map(|e| e.duration_s),
                None => None,
            };
            self.estimates[j] = Some((self.history.version, est));
        }
        Ok(())
    }
}

impl Policy for SemanticSjf {
    fn name(&self) -> &str {
        if self.handler {
            "semantic-sjf"
        } else {
            "semantic-sjf-nofh"
        }
    }

    fn handles_failures(&self) -> bool {
        self.handler
    }

    fn on_failure(&mut self, _job: usize, verdict: Verdict) -> bool {
        verdict.error_type == ErrorType::Infra
    }

    fn on_finished(&mut self, _job: usize, info: &PreparedJob, outcome: &FinishInfo) -> Result<(), SimError> {
        self.history.record(info, outcome)
    }

    fn schedule(&mut self, view: &ClusterView<'_>) -> Result<Vec<Action>, SimError> {
        self.refresh(view)?;
        let fallback = self.history.global_mean().unwrap_or(f64::INFINITY);
        let mut order = view.queue.clone();
        sort_by_key(view, &mut order, |j| {
            self.estimates[j].and_then(|(_, e)| e).unwrap_or(fallback)
        });
        Ok(greedy(view, &order))
    }
}
