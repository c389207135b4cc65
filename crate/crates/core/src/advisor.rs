//! Workload estimates from semantically similar historical jobs.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backend::{BackendError, Embedder, Embedding, JobOutcome, StoreEntry, VectorStore};
use crate::model::{AdvisorConfig, Estimate, EstimateSource, WorkloadMetadata};

#[derive(Debug, Error)]
pub enum AdvisorError {
    /// Not a failure: callers fall back to their default estimator.
    #[error("no historical job scored above the similarity threshold")]
    NoSimilarJobs,
    #[error(transparent)]
    Backend(#[from] BackendError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalResult {
    pub matches: Vec<(String, f64)>,
    pub k_found: usize,
}

pub fn fingerprint(md: &WorkloadMetadata, embedder: &dyn Embedder) -> Result<Embedding, BackendError> {
    embedder.embed(&md.canonical_text())
}

pub fn retrieve_by_vector(
    query: &Embedding,
    store: &VectorStore,
    cfg: &AdvisorConfig,
) -> Result<RetrievalResult, BackendError> {
    let matches = store.search(query, cfg.similarity_threshold, cfg.top_k)?;
    Ok(RetrievalResult {
        k_found: matches.len(),
        matches,
    })
}

pub fn retrieve_similar(
    md: &WorkloadMetadata,
    store: &VectorStore,
    embedder: &dyn Embedder,
    cfg: &AdvisorConfig,
) -> Result<RetrievalResult, BackendError> {
    retrieve_by_vector(&fingerprint(md, embedder)?, store, cfg)
}

/// Averages the outcomes of the retrieved matches.
pub fn estimate_from_matches(
    retrieval: &RetrievalResult,
    store: &VectorStore,
) -> Result<Estimate, AdvisorError> {
    let outcomes: Vec<&JobOutcome> = retrieval
        .matches
        .iter()
        .filter_map(|(id, _)| store.get(id).map(|e| &e.outcome))
        .collect();
    if outcomes.is_empty() {
        return Err(AdvisorError::NoSimilarJobs);
    }
    let duration = outcomes.iter().map(|o| o.duration_s).sum::<f64>() / outcomes.len() as f64;
    let utils: Vec<f64> = outcomes.iter().filter_map(|o| o.sm_util).collect();
    let sm_util = if utils.is_empty() {
        0.0
    } else {
        utils.iter().sum::<f64>() / utils.len() as f64
    };
    Ok(Estimate {
        duration_s: duration,
        sm_util,
        source: EstimateSource::Retrieval,
        matched_job_ids: retrieval.matches.iter().map(|(id, _)| id.clone()).collect(),
    })
}

pub fn estimate_workload(
    md: &WorkloadMetadata,
    store: &VectorStore,
    embedder: &dyn Embedder,
    cfg: &AdvisorConfig,
) -> Result<Estimate, AdvisorError> {
    let r = retrieve_similar(md, store, embedder, cfg)?;
    estimate_from_matches(&r, store)
}

/// Adds or overwrites the history entry for a finished job.
pub fn record_outcome(
    store: &mut VectorStore,
    job_id: &str,
    md: &WorkloadMetadata,
    outcome: JobOutcome,
    embedder: &dyn Embedder,
) -> Result<(), BackendError> {
    store.upsert(
        job_id,
        StoreEntry {
            vector: fingerprint(md, embedder)?,
            metadata: md.clone(),
            outcome,
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::{cosine, HashingEmbedder};
    use crate::model::FinalStatus;

    fn fig6() -> WorkloadMetadata {
        WorkloadMetadata::new("GPT", "NLP", 80000, "step", "pile", "pile-val")
    }

    fn outcome(secs: f64, util: Option<f64>, status: FinalStatus) -> JobOutcome {
        JobOutcome {
            duration_s: secs,
            sm_util: util,
            status,
        }
    }

    #[test]
    fn fingerprint_distinguishes_models() {
        let e = HashingEmbedder::default();
        let a = fingerprint(&fig6(), &e).unwrap();
        assert_eq!(a, fingerprint(&fig6(), &e).unwrap());
        let mut bert = fig6();
        bert.model_config.model_name = "BERT".into();
        let b = fingerprint(&bert, &e).unwrap();
        assert!(cosine(&a, &b).unwrap() < 1.0);
    }

    #[test]
    fn three_match_mean() {
        let e = HashingEmbedder::default();
        let mut s = VectorStore::new(e.dim);
        for (i, h) in [2.0, 4.0, 6.0].iter().enumerate() {
            record_outcome(&mut s, &format!("h{i}"), &fig6(), outcome(h * 3600.0, Some(50.0), FinalStatus::Completed), &e).unwrap();
        }
        let est = estimate_workload(&fig6(), &s, &e, &AdvisorConfig::default()).unwrap();
        assert_eq!(est.duration_s, 4.0 * 3600.0);
        assert_eq!(est.source, EstimateSource::Retrieval);
        assert_eq!(est.matched_job_ids.len(), 3);
    }

    #[test]
    fn single_match_and_empty_store() {
        let e = HashingEmbedder::default();
        let mut s = VectorStore::new(e.dim);
        assert!(matches!(
            estimate_workload(&fig6(), &s, &e, &AdvisorConfig::default()),
            Err(AdvisorError::NoSimilarJobs)
        ));
        assert_eq!(retrieve_similar(&fig6(), &s, &e, &AdvisorConfig::default()).unwrap().k_found, 0);
        record_outcome(&mut s, "a", &fig6(), outcome(3600.0, Some(60.0), FinalStatus::Completed), &e).unwrap();
        let est = estimate_workload(&fig6(), &s, &e, &AdvisorConfig::default()).unwrap();
        assert_eq!((est.duration_s, est.sm_util), (3600.0, 60.0));
        let r = retrieve_similar(&fig6(), &s, &e, &AdvisorConfig::default()).unwrap();
        assert!((r.matches[0].1 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn canceled_jobs_and_missing_utils() {
        let e = HashingEmbedder::default();
        let mut s = VectorStore::new(e.dim);
        record_outcome(&mut s, "c", &fig6(), outcome(100.0, None, FinalStatus::Canceled), &e).unwrap();
        record_outcome(&mut s, "d", &fig6(), outcome(300.0, Some(40.0), FinalStatus::Completed), &e).unwrap();
        assert_eq!(s.get("c").unwrap().outcome.status, FinalStatus::Canceled);
        let est = estimate_workload(&fig6(), &s, &e, &AdvisorConfig::default()).unwrap();
        assert_eq!(est.duration_s, 200.0);
        assert_eq!(est.sm_util, 40.0);
    }

    #[test]
    fn record_overwrites() {
        let e = HashingEmbedder::default();
        let mut s = VectorStore::new(e.dim);
        record_outcome(&mut s, "a", &fig6(), outcome(1.0, None, FinalStatus::Completed), &e).unwrap();
        record_outcome(&mut s, "a", &fig6(), outcome(9.0, None, FinalStatus::Completed), &e).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s.get("a").unwrap().outcome.duration_s, 9.0);
    }
}
