use std::io::Write;

use serde::{Deserialize, Serialize};

use super::job::FinalStatus;
use super::ModelError;

/// Outcome of one simulated job.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JobRecord {
    pub job_id: String,
    pub submit_s: u64,
    pub queue_s: u64,
    pub run_s: u64,
    pub jct_s: u64,
    pub end_s: u64,
    pub restarts: u32,
    pub evictions: u32,
    pub final_status: FinalStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub per_job: Vec<JobRecord>,
    pub avg_jct_s: f64,
    pub p99_jct_s: f64,
    pub makespan_s: f64,
    pub avg_queue_s: f64,
    /// `(jct_s, cumulative fraction)` at every distinct JCT.
    pub jct_cdf: Vec<(f64, f64)>,
}

/// Nearest-rank percentile: the `ceil(q * n)`-th smallest value.
pub fn nearest_rank(sorted: &[u64], q: f64) -> u64 {
    assert!(!sorted.is_empty());
    let n = sorted.len();
    let rank = ((q * n as f64).ceil() as usize).clamp(1, n);
    sorted[rank - 1]
}

pub fn compute_report(per_job: Vec<JobRecord>) -> Result<SimReport, ModelError> {
    if per_job.is_empty() {
        return Err(ModelError::Invalid("report over zero jobs is undefined".into()));
    }
    for r in &per_job {
        if r.run_s == 0 {
            return Err(ModelError::Invalid(format!("job {} has run_s = 0", r.job_id)));
        }
        if r.jct_s != r.queue_s + r.run_s {
            return Err(ModelError::Invalid(format!(
                "job {}: jct {} != queue {} + run {}",
                r.job_id, r.jct_s, r.queue_s, r.run_s
            )));
        }
    }
    let n = per_job.len() as f64;
    let mut jcts: Vec<u64> = per_job.iter().map(|r| r.jct_s).collect();
    jcts.sort_unstable();
    let avg_jct_s = jcts.iter().map(|&j| j as f64).sum::<f64>() / n;
    let avg_queue_s = per_job.iter().map(|r| r.queue_s as f64).sum::<f64>() / n;
    let makespan_s = per_job.iter().map(|r| r.end_s).max().unwrap_or(0) as f64;
    let p99_jct_s = nearest_rank(&jcts, 0.99) as f64;

    let mut jct_cdf = Vec::new();
    for (i, &j) in jcts.iter().enumerate() {
        let is_last_of_value = i + 1 == jcts.len() || jcts[i + 1] != j;
        if is_last_of_value {
            jct_cdf.push((j as f64, (i + 1) as f64 / n));
        }
    }
    Ok(SimReport {
        per_job,
        avg_jct_s,
        p99_jct_s,
        makespan_s,
        avg_queue_s,
        jct_cdf,
    })
}

impl SimReport {
    /// Flat CSV, one row per job.
    pub fn write_jobs_csv<W: Write>(&self, writer: W) -> Result<(), ModelError> {
        let mut w = csv::Writer::from_writer(writer);
        for r in &self.per_job {
            w.serialize(r).map_err(|e| ModelError::Io(e.to_string()))?;
        }
        w.flush().map_err(|e| ModelError::Io(e.to_string()))
    }

    pub fn jobs_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_jobs_csv(&mut buf).expect("in-memory csv");
        String::from_utf8(buf).expect("csv is utf-8")
    }

    pub fn check_invariants(&self) -> Result<(), ModelError> {
        let recomputed = compute_report(self.per_job.clone())?;
        if (recomputed.avg_jct_s - self.avg_jct_s).abs() > 1e-9 {
            return Err(ModelError::Invalid("avg_jct does not match per-job mean".into()));
        }
        let mut prev = 0.0;
        for &(_, f) in &self.jct_cdf {
            if f < prev {
                return Err(ModelError::Invalid("CDF decreases".into()));
            }
            prev = f;
        }
        if (prev - 1.0).abs() > 1e-12 {
            return Err(ModelError::Invalid("CDF does not end at 1.0".into()));
        }
        Ok(())
    }
}

/// Root mean squared relative error over `(estimate, truth)` pairs.
pub fn rmsre(pairs: &[(f64, f64)]) -> Result<f64, ModelError> {
    if pairs.is_empty() {
        return Err(ModelError::Invalid("rmsre over zero pairs".into()));
    }
    let mut acc = 0.0;
    for &(est, truth) in pairs {
        if !(truth > 0.0) {
            return Err(ModelError::Invalid(format!("truth value {truth} is not > 0")));
        }
        let rel = (est - truth) / truth;
        acc += rel * rel;
    }
    Ok((acc / pairs.len() as f64).sqrt())
}

/// `|est - truth| / truth` for each pair.
pub fn relative_errors(pairs: &[(f64, f64)]) -> Result<Vec<f64>, ModelError> {
    pairs
        .iter()
        .map(|&(est, truth)| {
            if truth > 0.0 {
                Ok((est - truth).abs() / truth)
            } else {
                Err(ModelError::Invalid(format!("truth value {truth} is not > 0")))
            }
        })
        .collect()
}

/// Empirical CDF points `(value, fraction <= value)` at every distinct value.
pub fn empirical_cdf(values: &[f64]) -> Vec<(f64, f64)> {
    let mut v: Vec<f64> = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    let mut out = Vec::new();
    for i in 0..v.len() {
        if i + 1 == v.len() || v[i + 1] != v[i] {
            out.push((v[i], (i + 1) as f64 / n));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(id: &str, submit: u64, queue: u64, run: u64) -> JobRecord {
        JobRecord {
            job_id: id.into(),
            submit_s: submit,
            queue_s: queue,
            run_s: run,
            jct_s: queue + run,
            end_s: submit + queue + run,
            restarts: 0,
            evictions: 0,
            final_status: FinalStatus::Completed,
        }
    }

    #[test]
    fn mean_and_makespan() {
        let r = compute_report(vec![rec("a", 0, 0, 3600), rec("b", 100, 0, 3 * 3600)]).unwrap();
        assert_eq!(r.avg_jct_s, 2.0 * 3600.0);
        assert_eq!(r.makespan_s, (100 + 3 * 3600) as f64);
        assert_eq!(r.jct_cdf, vec![(3600.0, 0.5), (10800.0, 1.0)]);
        r.check_invariants().unwrap();
    }

    #[test]
    fn p99_by_full_sort_oracle() {
        // 100 jobs with JCT i hours, shuffled order.
        let mut jobs: Vec<JobRecord> = (1..=100u64)
            .map(|i| rec(&format!("j{i}"), 0, 0, i * 3600))
            .collect();
        jobs.reverse();
        jobs.swap(3, 70);
        let r = compute_report(jobs.clone()).unwrap();
        let mut sorted: Vec<u64> = jobs.iter().map(|j| j.jct_s).collect();
        sorted.sort();
        let oracle = sorted[(0.99f64 * 100.0).ceil() as usize - 1];
        assert_eq!(r.p99_jct_s, oracle as f64);
        assert_eq!(r.p99_jct_s, 99.0 * 3600.0);
    }

    #[test]
    fn queue_plus_run_decomposition() {
        // 2.71 h queue + 2.82 h run.
        let queue = (2.71 * 3600.0f64).round() as u64;
        let run = (2.82 * 3600.0f64).round() as u64;
        let r = compute_report(vec![rec("x", 0, queue, run)]).unwrap();
        assert!((r.avg_jct_s / 3600.0 - 5.53).abs() < 1e-9);
        assert!((r.avg_queue_s / 3600.0 - 2.71).abs() < 1e-9);
    }

    #[test]
    fn empty_report_is_error() {
        assert!(compute_report(vec![]).is_err());
    }

    #[test]
    fn rmsre_examples() {
        assert_eq!(rmsre(&[(100.0, 100.0)]).unwrap(), 0.0);
        assert_eq!(rmsre(&[(150.0, 100.0)]).unwrap(), 0.5);
        assert_eq!(rmsre(&[(150.0, 100.0), (50.0, 100.0)]).unwrap(), 0.5);
        assert!(rmsre(&[(1.0, 0.0)]).is_err());
    }

    #[test]
    fn cdf_collapses_ties() {
        assert_eq!(
            empirical_cdf(&[0.0, 0.0, 1.0, 0.5]),
            vec![(0.0, 0.5), (0.5, 0.75), (1.0, 1.0)]
        );
    }
}
