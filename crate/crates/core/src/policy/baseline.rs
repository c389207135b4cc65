use std::collections::BTreeMap;

use super::{greedy, sort_by_key, FinishInfo, Policy};
use crate::sim::{runtime_s, Action, ClusterView, Phase, PreparedJob, SimError};

/// Submission order.
pub struct Fifo;

impl Policy for Fifo {
    fn name(&self) -> &str {
        "fifo"
    }

    fn schedule(&mut self, view: &ClusterView<'_>) -> Result<Vec<Action>, SimError> {
        Ok(greedy(view, &view.queue))
    }
}

/// Shortest job first on the true runtime.
pub struct OracleSjf;

impl Policy for OracleSjf {
    fn name(&self) -> &str {
        "sjf-oracle"
    }

    fn schedule(&mut self, view: &ClusterView<'_>) -> Result<Vec<Action>, SimError> {
        let mut order = view.queue.clone();
        sort_by_key(view, &mut order, |j| runtime_s(&view.jobs[j].truth) as f64);
        Ok(greedy(view, &order))
    }
}

/// Shortest job first on the mean runtime of earlier jobs from the same user and job name.
pub struct Qssf {
    default_s: f64,
    by_name: BTreeMap<(String, String), (f64, usize)>,
    by_user: BTreeMap<String, (f64, usize)>,
    global: (f64, usize),
}

fn add(acc: &mut (f64, usize), x: f64) {
    acc.0 += x;
    acc.1 += 1;
}

fn mean(acc: &(f64, usize)) -> Option<f64> {
    (acc.1 > 0).then(|| acc.0 / acc.1 as f64)
}

impl Qssf {
    pub fn new(default_s: f64) -> Self {
        Qssf {
            default_s,
            by_name: BTreeMap::new(),
            by_user: BTreeMap::new(),
            global: (0.0, 0),
        }
    }

    pub fn record(&mut self, user: &str, job_name: &str, duration_s: f64) {
        add(self.by_name.entry((user.to_string(), job_name.to_string())).or_default(), duration_s);
        add(self.by_user.entry(user.to_string()).or_default(), duration_s);
        add(&mut self.global, duration_s);
    }

    pub fn estimate(&self, user: &str, job_name: &str) -> f64 {
        self.by_name
            .get(&(user.to_string(), job_name.to_string()))
            .and_then(mean)
            .or_else(|| self.by_user.get(user).and_then(mean))
            .or_else(|| mean(&self.global))
            .unwrap_or(self.default_s)
    }
}

impl Policy for Qssf {
    fn name(&self) -> &str {
        "qssf"
    }

    fn on_finished(&mut self, _job: usize, info: &PreparedJob, outcome: &FinishInfo) -> Result<(), SimError> {
        self.record(&info.spec.user, &info.spec.job_name, outcome.runtime_s);
        Ok(())
    }

    fn schedule(&mut self, view: &ClusterView<'_>) -> Result<Vec<Action>, SimError> {
        let mut order = view.queue.clone();
        sort_by_key(view, &mut order, |j| {
            let s = &view.jobs[j].spec;
            self.estimate(&s.user, &s.job_name)
        });
        Ok(greedy(view, &order))
    }
}

/// Two-level least-attained-service with preemption of low-priority jobs.
pub struct Tiresias {
    threshold: u64,
}

impl Tiresias {
    pub fn new(threshold_gpu_s: u64) -> Self {
        Tiresias {
            threshold: threshold_gpu_s.max(1),
        }
    }

    fn high(&self, view: &ClusterView<'_>, j: usize) -> bool {
        view.states[j].attained_gpu_s < self.threshold
    }
}

impl Policy for Tiresias {
    fn name(&self) -> &str {
        "tiresias"
    }

    fn service_threshold(&self) -> Option<u64> {
        Some(self.threshold)
    }

    fn schedule(&mut self, view: &ClusterView<'_>) -> Result<Vec<Action>, SimError> {
        let mut order = view.queue.clone();
        order.sort_by_key(|&j| (!self.high(view, j), view.jobs[j].spec.submit_time, j));
        let mut planner = view.planner();
        let mut actions = Vec::new();
        // Low-priority running jobs, most served first.
        let mut victims: Vec<usize> = view
            .running
            .iter()
            .copied()
            .filter(|&j| !self.high(view, j) && view.states[j].is_exclusive())
            .collect();
        victims.sort_by_key(|&j| (std::cmp::Reverse(view.states[j].attained_gpu_s), j));
        for j in order {
            if let Some(a) = planner.start(j) {
                actions.push(a);
                continue;
            }
            if !self.high(view, j) {
                continue;
            }
            let need = view.num_gpus(j);
            let mut freeable = planner.free_gpus();
            let mut take = 0;
            while freeable < need && take < victims.len() {
                freeable += view.states[victims[take]].gpus.len() as u32;
                take += 1;
            }
            if freeable < need {
                continue;
            }
            for v in victims.drain(..take) {
                actions.push(planner.preempt(v, &view.states[v].gpus));
            }
            if let Some(a) = planner.start(j) {
                actions.push(a);
            }
        }
        debug_assert!(actions.iter().all(|a| match a {
            Action::Preempt { job } => view.states[*job].phase == Phase::Running,
            _ => true,
        }));
        Ok(actions)
    }
}
