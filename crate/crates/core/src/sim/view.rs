//! What a policy sees of the cluster, and a scratch allocator for planning.

use std::collections::BTreeSet;

use super::prep::PreparedJob;
use super::Action;
use crate::model::{ClusterSpec, FinalStatus};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    /// Not yet submitted.
    Waiting,
    Queued,
    /// Waiting for the profiler node.
    ProfileQueued,
    Profiling,
    Running,
    /// Between a failure and RESTART_READY. `holding` jobs keep their GPUs.
    Recovering { holding: bool },
    Done,
}

/// Per-job simulator state. Work is in micro-units, rates in parts per million.
#[derive(Debug, Clone, PartialEq)]
pub struct JobState {
    pub phase: Phase,
    pub work: u64,
    pub rate_ppm: u64,
    /// Time `work` was last brought up to date.
    pub last: u64,
    /// Bumped whenever pending events for this job become stale.
    pub epoch: u64,
    pub gpus: Vec<u32>,
    pub partner: Option<usize>,
    pub is_guest: bool,
    pub pack_epoch: u64,
    pub never_pack: bool,
    pub profiled_util: Option<f64>,
    pub profile_queued_at: Option<u64>,
    pub profile_end: Option<u64>,
    /// Index of the next failure event not yet triggered.
    pub next_failure: usize,
    pub restarts: u32,
    pub evictions: u32,
    pub preemptions: u32,
    /// All work ever credited, including work later lost.
    pub executed: u64,
    pub lost: u64,
    pub run_s: u64,
    pub hold_since: Option<u64>,
    /// Work at the start of the current exclusive stint.
    pub excl_since_work: u64,
    pub work_at_pack: u64,
    pub attained_gpu_s: u64,
    pub end: Option<u64>,
    pub status: Option<FinalStatus>,
}

impl Default for JobState {
    fn default() -> Self {
        JobState {
            phase: Phase::Waiting,
            work: 0,
            rate_ppm: 0,
            last: 0,
            epoch: 0,
            gpus: Vec::new(),
            partner: None,
            is_guest: false,
            pack_epoch: 0,
            never_pack: false,
            profiled_util: None,
            profile_queued_at: None,
            profile_end: None,
            next_failure: 0,
            restarts: 0,
            evictions: 0,
            preemptions: 0,
            executed: 0,
            lost: 0,
            run_s: 0,
            hold_since: None,
            excl_since_work: 0,
            work_at_pack: 0,
            attained_gpu_s: 0,
            end: None,
            status: None,
        }
    }
}

impl JobState {
    /// Running alone on its GPUs.
    pub fn is_exclusive(&self) -> bool {
        self.phase == Phase::Running && self.partner.is_none()
    }
}

pub struct ClusterView<'a> {
    pub now: u64,
    pub cluster: ClusterSpec,
    pub reserved_node: Option<u32>,
    pub jobs: &'a [PreparedJob],
    pub states: &'a [JobState],
    /// Queued jobs by (submit_time, job_id).
    pub queue: Vec<usize>,
    pub running: Vec<usize>,
}

impl<'a> ClusterView<'a> {
    pub fn num_gpus(&self, job: usize) -> u32 {
        self.jobs[job].spec.num_gpus
    }

    pub fn planner(&self) -> Planner {
        Planner::new(self)
    }
}

/// Tentative allocation used while a policy builds its action list.
#[derive(Debug, Clone)]
pub struct Planner {
    gpn: u32,
    free: Vec<bool>,
    hosts: BTreeSet<usize>,
    sizes: Vec<u32>,
}

impl Planner {
    pub fn new(view: &ClusterView<'_>) -> Self {
        let gpn = view.cluster.gpus_per_node;
        let total = view.cluster.total_gpus() as usize;
        let mut free = vec![true; total];
        if let Some(r) = view.reserved_node {
            for g in r * gpn..(r + 1) * gpn {
                free[g as usize] = false;
            }
        }
        let mut hosts = BTreeSet::new();
        for (i, s) in view.states.iter().enumerate() {
            for g in &s.gpus {
                free[*g as usize] = false;
            }
            if s.is_exclusive() && !s.never_pack && !s.gpus.is_empty() {
                hosts.insert(i);
            }
        }
        Planner {
            gpn,
            free,
            hosts,
            sizes: view.jobs.iter().map(|j| j.spec.num_gpus).collect(),
        }
    }

    pub fn free_gpus(&self) -> u32 {
        self.free.iter().filter(|f| **f).count() as u32
    }

    /// Best-fit node for `n` GPUs, else any free GPUs in index order.
    pub fn place(&self, n: u32) -> Option<Vec<u32>> {
        if n == 0 || self.free_gpus() < n {
            return None;
        }
        let nodes = self.free.len() as u32 / self.gpn;
        let mut best: Option<(u32, u32)> = None;
        for node in 0..nodes {
            let f = (node * self.gpn..(node + 1) * self.gpn).filter(|g| self.free[*g as usize]).count() as u32;
            if f >= n && best.is_none_or(|(bf, _)| f < bf) {
                best = Some((f, node));
            }
        }
        let range = match best {
            Some((_, node)) => node * self.gpn..(node + 1) * self.gpn,
            None => 0..self.free.len() as u32,
        };
        Some(range.filter(|g| self.free[*g as usize]).take(n as usize).collect())
    }

    pub fn start(&mut self, job: usize) -> Option<Action> {
        let gpus = self.place(self.sizes[job])?;
        for g in &gpus {
            self.free[*g as usize] = false;
        }
        Some(Action::Start { job, gpus })
    }

    /// Running exclusive jobs that can still take a guest this round.
    pub fn hosts(&self) -> impl Iterator<Item = usize> + '_ {
        self.hosts.iter().copied()
    }

    pub fn can_pack(&self, job: usize, onto: usize) -> bool {
        self.hosts.contains(&onto) && self.sizes[job] <= self.sizes[onto]
    }

    pub fn pack(&mut self, job: usize, onto: usize) -> Option<Action> {
        if !self.can_pack(job, onto) {
            return None;
        }
        self.hosts.remove(&onto);
        Some(Action::Pack { job, onto })
    }

    /// Frees the GPUs of a running job.
    pub fn preempt(&mut self, job: usize, gpus: &[u32]) -> Action {
        for g in gpus {
            self.free[*g as usize] = true;
        }
        self.hosts.remove(&job);
        Action::Preempt { job }
    }
}
