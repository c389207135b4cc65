//! The event loop.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, VecDeque};

use serde::{Deserialize, Serialize};

use super::prep::{observe_profile, PreparedJob, PreparedTrace};
use super::synth;
use super::view::{ClusterView, JobState, Phase};
use super::{Action, EventKind, SimError, UNITS};
use crate::model::{compute_report, ClusterSpec, Config, FinalStatus, JobRecord, SimReport};
use crate::policy::{FinishInfo, PackCheck, Policy};

/// Most exclusive steps shown to the tracker as the pre-packing log.
const MAX_BEFORE_STEPS: u64 = 200;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorkAudit {
    pub job_id: String,
    pub status: FinalStatus,
    /// All work credited while the job held GPUs, in micro-units.
    pub executed: u64,
    pub lost: u64,
    pub final_work: u64,
    /// Work the job must reach to terminate on its own.
    pub target_work: u64,
}

impl WorkAudit {
    pub fn holds(&self) -> bool {
        self.executed == self.final_work + self.lost && self.final_work == self.target_work
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimStats {
    pub rounds: u64,
    pub actions: u64,
    pub starts: u64,
    pub profiles: u64,
    pub packs: u64,
    pub evictions: u64,
    pub eviction_checks: u64,
    pub preemptions: u64,
    pub failures: u64,
    pub auto_recoveries: u64,
    pub manual_recoveries: u64,
    /// Seconds jobs spent waiting for the profiler node.
    pub profile_wait_s: u64,
}

#[derive(Debug, Clone)]
pub struct SimOutput {
    pub report: SimReport,
    /// Jobs that can never fit, with the reason.
    pub rejected: Vec<(String, String)>,
    /// `time KIND job detail` lines.
    pub events: Vec<String>,
    pub audit: Vec<WorkAudit>,
    pub stats: SimStats,
}

type Key = Reverse<(u64, EventKind, usize, u64)>;

struct Engine<'a> {
    jobs: &'a [PreparedJob],
    states: Vec<JobState>,
    cluster: ClusterSpec,
    cfg: &'a Config,
    reserved: Option<u32>,
    /// Job holding each GPU (the host for packed pairs).
    owner: Vec<Option<usize>>,
    heap: BinaryHeap<Key>,
    profile_fifo: VecDeque<usize>,
    now: u64,
    log: Vec<String>,
    stats: SimStats,
    las_threshold: Option<u64>,
}

fn div_ceil(a: u64, b: u64) -> u64 {
    a.div_ceil(b)
}

fn ppm(retention: f64) -> u64 {
    ((retention * UNITS as f64).round() as u64).clamp(1, UNITS)
}

impl<'a> Engine<'a> {
    fn invalid(&self, a: &Action, reason: impl Into<String>) -> SimError {
        SimError::InvalidAction {
            time: self.now,
            action: format!("{a:?}"),
            reason: reason.into(),
        }
    }

    fn id(&self, j: usize) -> &str {
        &self.jobs[j].spec.job_id
    }

    fn note(&mut self, kind: &str, j: usize, detail: String) {
        let line = format!("{} {kind} {} {detail}", self.now, self.jobs[j].spec.job_id);
        self.log.push(line.trim_end().to_string());
    }

    fn push(&mut self, t: u64, kind: EventKind, j: usize, epoch: u64) {
        self.heap.push(Reverse((t, kind, j, epoch)));
    }

    fn advance(&mut self, j: usize) {
        let now = self.now;
        let s = &mut self.states[j];
        let dt = now - s.last;
        if dt > 0 && matches!(s.phase, Phase::Running | Phase::Profiling) {
            let w = s.rate_ppm * dt;
            s.work += w;
            s.executed += w;
            if s.phase == Phase::Running {
                s.attained_gpu_s += self.jobs[j].spec.num_gpus as u64 * dt;
            }
        }
        s.last = now;
    }

    /// Work mark of the next milestone and whether it is a failure.
    fn next_mark(&self, j: usize, skip_infra: bool) -> (u64, bool) {
        let truth = &self.jobs[j].truth;
        let end = truth.true_duration * UNITS;
        truth.failure_events[self.states[j].next_failure..]
            .iter()
            .find(|(_, k)| !(skip_infra && k.is_infra()))
            .map(|(o, _)| (o * UNITS, true))
            .filter(|(m, _)| *m < end)
            .unwrap_or((end, false))
    }

    /// Pushes the next milestone of an active job under its current epoch.
    fn schedule(&mut self, j: usize) {
        let s = &self.states[j];
        let epoch = s.epoch;
        match s.phase {
            Phase::Running => {
                let (mark, fail) = self.next_mark(j, false);
                let dt = div_ceil(mark.saturating_sub(s.work), s.rate_ppm);
                let kind = if fail { EventKind::Failure } else { EventKind::JobDone };
                if let Some(thr) = self.las_threshold {
                    if s.attained_gpu_s < thr {
                        let n = self.jobs[j].spec.num_gpus as u64;
                        let t = self.now + div_ceil(thr - s.attained_gpu_s, n);
                        self.push(t, EventKind::StepProgressCheck, j, epoch);
                    }
                }
                self.push(self.now + dt, kind, j, epoch);
            }
            Phase::Profiling => {
                let (mark, fail) = self.next_mark(j, true);
                let t = self.now + div_ceil(mark.saturating_sub(s.work), s.rate_ppm);
                let pend = s.profile_end.expect("profiling job has an end");
                if t <= pend {
                    let kind = if fail { EventKind::Failure } else { EventKind::JobDone };
                    self.push(t, kind, j, epoch);
                } else {
                    self.push(pend, EventKind::ProfileDone, j, epoch);
                }
            }
            _ => {}
        }
    }

    fn bump(&mut self, j: usize) {
        self.states[j].epoch += 1;
    }

    fn hold(&mut self, j: usize) {
        self.states[j].hold_since = Some(self.now);
    }

    fn unhold(&mut self, j: usize) {
        if let Some(t) = self.states[j].hold_since.take() {
            self.states[j].run_s += self.now - t;
        }
    }

    /// Splits a packed pair; the survivor keeps running alone on its GPUs.
    fn dissolve(&mut self, j: usize) {
        let Some(p) = self.states[j].partner else {
            return;
        };
        self.advance(p);
        let leaving_host = !self.states[j].is_guest;
        for s in [j, p] {
            self.states[s].partner = None;
            self.states[s].is_guest = false;
        }
        if leaving_host {
            for g in self.states[p].gpus.clone() {
                self.owner[g as usize] = Some(p);
            }
        }
        for g in self.states[j].gpus.clone() {
            if self.owner[g as usize] == Some(j) {
                self.owner[g as usize] = None;
            }
        }
        let sp = &mut self.states[p];
        sp.rate_ppm = UNITS;
        sp.excl_since_work = sp.work;
        self.bump(p);
        self.schedule(p);
    }

    /// Gives up GPUs (or profiler slots) held by `j`.
    fn release(&mut self, j: usize) {
        self.dissolve(j);
        for g in std::mem::take(&mut self.states[j].gpus) {
            if self.owner[g as usize] == Some(j) {
                self.owner[g as usize] = None;
            }
        }
        self.unhold(j);
    }

    fn clamp_to(&mut self, j: usize, mark: u64) {
        let s = &mut self.states[j];
        if s.work > mark {
            let over = s.work - mark;
            s.work -= over;
            s.executed -= over;
        }
    }

    fn finish(&mut self, j: usize, status: FinalStatus, policy: &mut dyn Policy) -> Result<(), SimError> {
        self.release(j);
        let s = &mut self.states[j];
        s.phase = Phase::Done;
        s.end = Some(self.now);
        s.status = Some(status);
        s.epoch += 1;
        let info = FinishInfo {
            runtime_s: s.work as f64 / UNITS as f64,
            status,
            sm_util: self.jobs[j].truth.sm_util_steady,
            end: self.now,
        };
        self.note("FINISH", j, status.as_str().to_string());
        policy.on_finished(j, &self.jobs[j], &info)
    }

    fn requeue(&mut self, j: usize) {
        self.states[j].phase = Phase::Queued;
        self.bump(j);
    }

    /// Returns whether the event changed anything a policy could react to.
    fn handle(&mut self, kind: EventKind, j: usize, epoch: u64, policy: &mut dyn Policy) -> Result<bool, SimError> {
        if kind == EventKind::EvictionCheck {
            return self.eviction_check(j, epoch, policy);
        }
        if epoch != self.states[j].epoch {
            return Ok(false);
        }
        match kind {
            EventKind::Arrival => {
                self.note("ARRIVAL", j, String::new());
                policy.on_arrival(j, &self.jobs[j])?;
                self.requeue(j);
            }
            EventKind::StepProgressCheck => {
                self.advance(j);
                self.note("STEP_PROGRESS_CHECK", j, format!("attained={}", self.states[j].attained_gpu_s));
            }
            EventKind::ProfileDone => {
                self.advance(j);
                let s = &mut self.states[j];
                s.lost += s.work;
                s.work = 0;
                let util = observe_profile(&self.jobs[j].truth, self.cfg.sim.profiling_seconds);
                self.states[j].profiled_util = Some(util);
                self.states[j].profile_end = None;
                self.release(j);
                self.requeue(j);
                self.note("PROFILE_DONE", j, format!("util={util:.2}"));
                policy.on_profiled(j, util);
            }
            EventKind::JobDone => {
                self.advance(j);
                let (mark, _) = self.next_mark(j, self.states[j].phase == Phase::Profiling);
                self.clamp_to(j, mark);
                self.note("JOB_DONE", j, String::new());
                self.finish(j, self.jobs[j].truth.final_status, policy)?;
            }
            EventKind::Failure => self.failure(j, policy)?,
            EventKind::RestartReady => {
                let holding = self.states[j].phase == (Phase::Recovering { holding: true });
                self.note("RESTART_READY", j, if holding { "resume" } else { "requeue" }.to_string());
                if holding {
                    let s = &mut self.states[j];
                    s.phase = Phase::Running;
                    s.rate_ppm = UNITS;
                    s.last = self.now;
                    s.excl_since_work = s.work;
                    self.bump(j);
                    self.schedule(j);
                } else {
                    self.requeue(j);
                }
            }
            EventKind::EvictionCheck => unreachable!(),
        }
        Ok(true)
    }

    fn failure(&mut self, j: usize, policy: &mut dyn Policy) -> Result<(), SimError> {
        self.advance(j);
        let profiling = self.states[j].phase == Phase::Profiling;
        let (mark, _) = self.next_mark(j, profiling);
        self.clamp_to(j, mark);
        let idx = self.jobs[j].truth.failure_events[self.states[j].next_failure..]
            .iter()
            .position(|(o, k)| o * UNITS == mark && !(profiling && k.is_infra()))
            .map(|p| p + self.states[j].next_failure)
            .expect("failure event at mark");
        let kind = self.jobs[j].truth.failure_events[idx].1;
        let verdict = self.jobs[j].verdicts[idx];
        self.stats.failures += 1;
        self.note("FAILURE", j, format!("{kind} verdict={}/{}", verdict.error_type, verdict.component));
        if !kind.is_infra() {
            self.states[j].next_failure = idx + 1;
            return self.finish(j, FinalStatus::Failed, policy);
        }
        debug_assert!(!profiling);
        self.states[j].next_failure = idx + 1;
        let ckpt = self.cfg.sim.checkpoint_interval_s * UNITS;
        let s = &mut self.states[j];
        let kept = s.work / ckpt * ckpt;
        s.lost += s.work - kept;
        s.work = kept;
        s.restarts += 1;
        let auto = policy.handles_failures() && policy.on_failure(j, verdict);
        let packed = self.states[j].partner.is_some();
        let delay = if auto {
            self.stats.auto_recoveries += 1;
            self.cfg.sim.recovery_delay_s()
        } else {
            self.stats.manual_recoveries += 1;
            self.cfg.sim.manual_recovery_delay_s
        };
        let holding = auto && !packed;
        if holding {
            self.states[j].phase = Phase::Recovering { holding: true };
        } else {
            self.release(j);
            self.states[j].phase = Phase::Recovering { holding: false };
        }
        self.bump(j);
        let e = self.states[j].epoch;
        self.push(self.now + delay, EventKind::RestartReady, j, e);
        Ok(())
    }

    fn eviction_check(&mut self, guest: usize, pack_epoch: u64, policy: &mut dyn Policy) -> Result<bool, SimError> {
        let g = &self.states[guest];
        if !(g.is_guest && g.pack_epoch == pack_epoch && g.phase == Phase::Running) {
            return Ok(false);
        }
        let host = g.partner.expect("guest has a host");
        self.stats.eviction_checks += 1;
        let hs = &self.states[host];
        let job = &self.jobs[host];
        let work_now = hs.work + hs.rate_ppm * (self.now - hs.last);
        let step_us = ((job.truth.step_time_s * UNITS as f64).round() as u64).max(1);
        let first = hs.excl_since_work / step_us;
        let at_pack = hs.work_at_pack / step_us;
        let before_steps = (at_pack - first).min(MAX_BEFORE_STEPS);
        let after_steps = work_now / step_us - at_pack;
        let id = &job.spec.job_id;
        let log_before = synth::progress_log(
            id,
            "before",
            at_pack - before_steps,
            before_steps,
            job.truth.step_time_s,
            job.logs_progress,
        );
        let packed_step = job.truth.step_time_s * UNITS as f64 / hs.rate_ppm as f64;
        let log_after = synth::progress_log(id, "after", at_pack, after_steps, packed_step, job.logs_progress);
        let check = PackCheck {
            host,
            guest,
            log_before,
            log_after,
            steps_after: after_steps,
        };
        let actions = policy.on_eviction_check(&check)?;
        let mut changed = false;
        for a in actions {
            match a {
                Action::Evict { job } if job == guest => {
                    self.evict(guest);
                    changed = true;
                }
                Action::Noop => {}
                other => return Err(self.invalid(&other, "only EVICT of the guest is allowed at an eviction check")),
            }
        }
        self.note(
            "EVICTION_CHECK",
            guest,
            format!("host={} steps={after_steps} evict={changed}", self.id(host)),
        );
        Ok(changed)
    }

    fn evict(&mut self, guest: usize) {
        self.advance(guest);
        self.release(guest);
        let s = &mut self.states[guest];
        s.evictions += 1;
        if self.cfg.packing.no_repack_evicted {
            s.never_pack = true;
        }
        self.requeue(guest);
        self.stats.evictions += 1;
    }

    fn apply(&mut self, a: &Action, policy: &dyn Policy) -> Result<(), SimError> {
        self.stats.actions += 1;
        match a {
            Action::Noop => {}
            Action::Start { job, gpus } => {
                let j = *job;
                self.check_job(a, j)?;
                if self.states[j].phase != Phase::Queued {
                    return Err(self.invalid(a, "job is not queued"));
                }
                if gpus.len() != self.jobs[j].spec.num_gpus as usize {
                    return Err(self.invalid(a, "GPU count differs from the request"));
                }
                let mut sorted = gpus.clone();
                sorted.sort_unstable();
                sorted.dedup();
                if sorted.len() != gpus.len() {
                    return Err(self.invalid(a, "duplicate GPU"));
                }
                let gpn = self.cluster.gpus_per_node;
                for g in gpus {
                    if *g as usize >= self.owner.len() {
                        return Err(self.invalid(a, format!("GPU {g} does not exist")));
                    }
                    if Some(g / gpn) == self.reserved {
                        return Err(self.invalid(a, format!("GPU {g} is on the profiler node")));
                    }
                    if self.owner[*g as usize].is_some() {
                        return Err(self.invalid(a, format!("GPU {g} is busy")));
                    }
                }
                for g in gpus {
                    self.owner[*g as usize] = Some(j);
                }
                let now = self.now;
                let s = &mut self.states[j];
                s.gpus = gpus.clone();
                s.phase = Phase::Running;
                s.rate_ppm = UNITS;
                s.last = now;
                s.excl_since_work = s.work;
                self.hold(j);
                self.bump(j);
                self.schedule(j);
                self.stats.starts += 1;
                let list: Vec<String> = gpus.iter().map(|g| g.to_string()).collect();
                self.note("START", j, format!("gpus={}", list.join(",")));
            }
            Action::Pack { job, onto } => {
                let (j, h) = (*job, *onto);
                self.check_job(a, j)?;
                self.check_job(a, h)?;
                if j == h {
                    return Err(self.invalid(a, "cannot pack a job onto itself"));
                }
                if self.states[j].phase != Phase::Queued {
                    return Err(self.invalid(a, "job is not queued"));
                }
                if !self.states[h].is_exclusive() {
                    return Err(self.invalid(a, "host is not running alone"));
                }
                if self.states[j].never_pack || self.states[h].never_pack {
                    return Err(self.invalid(a, "job was evicted and may not be packed again"));
                }
                let n = self.jobs[j].spec.num_gpus as usize;
                if n > self.states[h].gpus.len() {
                    return Err(self.invalid(a, "guest needs more GPUs than the host holds"));
                }
                self.advance(h);
                let (tj, th) = (&self.jobs[j].truth, &self.jobs[h].truth);
                let host_rate = ppm(th.retention_against(tj.sm_util_steady));
                let guest_rate = ppm(tj.retention_against(th.sm_util_steady));
                let gpus = self.states[h].gpus[..n].to_vec();
                let now = self.now;
                {
                    let hs = &mut self.states[h];
                    hs.partner = Some(j);
                    hs.rate_ppm = host_rate;
                    hs.work_at_pack = hs.work;
                }
                let pack_epoch = {
                    let s = &mut self.states[j];
                    s.gpus = gpus;
                    s.phase = Phase::Running;
                    s.partner = Some(h);
                    s.is_guest = true;
                    s.rate_ppm = guest_rate;
                    s.last = now;
                    s.excl_since_work = s.work;
                    s.pack_epoch += 1;
                    s.pack_epoch
                };
                self.hold(j);
                for x in [h, j] {
                    self.bump(x);
                    self.schedule(x);
                }
                if policy.wants_eviction_checks() {
                    let step_us = ((th.step_time_s * UNITS as f64).round() as u64).max(1);
                    let dt = div_ceil(self.cfg.tracker.min_steps_after_pack.max(1) * step_us, host_rate);
                    self.push(now + dt, EventKind::EvictionCheck, j, pack_epoch);
                }
                self.stats.packs += 1;
                self.note(
                    "PACK",
                    j,
                    format!("onto={} rates={:.3}/{:.3}", self.id(h), host_rate as f64 / 1e6, guest_rate as f64 / 1e6),
                );
            }
            Action::Evict { job } => {
                let j = *job;
                self.check_job(a, j)?;
                if !(self.states[j].is_guest && self.states[j].phase == Phase::Running) {
                    return Err(self.invalid(a, "only a packed guest can be evicted"));
                }
                self.evict(j);
                self.note("EVICT", j, String::new());
            }
            Action::Profile { job } => {
                let j = *job;
                self.check_job(a, j)?;
                if !policy.uses_profiler() || self.reserved.is_none() {
                    return Err(self.invalid(a, "policy has no profiler"));
                }
                if self.states[j].phase != Phase::Queued {
                    return Err(self.invalid(a, "job is not queued"));
                }
                if self.states[j].profiled_util.is_some() {
                    return Err(self.invalid(a, "job was already profiled"));
                }
                if self.jobs[j].spec.num_gpus > self.cluster.gpus_per_node {
                    return Err(self.invalid(a, "job does not fit on the profiler node"));
                }
                self.states[j].phase = Phase::ProfileQueued;
                self.states[j].profile_queued_at = Some(self.now);
                self.bump(j);
                self.profile_fifo.push_back(j);
                self.stats.profiles += 1;
            }
            Action::Preempt { job } => {
                let j = *job;
                self.check_job(a, j)?;
                if !self.states[j].is_exclusive() {
                    return Err(self.invalid(a, "only a job running alone can be preempted"));
                }
                self.advance(j);
                self.release(j);
                self.states[j].preemptions += 1;
                self.requeue(j);
                self.stats.preemptions += 1;
                self.note("PREEMPT", j, String::new());
            }
        }
        Ok(())
    }

    fn check_job(&self, a: &Action, j: usize) -> Result<(), SimError> {
        if j >= self.jobs.len() {
            return Err(self.invalid(a, "unknown job"));
        }
        Ok(())
    }

    /// Starts queued profiling runs in FIFO order while the head fits.
    fn drain_profiler(&mut self) {
        let Some(node) = self.reserved else {
            return;
        };
        let gpn = self.cluster.gpus_per_node;
        while let Some(&j) = self.profile_fifo.front() {
            let n = self.jobs[j].spec.num_gpus as usize;
            let free: Vec<u32> = (node * gpn..(node + 1) * gpn)
                .filter(|g| self.owner[*g as usize].is_none())
                .take(n)
                .collect();
            if free.len() < n {
                break;
            }
            self.profile_fifo.pop_front();
            for g in &free {
                self.owner[*g as usize] = Some(j);
            }
            let now = self.now;
            let wait = now - self.states[j].profile_queued_at.take().unwrap_or(now);
            self.stats.profile_wait_s += wait;
            let s = &mut self.states[j];
            s.gpus = free;
            s.phase = Phase::Profiling;
            s.rate_ppm = UNITS;
            s.last = now;
            s.profile_end = Some(now + self.cfg.sim.profiling_seconds);
            self.hold(j);
            self.bump(j);
            self.schedule(j);
            self.note("PROFILE", j, format!("wait={wait}"));
        }
    }

    fn view(&self) -> ClusterView<'_> {
        let mut queue: Vec<usize> = (0..self.jobs.len())
            .filter(|&i| self.states[i].phase == Phase::Queued)
            .collect();
        queue.sort_by_key(|&i| (self.jobs[i].spec.submit_time, i));
        ClusterView {
            now: self.now,
            cluster: self.cluster,
            reserved_node: self.reserved,
            jobs: self.jobs,
            states: &self.states,
            queue,
            running: (0..self.jobs.len())
                .filter(|&i| self.states[i].phase == Phase::Running)
                .collect(),
        }
    }
}

/// Replays a prepared trace under `policy`.
pub fn run_simulation(
    trace: &PreparedTrace,
    cluster: &ClusterSpec,
    policy: &mut dyn Policy,
    cfg: &Config,
) -> Result<SimOutput, SimError> {
    cluster.validate()?;
    cfg.validate()?;
    let reserved = if policy.uses_profiler() {
        if cluster.nodes < 2 {
            return Err(SimError::Config(format!(
                "policy {} reserves a profiler node and needs at least 2 nodes",
                policy.name()
            )));
        }
        Some(0)
    } else {
        None
    };
    let usable = cluster.total_gpus() - reserved.map_or(0, |_| cluster.gpus_per_node);
    let jobs = &trace.jobs;
    let mut eng = Engine {
        jobs,
        states: vec![JobState::default(); jobs.len()],
        cluster: *cluster,
        cfg,
        reserved,
        owner: vec![None; cluster.total_gpus() as usize],
        heap: BinaryHeap::new(),
        profile_fifo: VecDeque::new(),
        now: 0,
        log: Vec::new(),
        stats: SimStats::default(),
        las_threshold: policy.service_threshold(),
    };
    let mut rejected = Vec::new();
    let mut accepted = vec![false; jobs.len()];
    for (i, j) in jobs.iter().enumerate() {
        if j.spec.num_gpus > usable {
            rejected.push((
                j.spec.job_id.clone(),
                format!("requests {} GPUs but only {usable} are schedulable", j.spec.num_gpus),
            ));
            continue;
        }
        accepted[i] = true;
        eng.push(j.spec.submit_time, EventKind::Arrival, i, 0);
    }
    if !accepted.iter().any(|a| *a) {
        return Err(SimError::Config("no job fits on the cluster".into()));
    }

    while let Some(Reverse((t, ..))) = eng.heap.peek().copied() {
        eng.now = t;
        let mut dirty = false;
        while let Some(&Reverse((t2, kind, j, epoch))) = eng.heap.peek() {
            if t2 != t {
                break;
            }
            eng.heap.pop();
            dirty |= eng.handle(kind, j, epoch, policy)?;
        }
        if dirty {
            eng.stats.rounds += 1;
            let actions = {
                let view = eng.view();
                policy.schedule(&view)?
            };
            for a in &actions {
                eng.apply(a, policy)?;
            }
        }
        eng.drain_profiler();
    }

    let pending = (0..jobs.len())
        .filter(|&i| accepted[i] && eng.states[i].phase != Phase::Done)
        .count();
    if pending > 0 {
        return Err(SimError::Stalled { time: eng.now, pending });
    }

    let mut per_job = Vec::new();
    let mut audit = Vec::new();
    for (i, j) in jobs.iter().enumerate() {
        if !accepted[i] {
            continue;
        }
        let s = &eng.states[i];
        let end = s.end.expect("finished");
        let status = s.status.expect("finished");
        let jct = end - j.spec.submit_time;
        per_job.push(JobRecord {
            job_id: j.spec.job_id.clone(),
            submit_s: j.spec.submit_time,
            queue_s: jct - s.run_s,
            run_s: s.run_s,
            jct_s: jct,
            end_s: end,
            restarts: s.restarts,
            evictions: s.evictions,
            final_status: status,
        });
        let target = match j.truth.failure_events.get(s.next_failure.wrapping_sub(1)) {
            Some((o, k)) if status == FinalStatus::Failed && !k.is_infra() => o * UNITS,
            _ => j.truth.true_duration * UNITS,
        };
        let a = WorkAudit {
            job_id: j.spec.job_id.clone(),
            status,
            executed: s.executed,
            lost: s.lost,
            final_work: s.work,
            target_work: target,
        };
        if !a.holds() {
            return Err(SimError::Audit(format!("{a:?}")));
        }
        audit.push(a);
    }
    Ok(SimOutput {
        report: compute_report(per_job)?,
        rejected,
        events: eng.log,
        audit,
        stats: eng.stats,
    })
}
