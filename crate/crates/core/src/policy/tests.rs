use std::collections::BTreeMap;

use super::*;
use crate::model::{ClusterSpec, FailureKind, JobSpec, JobTruth, TraceRecord};
use crate::sim::{prepare_trace, run_simulation, PrepOptions, SimOutput};

fn job(id: &str, gpus: u32, submit: u64, dur: u64) -> TraceRecord {
    TraceRecord {
        spec: JobSpec::new(id, gpus, submit),
        truth: JobTruth::simple(dur, 50.0),
    }
}

fn run(records: &[TraceRecord], cluster: ClusterSpec, policy: &str, cfg: &Config) -> SimOutput {
    let p = prepare_trace(records, &PrepOptions::offline(cfg, None)).unwrap();
    let mut pol = build_policy(policy, cfg, None).unwrap();
    run_simulation(&p, &cluster, pol.as_mut(), cfg).unwrap()
}

fn jct(out: &SimOutput, id: &str) -> u64 {
    out.report.per_job.iter().find(|r| r.job_id == id).unwrap().jct_s
}

#[test]
fn single_job_runs_immediately() {
    let out = run(&[job("a", 4, 0, 3600)], ClusterSpec::new(1, 8), "fifo", &Config::default());
    let r = &out.report.per_job[0];
    assert_eq!((r.queue_s, r.jct_s, r.run_s), (0, 3600, 3600));
}

#[test]
fn fifo_serializes_on_one_gpu() {
    let out = run(
        &[job("a", 1, 0, 500), job("b", 1, 0, 500)],
        ClusterSpec::new(1, 1),
        "fifo",
        &Config::default(),
    );
    assert_eq!(out.report.per_job[1].queue_s, 500);
}

#[test]
fn fifo_order_with_ties() {
    let out = run(
        &[job("c", 1, 5, 10), job("a", 1, 0, 10), job("b", 1, 3, 10)],
        ClusterSpec::new(1, 1),
        "fifo",
        &Config::default(),
    );
    assert_eq!(
        (jct(&out, "a"), jct(&out, "b"), jct(&out, "c")),
        (10, 17, 25)
    );
}

#[test]
fn oracle_sjf_orders_by_duration() {
    let out = run(
        &[job("a", 1, 0, 5 * 3600), job("b", 1, 0, 3600), job("c", 1, 0, 3 * 3600)],
        ClusterSpec::new(1, 1),
        "sjf-oracle",
        &Config::default(),
    );
    assert_eq!(jct(&out, "b"), 3600);
    assert_eq!(jct(&out, "c"), 4 * 3600);
    assert_eq!(jct(&out, "a"), 9 * 3600);
}

#[test]
fn qssf_fallback_chain() {
    let mut q = Qssf::new(3600.0);
    assert_eq!(q.estimate("alice", "bert"), 3600.0);
    q.record("alice", "bert", 3600.0);
    q.record("alice", "bert", 3.0 * 3600.0);
    assert_eq!(q.estimate("alice", "bert"), 2.0 * 3600.0);
    let mut q = Qssf::new(3600.0);
    q.record("bob", "x", 4.0 * 3600.0);
    assert_eq!(q.estimate("bob", "y"), 4.0 * 3600.0);
    assert_eq!(q.estimate("carol", "y"), 4.0 * 3600.0);
}

fn infra_job(handler_cfg: &Config, policy: &str, kind: FailureKind) -> SimOutput {
    let mut r = job("a", 1, 0, 2000);
    r.truth.failure_events = vec![(1000, kind)];
    run(&[r], ClusterSpec::new(1, 1), policy, handler_cfg)
}

fn failure_cfg() -> Config {
    let mut cfg = Config::default();
    cfg.sim.checkpoint_interval_s = 600;
    cfg
}

#[test]
fn infra_failure_with_handler_resumes_from_checkpoint() {
    let cfg = failure_cfg();
    let out = infra_job(&cfg, "semantic-sjf", FailureKind::infra(crate::model::Component::Gpu));
    let r = &out.report.per_job[0];
    assert_eq!(r.jct_s, 1000 + cfg.sim.recovery_delay_s() + 1400);
    assert_eq!(r.restarts, 1);
    assert_eq!(r.final_status, FinalStatus::Completed);
    assert_eq!(out.audit[0].lost, 400 * crate::sim::UNITS);
    // The recovering job keeps its GPU.
    assert_eq!(r.queue_s, 0);
}

#[test]
fn infra_failure_without_handler_waits_for_manual_recovery() {
    let cfg = failure_cfg();
    let out = infra_job(&cfg, "semantic-sjf-nofh", FailureKind::infra(crate::model::Component::Node));
    let r = &out.report.per_job[0];
    assert_eq!(r.jct_s, 1000 + 7200 + 1400);
    assert_eq!(r.queue_s, 7200);
}

#[test]
fn user_script_failure_is_terminal() {
    for p in ["semantic-sjf", "semantic-sjf-nofh", "fifo"] {
        let out = infra_job(&failure_cfg(), p, FailureKind::user_script());
        let r = &out.report.per_job[0];
        assert_eq!((r.jct_s, r.final_status), (1000, FinalStatus::Failed), "{p}");
    }
}

fn heavy(id: &str, submit: u64, dur: u64, retention: f64) -> TraceRecord {
    let mut r = job(id, 1, submit, dur);
    r.truth.sm_util_steady = 80.0;
    r.truth.sm_util_warmup = 20.0;
    r.truth.warmup_seconds = 300;
    r.truth.pack_slowdown_table = BTreeMap::from([(8, retention)]);
    r
}

#[test]
fn lucid_packs_on_warmup_biased_profile() {
    let cfg = Config::default();
    let out = run(
        &[heavy("a", 0, 3600, 0.4), heavy("b", 0, 3600, 0.4)],
        ClusterSpec::new(2, 1),
        "lucid",
        &cfg,
    );
    assert_eq!(out.stats.packs, 1);
    // a: profiled 0..100, runs alone 100..200, packed at 0.4 for its remaining 3500 s.
    assert_eq!(jct(&out, "a"), 200 + 8750);
    // b: profiled 100..200, packed until a ends (3500 s of work), then 100 s alone.
    assert_eq!(jct(&out, "b"), 200 + 8750 + 100);
}

#[test]
fn retention_one_is_free() {
    let cfg = Config::default();
    let out = run(
        &[heavy("a", 0, 3600, 1.0), heavy("b", 0, 3600, 1.0)],
        ClusterSpec::new(2, 1),
        "lucid",
        &cfg,
    );
    assert_eq!(jct(&out, "a"), 3700);
    assert_eq!(jct(&out, "b"), 3800);
}

#[test]
fn profiler_needs_a_spare_node() {
    let cfg = Config::default();
    let p = prepare_trace(&[job("a", 1, 0, 10)], &PrepOptions::offline(&cfg, None)).unwrap();
    let mut pol = build_policy("lucid", &cfg, None).unwrap();
    let err = run_simulation(&p, &ClusterSpec::new(1, 8), pol.as_mut(), &cfg).unwrap_err();
    assert!(matches!(err, SimError::Config(_)));
}

#[test]
fn oversized_jobs_are_rejected() {
    let out = run(
        &[job("a", 16, 0, 10), job("b", 1, 0, 10)],
        ClusterSpec::new(1, 8),
        "fifo",
        &Config::default(),
    );
    assert_eq!(out.rejected.len(), 1);
    assert_eq!(out.report.per_job.len(), 1);
}

#[test]
fn tiresias_preempts_low_priority() {
    let mut cfg = Config::default();
    cfg.policy.las_promotion_gpu_s = 100;
    let out = run(
        &[job("a", 1, 0, 1000), job("b", 1, 500, 50)],
        ClusterSpec::new(1, 1),
        "tiresias",
        &cfg,
    );
    assert_eq!(jct(&out, "b"), 50);
    assert_eq!(jct(&out, "a"), 1050);
    assert_eq!(out.stats.preemptions, 1);
}

#[test]
fn unknown_policy_is_an_error() {
    assert!(build_policy("nope", &Config::default(), None).is_err());
}

#[test]
fn guest_eviction_keeps_progress() {
    // a: profiled 0..100, alone from 100. b: profiled 100..200, packed onto a at
    // 200 with retention 0.4. After 30 packed steps of a (75 s) the tracker sees
    // the slowdown and evicts b, which keeps its 30 s of work and waits for a.
    let cfg = Config::default();
    let recs = [heavy("a", 0, 3600, 0.4), heavy("b", 100, 3600, 0.4)];
    let out = run(&recs, ClusterSpec::new(2, 1), "lucid-semantic", &cfg);
    assert_eq!(out.stats.evictions, 1);
    assert_eq!(jct(&out, "a"), 275 + 3470);
    assert_eq!(jct(&out, "b") + 100, 3745 + 3570);
    let b = out.report.per_job.iter().find(|r| r.job_id == "b").unwrap();
    assert_eq!(b.evictions, 1);

    let mut cfg0 = cfg.clone();
    cfg0.sim.detection_rate = 0.0;
    let quiet = run(&recs, ClusterSpec::new(2, 1), "lucid-semantic", &cfg0);
    assert_eq!(quiet.stats.evictions, 0);
    let lucid = run(&recs, ClusterSpec::new(2, 1), "lucid", &cfg0);
    assert_eq!(quiet.report, lucid.report);
}
