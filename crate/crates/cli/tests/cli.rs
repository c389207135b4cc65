use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn semsched(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_semsched"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = semsched(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn simulate(out: &Path, policy: &str, extra: &[&str]) {
    let fx = fixtures();
    let (config, trace, cluster) = (fx.join("config.toml"), fx.join("trace/trace.csv"), fx.join("cluster.toml"));
    let mut args = vec![
        "--config",
        p(&config),
        "simulate",
        "--trace",
        p(&trace),
        "--cluster",
        p(&cluster),
        "--policy",
        policy,
        "--events",
        "--out",
        p(out),
    ];
    args.extend_from_slice(extra);
    ok(&args);
}

#[test]
fn simulate_is_byte_identical_across_runs() {
    let tmp = tempfile::tempdir().unwrap();
    for policy in ["fifo", "tiresias", "semantic-sjf", "lucid-semantic"] {
        let a = tmp.path().join(format!("{policy}-a"));
        let b = tmp.path().join(format!("{policy}-b"));
        simulate(&a, policy, &[]);
        simulate(&b, policy, &[]);
        for f in ["report.json", "jobs.csv", "events.log", "jct_cdf.csv"] {
            assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{policy} {f}");
        }
    }
}

#[test]
fn report_echoes_effective_config() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("r");
    simulate(&out, "fifo", &["--detection-rate", "0.5"]);
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(v["config"]["sim"]["checkpoint_interval_s"], 600);
    assert_eq!(v["config"]["sim"]["detection_rate"], 0.5);
    assert_eq!(v["config"]["policy"]["las_promotion_gpu_s"], 1800);
    assert_eq!(v["report"]["per_job"].as_array().unwrap().len(), 30);
}

#[test]
fn cap_gpus_clamps_requests() {
    let tmp = tempfile::tempdir().unwrap();
    let fx = fixtures();
    let out = tmp.path().join("r");
    let o = semsched(&[
        "simulate",
        "--trace",
        p(&fx.join("trace/trace.csv")),
        "--nodes",
        "1",
        "--gpus-per-node",
        "2",
        "--policy",
        "fifo",
        "--cap-gpus",
        "2",
        "--out",
        p(&out),
    ]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert!(v["rejected"].as_array().unwrap().is_empty());
}

#[test]
fn report_compares_and_refuses_foreign_traces() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("fifo");
    let b = tmp.path().join("sjf");
    simulate(&a, "fifo", &[]);
    simulate(&b, "sjf-oracle", &[]);
    let cmp = tmp.path().join("cmp");
    let o = ok(&["report", p(&a), p(&b), "--out", p(&cmp)]);
    let table = String::from_utf8(o.stdout).unwrap();
    assert_eq!(table.lines().count(), 3);
    assert!(table.lines().nth(1).unwrap().ends_with("1.00×"));
    assert!(cmp.join("cdf.csv").exists());

    // Same report against itself with a tampered digest.
    let text = fs::read_to_string(b.join("report.json")).unwrap();
    let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
    v["trace_digest"] = "other".into();
    let c = tmp.path().join("c.json");
    fs::write(&c, serde_json::to_string(&v).unwrap()).unwrap();
    let o = semsched(&["report", p(&a), p(&c)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("--force"));
    ok(&["report", p(&a), p(&c), "--force"]);
}

#[test]
fn triage_exit_code_encodes_error_type() {
    let fx = fixtures().join("failure-logs");
    let labels = fs::read_to_string(fx.join("labels.jsonl")).unwrap();
    let mut seen = 0;
    for line in labels.lines() {
        let l: serde_json::Value = serde_json::from_str(line).unwrap();
        let id = l["id"].as_str().unwrap();
        let want = match l["kind"]["category"].as_str().unwrap() {
            "INFRA" => 10,
            "FRAMEWORK" => 11,
            "USER_SCRIPT" => 12,
            other => panic!("unexpected label {other}"),
        };
        let o = semsched(&["triage", "--log", p(&fx.join("logs").join(format!("{id}.log")))]);
        assert_eq!(o.status.code(), Some(want), "{id}");
        let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
        assert_eq!(v["report"]["located_line"], l["first_error_line"], "{id}");
        assert_eq!(v["plan"]["applicable"], want == 10);
        seen += 1;
    }
    assert_eq!(seen, 24);
}

#[test]
fn triage_refuses_to_execute_plans() {
    let fx = fixtures().join("failure-logs/logs");
    let log = fs::read_dir(&fx).unwrap().next().unwrap().unwrap().path();
    let o = semsched(&["triage", "--log", p(&log), "--execute-plan", "yes"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn eval_suites_on_fixtures() {
    let fx = fixtures();
    let o = ok(&["eval", "triage", "--corpus", p(&fx.join("failure-logs"))]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["metrics"]["f1"], 1.0);
    assert_eq!(v["metrics"]["accuracy"], 1.0);
    assert_eq!(v["metrics"]["locator_exact"], 24);

    let o = ok(&["eval", "tracker", "--corpus", p(&fx.join("training-logs")), "--unfiltered"]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["metrics"]["success_rate"], 1.0);
    assert_eq!(v["metrics"]["rmsre"], 0.0);

    let o = ok(&["eval", "advisor", "--trace", p(&fx.join("trace/trace.csv")), "--mode", "oracle"]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(v["metrics"]["duration_errors"].as_array().unwrap().iter().all(|e| e == 0.0));
}

#[test]
fn track_single_log_and_packing_split() {
    let fx = fixtures().join("training-logs");
    let labels = fs::read_to_string(fx.join("labels.jsonl")).unwrap();
    let l: serde_json::Value = labels
        .lines()
        .map(|s| serde_json::from_str::<serde_json::Value>(s).unwrap())
        .find(|l| l["progress_lines"].as_u64().unwrap() >= 8)
        .unwrap();
    let log = fx.join("logs").join(format!("{}.log", l["id"].as_str().unwrap()));
    let o = ok(&["track", "--log", p(&log)]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let tp = v["throughput"].as_f64().unwrap();
    assert!((tp - 1.0 / l["step_time_s"].as_f64().unwrap()).abs() < 1e-9);

    // The same log before and after packing: rate 1, nothing to evict.
    let o = ok(&["track", "--log", p(&log), "--log-after", p(&log), "--steps-after", "100"]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["slowdown"]["decision"], "KEEP");
    assert_eq!(v["slowdown"]["slowdown_rate"], 1.0);
}

#[test]
fn advise_uses_history_and_writes_transcript() {
    let tmp = tempfile::tempdir().unwrap();
    let fx = fixtures();
    let mut rdr = csv::Reader::from_path(fx.join("trace/trace.csv")).unwrap();
    let header = rdr.headers().unwrap().clone();
    let row = rdr.records().next().unwrap().unwrap();
    let col = |name: &str| row[header.iter().position(|h| h == name).unwrap()].to_string();
    let tr = tmp.path().join("tr");
    let o = ok(&[
        "advise",
        "--workdir",
        p(&fx.join("trace").join(col("workdir"))),
        "--command",
        &col("launch_command"),
        "--history",
        p(&fx.join("history.snap")),
        "--transcripts",
        p(&tr),
    ]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(v["estimate"]["duration_s"].as_f64().unwrap() > 0.0);
    assert!(tr.join("job.jsonl").exists());
}

#[test]
fn fixtures_match_their_generators() {
    let tmp = tempfile::tempdir().unwrap();
    let fx = fixtures();
    let specs = fx.join("specs");
    for (what, spec, dir, extra) in [
        ("trace", "trace.toml", "trace", Some("--with-repos")),
        ("failure-logs", "failure_logs.toml", "failure-logs", None),
        ("logs", "training_logs.toml", "training-logs", None),
    ] {
        let out = tmp.path().join(dir);
        let spec = specs.join(spec);
        let mut args = vec!["gen", what, "--spec", p(&spec), "--seed", "7", "--out", p(&out)];
        args.extend(extra);
        ok(&args);
        assert_same_tree(&fx.join(dir), &out);
    }
    let snap = tmp.path().join("history.snap");
    let trace = fx.join("trace/trace.csv");
    ok(&["gen", "history", "--trace", p(&trace), "--out", p(&snap)]);
    assert_eq!(fs::read(fx.join("history.snap")).unwrap(), fs::read(&snap).unwrap());
}

fn assert_same_tree(want: &Path, got: &Path) {
    let mut stack = vec![PathBuf::new()];
    while let Some(rel) = stack.pop() {
        for e in fs::read_dir(want.join(&rel)).unwrap() {
            let e = e.unwrap();
            let r = rel.join(e.file_name());
            if e.file_type().unwrap().is_dir() {
                stack.push(r);
            } else {
                assert_eq!(fs::read(want.join(&r)).unwrap(), fs::read(got.join(&r)).unwrap(), "{}", r.display());
            }
        }
    }
}

#[test]
fn unknown_policy_fails() {
    let tmp = tempfile::tempdir().unwrap();
    let fx = fixtures();
    let o = semsched(&[
        "simulate",
        "--trace",
        p(&fx.join("trace/trace.csv")),
        "--nodes",
        "2",
        "--gpus-per-node",
        "8",
        "--policy",
        "nope",
        "--out",
        p(tmp.path()),
    ]);
    assert_eq!(o.status.code(), Some(1));
}
