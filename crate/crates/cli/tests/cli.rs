use std::path::Path;
use std::process::{Command, Output};

use exoharness::model::InterfaceId;
use exoharness_cli::commands::MetricsDocument;
use exoharness_cli::config::ResultDocument;
use exoharness_cli::report::ComparisonReport;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_exoharness")).args(args).env("RUST_LOG", "warn").output().expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = run(args);
    assert!(out.status.success(), "{args:?} failed:\n{}", String::from_utf8_lossy(&out.stderr));
    out
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> T {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn simulate_with_anchor_impedances_is_feasible() {
    let dir = tempfile::tempdir().unwrap();
    let out = ok(&["simulate", "--out", path(dir.path())]);
    assert!(String::from_utf8_lossy(&out.stdout).contains("c = 0"));
    for f in ["trace.csv", "metrics.json", "wrenches.svg", "tracking.svg"] {
        assert!(dir.path().join(f).is_file(), "{f} missing");
    }
    let doc: MetricsDocument = read_json(&dir.path().join("metrics.json"));
    assert_eq!(doc.metrics.constraint, 0);
    assert!(doc.metrics.cost.is_finite() && doc.metrics.cost > 0.0);
    let trace = std::fs::read_to_string(dir.path().join("trace.csv")).unwrap();
    assert!(trace.starts_with("# provenance: "));
}

#[test]
fn missing_gait_file_is_reported_by_path() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("scenario.json");
    std::fs::write(&cfg, r#"{"gait": {"file": "no_such_gait.csv"}}"#).unwrap();
    let out = run(&["--config", path(&cfg), "simulate", "--out", path(&dir.path().join("o"))]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("no_such_gait.csv"), "{err}");
}

#[test]
fn unknown_config_fields_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("scenario.json");
    std::fs::write(&cfg, r#"{"harnes": "[0 1 0]"}"#).unwrap();
    let out = run(&["--config", path(&cfg), "validate-config"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("harnes"));
}

#[test]
fn validate_config_prints_the_resolved_scenario() {
    let out = ok(&["--seed", "5", "--preset", "[2 6 1]", "validate-config"]);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["seed"], 5);
    assert!(v["harness"].to_string().contains("[2 6 1]"));
    assert!(!run(&["--preset", "[9 9 9]", "validate-config"]).status.success());
}

#[test]
fn same_seed_gives_identical_outputs() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let cfg = a.path().join("noisy.json");
    std::fs::write(&cfg, r#"{"episode": {"gamma": 0.1, "snr_db": 30.0}}"#).unwrap();
    for d in [&a, &b] {
        ok(&["--config", path(&cfg), "--seed", "7", "simulate", "--out", path(&d.path().join("o"))]);
    }
    for f in ["metrics.json", "trace.csv", "wrenches.svg"] {
        let x = std::fs::read(a.path().join("o").join(f)).unwrap();
        let y = std::fs::read(b.path().join("o").join(f)).unwrap();
        assert!(x == y, "{f} differs");
    }
    ok(&["--config", path(&cfg), "--seed", "8", "simulate", "--out", path(&b.path().join("o"))]);
    assert_ne!(std::fs::read(a.path().join("o/metrics.json")).unwrap(), std::fs::read(b.path().join("o/metrics.json")).unwrap());
}

#[test]
fn short_optimization_improves_on_the_anchor_and_skips_the_pelvis() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["--preset", "[0 1 0]", "optimize", "--starts", "1", "--budget", "50", "--out", path(dir.path())]);
    let doc: ResultDocument = read_json(&dir.path().join("result.json"));
    let r = doc.result;
    assert_eq!(r.dimension, 36);
    assert!(r.variables.iter().all(|v| !v.name.contains("pelvis")));
    assert!(r.feasible && r.lambda <= r.anchor_lambda);
    for f in ["evaluations.csv", "incumbent.svg", "best_metrics.json", "best_trace.csv", "evaluations.cache"] {
        assert!(dir.path().join(f).is_file(), "{f} missing");
    }
    let log = std::fs::read_to_string(dir.path().join("evaluations.csv")).unwrap();
    assert_eq!(log.lines().count(), 2 + r.evaluations);
}

#[test]
fn interrupted_optimization_resumes_from_its_cache() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let common = ["--preset", "[0 1 0]", "optimize", "--starts", "2", "--budget", "120"];
    let mut first: Vec<&str> = common.to_vec();
    first.extend(["--max-new-evaluations", "40", "--out", path(a.path())]);
    let out = run(&first);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("resumes"));
    assert!(!a.path().join("result.json").exists());

    let mut resume: Vec<&str> = common.to_vec();
    resume.extend(["--out", path(a.path())]);
    ok(&resume);
    let mut fresh: Vec<&str> = common.to_vec();
    fresh.extend(["--out", path(b.path())]);
    ok(&fresh);
    let ra: ResultDocument = read_json(&a.path().join("result.json"));
    let rb: ResultDocument = read_json(&b.path().join("result.json"));
    assert_eq!(ra.result, rb.result);
}

#[test]
fn comparing_a_layout_with_itself_ties() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["compare", "--configs", "[2 6 1]", "[2 6 1]", "--starts", "1", "--budget", "10", "--out", path(dir.path())]);
    let report: ComparisonReport = read_json(&dir.path().join("report.json"));
    let (x, y) = (&report.rows[0], &report.rows[1]);
    assert_eq!(x.lambda, y.lambda);
    assert_eq!(x.wrench_rms, y.wrench_rms);
    for r in &report.rows {
        for w in r.wrench_rms.iter().filter(|w| matches!(w.interface, InterfaceId::ShankR | InterfaceId::ShankL)) {
            assert_eq!(w.rms, [0.0; 6], "disconnected shank carries load");
        }
    }
    for f in ["report.csv", "comparison_rms.svg", "comparison_tracking.svg"] {
        assert!(dir.path().join(f).is_file(), "{f} missing");
    }
    assert!(!run(&["compare", "--configs", "[0 1 0]", "--budget", "10"]).status.success());
}

#[test]
fn generated_gait_can_drive_a_simulation() {
    let dir = tempfile::tempdir().unwrap();
    let gait = dir.path().join("gait.csv");
    ok(&["gen-gait", "--cadence", "100", "--sample-rate", "120", "--output", path(&gait)]);
    let cfg = dir.path().join("scenario.json");
    std::fs::write(&cfg, r#"{"gait": {"file": "gait.csv"}, "harness": {"preset": "[0 1 0]"}}"#).unwrap();
    ok(&["--config", path(&cfg), "simulate", "--out", path(&dir.path().join("o"))]);
    let doc: MetricsDocument = read_json(&dir.path().join("o/metrics.json"));
    assert!(doc.metrics.diverged_at.is_none());
}

#[test]
fn jobs_zero_is_rejected() {
    assert!(!run(&["--jobs", "0", "validate-config"]).status.success());
}
