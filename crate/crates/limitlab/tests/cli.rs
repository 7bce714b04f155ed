use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use limitlab::report::parse_metrics_csv;

fn limitlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_limitlab")).args(args).output().unwrap()
}

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

#[test]
fn smoke_run_then_report_agree() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("smoke");
    let cfg = config("smoke.toml");
    let run = limitlab(&["run", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(run.status.code(), Some(0), "{}", String::from_utf8_lossy(&run.stdout));
    for f in ["metrics.csv", "monitors.csv", "decay.csv", "geometry.json", "summary.json", "config.toml", "metrics.svg"] {
        assert!(out.join(f).exists(), "{f} missing");
    }
    let rows = parse_metrics_csv(&std::fs::read_to_string(out.join("metrics.csv")).unwrap()).unwrap();
    assert_eq!(rows.len(), 2);
    assert!(rows.iter().all(|r| r.values.is_some()));

    let again = limitlab(&["report", out.to_str().unwrap()]);
    assert_eq!(again.status.code(), Some(0));
    assert_eq!(again.stdout, run.stdout);
}

#[test]
fn check_geometry_prints_json() {
    let out = limitlab(&["check-geometry", config("smoke.toml").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["entries"].as_array().unwrap().len(), 2);
}

#[test]
fn errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "schema = \"limitlab/0\"\n").unwrap();
    assert_eq!(limitlab(&["run", bad.to_str().unwrap()]).status.code(), Some(2));
    assert_eq!(limitlab(&["run", "/nonexistent/config.toml"]).status.code(), Some(2));
    assert_eq!(limitlab(&["report", dir.path().to_str().unwrap()]).status.code(), Some(2));
    assert_eq!(limitlab(&["decay", config("smoke.toml").to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn empty_metrics_table_is_no_data() {
    let dir = tempfile::tempdir().unwrap();
    let src = tempfile::tempdir().unwrap();
    let cfg = config("smoke.toml");
    let out = src.path().join("r");
    limitlab(&["run", cfg.to_str().unwrap(), "--no-svg", "--out", out.to_str().unwrap()]);
    for f in ["monitors.csv", "decay.csv", "config.toml"] {
        std::fs::copy(out.join(f), dir.path().join(f)).unwrap();
    }
    std::fs::write(dir.path().join("metrics.csv"), "eps,status,M1,M2,M3,M4,M5,M6\n").unwrap();
    let r = limitlab(&["report", dir.path().to_str().unwrap()]);
    assert_eq!(r.status.code(), Some(2), "{}", String::from_utf8_lossy(&r.stdout));
}
