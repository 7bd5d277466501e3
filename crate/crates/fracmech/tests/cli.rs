//! End-to-end tests of the command-line binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn problem(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("problems").join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fracmech"))
        .args(args)
        .output()
        .expect("binary runs")
}

#[test]
fn derive_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "derive",
        problem("example2.json").to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("1/2*p0_1^2"), "stdout: {stdout}");
    let report = std::fs::read_to_string(dir.path().join("example2.report.json")).unwrap();
    let json: serde_json::Value = serde_json::from_str(&report).unwrap();
    assert_eq!(json["derivation"]["hessian_rank"], 1);
    assert_eq!(json["derivation"]["primary_constraints"].as_array().unwrap().len(), 1);
}

#[test]
fn constraints_reports_closure() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "constraints",
        problem("example3.json").to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
        "--format",
        "json",
    ]);
    assert!(out.status.success());
    let report = std::fs::read_to_string(dir.path().join("example3.report.json")).unwrap();
    let json: serde_json::Value = serde_json::from_str(&report).unwrap();
    let c = &json["constraints"];
    assert_eq!(c["closed"], true);
    assert_eq!(c["passes"], 2);
    assert_eq!(c["primary"].as_array().unwrap().len(), 2);
    assert_eq!(c["secondary"].as_array().unwrap().len(), 1);
}

#[test]
fn solve_classical_order_is_accurate() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "solve",
        problem("example1.json").to_str().unwrap(),
        "--m",
        "512",
        "--alpha",
        "1",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let report = std::fs::read_to_string(dir.path().join("example1.report.json")).unwrap();
    let json: serde_json::Value = serde_json::from_str(&report).unwrap();
    let residual = json["solve"]["residual"].as_f64().unwrap();
    assert!(residual <= 1e-9, "residual {residual}");

    let csv = std::fs::read_to_string(dir.path().join("example1.trajectory.csv")).unwrap();
    let mut lines = csv.lines();
    let header = lines.next().unwrap();
    assert!(header.starts_with("t,"));
    assert!(header.ends_with(",residual"));
    assert_eq!(lines.count(), 513);
}

#[test]
fn check_passes_on_bundled_problems() {
    for name in ["example1.json", "example2.json", "example3.json"] {
        let out = run(&["check", problem(name).to_str().unwrap()]);
        assert!(out.status.success(), "{name}: {}", String::from_utf8_lossy(&out.stderr));
        let stdout = String::from_utf8(out.stdout).unwrap();
        assert!(!stdout.contains("FAIL"), "{name} stdout: {stdout}");
    }
}

#[test]
fn limit_study_writes_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "limit-study",
        problem("example1.json").to_str().unwrap(),
        "--m",
        "64",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let csv = std::fs::read_to_string(dir.path().join("example1.limit.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "alpha,max_deviation");
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 4);
    let devs: Vec<f64> = rows
        .iter()
        .map(|r| r.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert!(devs.windows(2).all(|w| w[1] < w[0]), "not monotone: {devs:?}");
}

#[test]
fn usage_error_exits_2() {
    let out = run(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_file_exits_1() {
    let out = run(&["derive", "/nonexistent/problem.json"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!out.stderr.is_empty());
}

#[test]
fn invalid_problem_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{\"name\": \"x\"}").unwrap();
    let out = run(&["derive", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn out_of_range_grid_exits_1() {
    let out = run(&[
        "solve",
        problem("example1.json").to_str().unwrap(),
        "--m",
        "1",
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn reruns_are_byte_identical() {
    let dir_a = tempfile::tempdir().unwrap();
    let dir_b = tempfile::tempdir().unwrap();
    for dir in [&dir_a, &dir_b] {
        let out = run(&[
            "solve",
            problem("example2.json").to_str().unwrap(),
            "--m",
            "64",
            "--out",
            dir.path().to_str().unwrap(),
        ]);
        assert!(out.status.success());
    }
    for file in ["example2.report.json", "example2.trajectory.csv"] {
        let a = std::fs::read(dir_a.path().join(file)).unwrap();
        let b = std::fs::read(dir_b.path().join(file)).unwrap();
        assert_eq!(a, b, "{file} differs between runs");
    }
}
