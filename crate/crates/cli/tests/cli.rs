//! The `phess` binary: exit codes, formats and the documented invocations.

use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn phess(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_phess")).args(args).output().expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is a JSON report")
}

fn problem(name: &str) -> String {
    let root = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../problems").join(name);
    root.to_str().unwrap().to_string()
}

fn temp(name: &str) -> PathBuf {
    std::env::temp_dir().join(format!("phess-cli-{}-{name}", std::process::id()))
}

#[test]
fn identities_example_passes() {
    let out = phess(&["identities", "--n", "3..8", "--trials", "1000", "--seed", "7"]);
    assert_eq!(out.status.code(), Some(0));
    let r = json(&out);
    assert_eq!(r["seed"], 7);
    assert_eq!(r["config"]["n_min"], 3);
    assert!(r["result"]["max_residual"].as_f64().unwrap() <= 1e-10);
}

#[test]
fn find_m_example_returns_threshold() {
    let out = phess(&[
        "find-m", "--n", "3", "--p", "2", "--tau", "0.5", "--eps", "1", "--sigma", "0.5:2", "--trials", "10000", "--seed",
        "42",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let r = json(&out);
    let th = &r["result"]["threshold"];
    assert!(th["m_hat"].as_f64().unwrap().is_finite());
    assert_eq!(th["seed"], 42);
    assert_eq!(r["config"]["sigma_band"], serde_json::json!([0.5, 2.0]));
}

#[test]
fn solve_example_writes_trace_and_field() {
    let field = temp("field.csv");
    let out = phess(&[
        "solve",
        "--problem",
        &problem("manufactured.json"),
        "--tol",
        "1e-9",
        "--format",
        "csv",
        "--field-out",
        field.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = String::from_utf8(out.stdout).unwrap();
    let header = csv.lines().next().unwrap();
    assert!(header.starts_with("seed,"));
    assert!(header.contains("residual_inf") && header.contains("max_grad"));
    assert!(csv.lines().any(|l| l.contains(",trace,")) && csv.lines().any(|l| l.contains(",monitors,")));
    let text = std::fs::read_to_string(&field).unwrap();
    assert!(text.starts_with("2,64,64,"));
    assert_eq!(text.lines().count(), 1 + 64 * 64);
    std::fs::remove_file(field).ok();
}

#[test]
fn out_flag_writes_the_report() {
    let path = temp("report.json");
    let out = phess(&["cone", "--samples", "50", "--out", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let r: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(r["command"], "cone");
    assert_eq!(r["status"], "ok");
    std::fs::remove_file(path).ok();
}

#[test]
fn violation_exits_one_with_counterexample() {
    let path = temp("hard.json");
    std::fs::write(&path, r#"{"grid": {"sizes": [16, 16]}, "tol": 1e-30, "max_iters": 1, "order_sizes": []}"#).unwrap();
    let out = phess(&["solve", "--problem", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let r = json(&out);
    assert_eq!(r["status"], "violation");
    assert!(r["counterexample"]["failure"].as_str().unwrap().contains("no convergence"));
    std::fs::remove_file(path).ok();
}

#[test]
fn usage_and_input_errors_exit_two() {
    assert_eq!(phess(&["no-such-command"]).status.code(), Some(2));
    assert_eq!(phess(&["identities", "--n", "x..y"]).status.code(), Some(2));
    assert_eq!(phess(&["find-m", "--sigma", "0.5"]).status.code(), Some(2));
    assert_eq!(phess(&["solve", "--problem", "/nonexistent/problem.json"]).status.code(), Some(2));
    let path = temp("unknown.json");
    std::fs::write(&path, r#"{"trails": 10}"#).unwrap();
    assert_eq!(phess(&["identities", "--config", path.to_str().unwrap()]).status.code(), Some(2));
    std::fs::remove_file(path).ok();
}

#[test]
fn pseudo_problem_file_is_clean() {
    let out = phess(&["pseudo-check", "--problem", &problem("pseudo.json")]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&out)["violations"], 0);
}
