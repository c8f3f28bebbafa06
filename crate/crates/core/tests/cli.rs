use std::path::Path;
use std::process::{Command, Output};

use serde_json::{json, Value};

fn run(dir: &Path, config: &Value, extra: &[&str]) -> Output {
    let path = dir.join("job.json");
    std::fs::write(&path, config.to_string()).unwrap();
    Command::new(env!("CARGO_BIN_EXE_design"))
        .arg("--config")
        .arg(&path)
        .args(extra)
        .output()
        .unwrap()
}

fn axis_job() -> Value {
    json!({
        "model": {"family": "poisson_log", "kind": "first_order_no_intercept", "nu": 2,
                  "beta": [0.4f64.ln(), 0.5f64.ln()]},
        "region": {"type": "binary_hypercube", "nu": 2},
        "criterion": {"k": 1},
        "task": "construct",
        "constructor": "axis_design",
        "a": [1, 1],
        "tolerance": 1e-7,
        "seed": 0
    })
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn construct_axis_design() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &axis_job(), &[]);
    assert_eq!(out.status.code(), Some(0));
    let doc = stdout_json(&out);
    assert_eq!(doc["condition_ok"], true);
    let w = doc["design"]["weights"].as_array().unwrap();
    assert!((w[0].as_f64().unwrap() - 0.52786).abs() < 1e-5);
    assert!((w[1].as_f64().unwrap() - 0.47214).abs() < 1e-5);
}

#[test]
fn verify_symmetric_logistic_design() {
    let dir = tempfile::tempdir().unwrap();
    let job = json!({
        "model": {"family": "logistic", "kind": "first_order_intercept", "nu": 2, "beta": [0, 0, 0]},
        "region": {"type": "binary_hypercube", "nu": 2},
        "criterion": {"k": 0},
        "task": "verify",
        "design_in": {"points": [[0, 0], [1, 0], [0, 1], [1, 1]], "weights": [0.25, 0.25, 0.25, 0.25]},
        "tolerance": 1e-7,
        "seed": 0
    });
    let out = run(dir.path(), &job, &[]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(stdout_json(&out)["pass"], true);
}

#[test]
fn failed_verification_exits_one_with_report() {
    let dir = tempfile::tempdir().unwrap();
    let job = json!({
        "model": {"family": "logistic", "kind": "single_factor_intercept", "nu": 1, "beta": [0, 0]},
        "region": {"type": "finite_set", "points": [[0], [1]]},
        "criterion": {"k": 1},
        "task": "verify",
        "design_in": {"points": [[0], [1]], "weights": [0.5, 0.5]},
        "tolerance": 1e-7,
        "seed": 0
    });
    let out = run(dir.path(), &job, &[]);
    assert_eq!(out.status.code(), Some(1));
    let report = stdout_json(&out);
    assert_eq!(report["pass"], false);
    assert!((report["worst_gap"].as_f64().unwrap() - 8.0).abs() < 1e-9);
}

#[test]
fn malformed_beta_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &axis_job(), &["--set", "model.beta=[0.1,0.2,0.3]"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(out.stdout.is_empty());
    let err = String::from_utf8(out.stderr).unwrap();
    assert_eq!(err.trim_end().lines().count(), 1);
    let v: Value = serde_json::from_str(err.trim_end()).unwrap();
    assert!(v["error"].is_string() && v["message"].is_string());
}

#[test]
fn missing_config_exits_two() {
    let out = Command::new(env!("CARGO_BIN_EXE_design"))
        .args(["--config", "/nonexistent/job.json"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn model_error_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &axis_job(), &["--set", "constructor=corner_design_multifactor"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn construct_then_verify_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        axis_job(),
        json!({
            "model": {"family": "poisson_log", "kind": "first_order_intercept", "nu": 2, "beta": [0, -3, -3]},
            "region": {"type": "binary_hypercube", "nu": 2},
            "criterion": {"k": 1},
            "task": "construct",
            "constructor": "two_factor_design",
            "tolerance": 1e-7,
            "seed": 0
        }),
        json!({
            "model": {"family": "logistic", "kind": "single_factor_intercept", "nu": 1, "beta": [0, 1]},
            "region": {"type": "grid_box", "lower": [0], "upper": [1], "resolution": [1001]},
            "criterion": {"k": 0},
            "task": "construct",
            "constructor": "interval_boundary_design",
            "tolerance": 1e-7,
            "seed": 0
        }),
    ];
    for mut job in cases {
        let out = run(dir.path(), &job, &[]);
        assert_eq!(out.status.code(), Some(0));
        let built = stdout_json(&out);
        job["task"] = json!("verify");
        job["design_in"] = built["design"].clone();
        let out = run(dir.path(), &job, &[]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
        assert_eq!(stdout_json(&out)["pass"], true);
    }
}

#[test]
fn optimize_emits_design_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let mut job = axis_job();
    job["task"] = json!("optimize");
    let out = run(dir.path(), &job, &[]);
    assert_eq!(out.status.code(), Some(0));
    let doc = stdout_json(&out);
    assert_eq!(doc["converged"], true);
    assert_eq!(doc["report"]["pass"], true);
    let pts = doc["design"]["points"].as_array().unwrap();
    let w = doc["design"]["weights"].as_array().unwrap();
    let i = pts.iter().position(|p| p == &json!([1.0, 0.0])).unwrap();
    assert!((w[i].as_f64().unwrap() - 0.52786).abs() < 1e-5);
}

#[test]
fn scan_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let mut job = axis_job();
    job["task"] = json!("scan");
    job["design_in"] = json!({"points": [[1, 0], [0, 1]], "weights": [0.5, 0.5]});
    let csv = dir.path().join("scan.csv");
    let out = run(dir.path(), &job, &["--out", csv.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let text = std::fs::read_to_string(&csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "x1,x2,sensitivity,bound");
    assert_eq!(lines.len(), 5);
    assert!(lines[1].starts_with("0.0000000000000000e0,0.0000000000000000e0,"));

    let out = run(dir.path(), &job, &[]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn overrides_apply_in_order() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        dir.path(),
        &axis_job(),
        &["--set", "criterion.k=inf", "--set", "criterion.k=0"],
    );
    assert_eq!(out.status.code(), Some(0));
    let w = stdout_json(&out)["design"]["weights"].clone();
    assert_eq!(w, json!([0.5, 0.5]));
}
