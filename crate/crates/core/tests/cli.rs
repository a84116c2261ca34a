//! End-to-end runs of the `gpt-kit` binary.

use std::fs;
use std::process::{Command, Output};

use serde_json::Value;

fn gpt_kit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gpt-kit"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn report(args: &[&str]) -> (i32, Value) {
    let out = gpt_kit(args);
    let v = serde_json::from_slice(&out.stdout).unwrap_or(Value::Null);
    (out.status.code().unwrap_or(-1), v)
}

fn strip_runtime(v: &mut Value) {
    if let Some(reports) = v["reports"].as_array_mut() {
        for r in reports {
            if let Some(obj) = r.as_object_mut() {
                obj.remove("runtime_ms");
            }
        }
    }
}

#[test]
fn quantum_model_from_file_passes() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("qutrit.json");
    fs::write(&path, r#"{"type":"quantum","d":3}"#).unwrap();
    let (code, v) = report(&["check-axioms", "--model", path.to_str().unwrap(), "--trials", "20"]);
    assert_eq!(code, 0);
    assert_eq!(v["schema"], "gpt-kit/1");
    assert_eq!(v["command"], "check-axioms");
    assert_eq!(v["reports"].as_array().unwrap().len(), 8);
}

#[test]
fn reports_are_deterministic_apart_from_runtime() {
    let args = ["check-axioms", "--model", r#"{"type":"classical","d":4}"#, "--seed", "7", "--trials", "15"];
    let (c1, mut a) = report(&args);
    let (c2, mut b) = report(&args);
    assert_eq!((c1, c2), (0, 0));
    strip_runtime(&mut a);
    strip_runtime(&mut b);
    assert_eq!(a, b);
    assert_eq!(a["seed"], 7);
}

#[test]
fn reconstruct_dumps_the_representation() {
    let dir = tempfile::tempdir().unwrap();
    let dump = dir.path().join("rep.json");
    let out = dir.path().join("report.json");
    let code = gpt_kit(&[
        "reconstruct", "--d", "3", "--trials", "10",
        "--dump", dump.to_str().unwrap(), "--out", out.to_str().unwrap(),
    ])
    .status
    .code();
    assert_eq!(code, Some(0));
    let v: Value = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    let names: Vec<&str> = v["reports"].as_array().unwrap().iter().map(|r| r["check_name"].as_str().unwrap()).collect();
    assert_eq!(names, ["standard-basis", "axis-fixing", "duality", "positivity", "completeness"]);
    let d: Value = serde_json::from_str(&fs::read_to_string(&dump).unwrap()).unwrap();
    assert!(d.is_object());
}

#[test]
fn reconstruct_reads_d_from_a_quantum_model() {
    let (code, v) = report(&["reconstruct", "--model", r#"{"type":"quantum","d":2}"#, "--trials", "5"]);
    assert_eq!(code, 0);
    assert_eq!(v["reports"].as_array().unwrap().len(), 5);
    let (code, _) = report(&["reconstruct", "--model", r#"{"type":"classical","d":2}"#]);
    assert_eq!(code, 2);
}

#[test]
fn configuration_errors_exit_two() {
    assert_eq!(gpt_kit(&["reconstruct", "--d", "20"]).status.code(), Some(2));
    assert_eq!(gpt_kit(&["reconstruct", "--d", "6", "--cap", "5"]).status.code(), Some(2));
    assert_eq!(gpt_kit(&["teleport", "--d", "1"]).status.code(), Some(2));
    assert_eq!(gpt_kit(&["check-axioms", "--model", "/nonexistent/model.json"]).status.code(), Some(2));
    assert_eq!(gpt_kit(&["check-axioms", "--model", r#"{"type":"hexagon"}"#]).status.code(), Some(2));
    assert_eq!(gpt_kit(&["teleport"]).status.code(), Some(2));
    assert_eq!(gpt_kit(&["choi", "--channel", r#"{"ops":[]}"#]).status.code(), Some(2));
}

#[test]
fn choi_of_a_dephasing_channel() {
    let channel = r#"{"kraus":[[[1,0],[0,0],[0,0],[0,0]],[[0,0],[0,0],[0,0],[1,0]]]}"#;
    let (code, v) = report(&["choi", "--channel", channel]);
    assert_eq!(code, 0);
    let w = &v["reports"][0]["witness"];
    assert_eq!(w["rank"], 2);
    assert!(w["trace_preservation_residual"].as_f64().unwrap() < 1e-12);
}
