use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn problems() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../problems")
}

fn polymin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_polymin"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn motzkin() -> String {
    problems().join("motzkin.prob").display().to_string()
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is a JSON document")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn minimize_motzkin_json() {
    let out = polymin(&["minimize", &motzkin(), "--json"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let doc = json(&out);
    assert!(doc["minimum"].as_f64().unwrap().abs() <= 1e-4);
    let points = doc["points"].as_array().unwrap();
    assert_eq!(points.len(), 4);
    for p in points {
        for c in p.as_array().unwrap() {
            assert!((c.as_f64().unwrap().abs() - 1.0).abs() <= 1e-3);
        }
    }
    assert_eq!(doc["quotient_basis"].as_array().unwrap().len(), 4);
    let trace = doc["trace"].as_array().unwrap();
    for key in ["t", "hankel_size", "objective", "gap_flag", "kernel_dim", "wall_ms"] {
        assert!(trace.iter().all(|r| r.get(key).is_some()), "{key}");
    }
}

#[test]
fn bound_motzkin_at_degree_three_flags_a_gap() {
    let out = polymin(&["bound", &motzkin(), "--degree", "3", "--json"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let doc = json(&out);
    assert_eq!(doc["t"], 3);
    assert_eq!(doc["hankel_size"], 10);
    assert_eq!(doc["gap_flag"], true);
}

#[test]
fn empty_problem_is_a_parse_error() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("empty.prob");
    std::fs::write(&file, "").unwrap();
    let out = polymin(&["minimize", file.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("minimize:"), "{}", stderr(&out));
}

#[test]
fn bad_expression_is_a_parse_error() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("bad.prob");
    std::fs::write(&file, "vars: x\nminimize: x^2 + z\n").unwrap();
    let out = polymin(&["minimize", file.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("line 2"), "{}", stderr(&out));
}

fn fresh_result(dir: &Path) -> PathBuf {
    let result = dir.join("motzkin.json");
    let out = polymin(&["minimize", &motzkin(), "--out", result.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    result
}

#[test]
fn check_accepts_a_fresh_result() {
    let dir = tempfile::tempdir().unwrap();
    let result = fresh_result(dir.path());
    let out = polymin(&["check", result.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
}

#[test]
fn check_rejects_a_moved_point() {
    let dir = tempfile::tempdir().unwrap();
    let result = fresh_result(dir.path());
    let mut doc: Value = serde_json::from_str(&std::fs::read_to_string(&result).unwrap()).unwrap();
    let x = doc["points"][0][0].as_f64().unwrap();
    doc["points"][0][0] = Value::from(x + 0.1);
    std::fs::write(&result, serde_json::to_string_pretty(&doc).unwrap()).unwrap();
    let out = polymin(&["check", result.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(5));
    assert!(stderr(&out).contains("gradient norm"), "{}", stderr(&out));
}

#[test]
fn check_without_the_problem_file() {
    let dir = tempfile::tempdir().unwrap();
    let result = fresh_result(dir.path());
    let mut doc: Value = serde_json::from_str(&std::fs::read_to_string(&result).unwrap()).unwrap();
    doc["problem"] = Value::from(dir.path().join("gone.prob").display().to_string());
    std::fs::write(&result, serde_json::to_string_pretty(&doc).unwrap()).unwrap();
    let out = polymin(&["check", result.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

fn without_timings(mut v: Value) -> Value {
    for r in v["trace"].as_array_mut().unwrap() {
        r.as_object_mut().unwrap().remove("wall_ms");
    }
    v
}

#[test]
fn identical_runs_give_identical_documents() {
    let run = || json(&polymin(&["minimize", &motzkin(), "--json", "--seed", "11"]));
    assert_eq!(without_timings(run()), without_timings(run()));
}

#[test]
fn degree_limit_still_emits_the_best_bound() {
    let out = polymin(&["minimize", &motzkin(), "--json", "--t-max", "4"]);
    assert_eq!(out.status.code(), Some(3));
    let doc = json(&out);
    assert_eq!(doc["status"], "t_max_exceeded");
    assert!(doc["minimum"].is_null());
    assert!(doc["lower_bound"].as_f64().unwrap().abs() <= 1e-4);
    assert_eq!(doc["trace"].as_array().unwrap().len(), 2);
}

#[test]
fn problem_file_options_apply() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("m.prob");
    let text = std::fs::read_to_string(motzkin()).unwrap() + "option t_max = 4\n";
    std::fs::write(&file, text).unwrap();
    assert_eq!(polymin(&["minimize", file.to_str().unwrap()]).status.code(), Some(3));
    // flags take precedence over the file
    let out = polymin(&["minimize", file.to_str().unwrap(), "--t-max", "6"]);
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn sdpa_dumps_are_written() {
    let dir = tempfile::tempdir().unwrap();
    let dump = dir.path().join("sdpa");
    let arg = format!("--dump-sdpa={}", dump.display());
    let out = polymin(&["minimize", &motzkin(), &arg]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    for name in ["t3.dat-s", "t4.dat-s", "t5.dat-s", "t5_harvest.dat-s"] {
        let text = std::fs::read_to_string(dump.join(name)).unwrap();
        assert!(!text.is_empty(), "{name}");
    }
}
