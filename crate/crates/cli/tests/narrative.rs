//! Emitted traces against the published iteration narratives.
//!
//! Each entry is `(t, objective as printed, gap flag)` for the first
//! relaxation of that degree. Printed objectives are rounded, so a value
//! also matches when it rounds to the printed digits.

use std::path::Path;
use std::process::Command;

use serde_json::Value;

fn trace(problem: &str) -> Vec<Value> {
    let file = Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../problems")
        .join(problem);
    let out = Command::new(env!("CARGO_BIN_EXE_polymin"))
        .args(["minimize", file.to_str().unwrap(), "--json"])
        .output()
        .unwrap();
    let doc: Value = serde_json::from_slice(&out.stdout).unwrap();
    doc["trace"].as_array().unwrap().clone()
}

fn matches_printed(value: f64, printed: &str) -> bool {
    let target: f64 = printed.parse().unwrap();
    let decimals = printed.split('.').nth(1).map_or(0, str::len) as i32;
    let scale = 10f64.powi(decimals);
    (value - target).abs() <= 1e-3 || (value * scale).round() / scale == target
}

fn follows(problem: &str, narrative: &[(u64, &str, bool)]) {
    let trace = trace(problem);
    let mut mismatches = Vec::new();
    for &(t, printed, gap) in narrative {
        let Some(r) = trace
            .iter()
            .find(|r| r["t"] == t && r["stage"] == "relaxation")
        else {
            continue;
        };
        let objective = r["objective"].as_f64().unwrap();
        if !matches_printed(objective, printed) || r["gap_flag"] != gap {
            mismatches.push(format!(
                "t={t}: objective {objective} gap {} vs {printed} gap {gap}",
                r["gap_flag"]
            ));
        }
    }
    assert!(mismatches.is_empty(), "{problem}: {mismatches:?}");
}

#[test]
fn motzkin_trace() {
    follows("motzkin.prob", &[(3, "-216", true), (4, "0", false), (5, "0", false)]);
}

#[test]
fn robinson_trace() {
    follows(
        "robinson.prob",
        &[(3, "-0.93", false), (4, "0", false), (5, "0", false), (6, "0", false)],
    );
}

#[test]
fn cubic_trace() {
    follows("cubic.prob", &[(2, "-18.6", false), (3, "-18.6", false)]);
}

#[test]
fn leep_starr_trace() {
    follows("leep_starr.prob", &[(3, "-5.4", true), (4, "0.6", false)]);
}
