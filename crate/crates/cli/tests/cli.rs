use std::process::{Command, Output};

use serde_json::Value;

fn gbm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gbm")).args(args).output().unwrap()
}

fn json(out: &Output) -> Value {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn enumerate_three_routers() {
    let v = json(&gbm(&["enumerate", "--routers", "3"]));
    assert_eq!(v["count"], 5);
    assert_eq!(v["catalan"], 5);
    let listed = json(&gbm(&["enumerate", "--routers", "3", "--raw"]));
    assert_eq!(listed["structures"].as_array().unwrap().len(), 5);
}

#[test]
fn optimize_headline_point() {
    let v = json(&gbm(&["optimize"]));
    let p1 = v["optimum"]["p1_max"].as_f64().unwrap();
    assert!((p1 - 0.866).abs() < 1e-3);
    assert_eq!(v["n_sequences"], 16796);
}

#[test]
fn out_of_range_probability_is_a_usage_error() {
    let out = gbm(&["optimize", "--vt", "1.5"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("out of range"));
}

#[test]
fn unknown_flag_is_a_usage_error() {
    assert_eq!(gbm(&["optimize", "--bogus"]).status.code(), Some(2));
    assert_eq!(gbm(&["sweep", "nope"]).status.code(), Some(2));
}

#[test]
fn optimize_output_feeds_simulate_and_compare() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("opt.json");
    let status = gbm(&["optimize", "--routers", "4", "--out", report.to_str().unwrap()]).status;
    assert!(status.success());

    let sim = json(&gbm(&["simulate", "--arms", report.to_str().unwrap(), "--trials", "20000", "--seed", "3"]));
    assert_eq!(sim["arms"].as_array().unwrap().len(), 5);
    assert_eq!(sim["result"]["trials"], 20000);
    let again = json(&gbm(&["simulate", "--arms", report.to_str().unwrap(), "--trials", "20000", "--seed", "3"]));
    assert_eq!(sim, again);

    let cmp = json(&gbm(&["compare", "--arms", report.to_str().unwrap(), "--trials", "200000"]));
    assert_eq!(cmp["chi2"]["pass"], true);
    let p1 = cmp["analytic"]["p"][1].as_f64().unwrap();
    let hat = cmp["simulated"]["p_hat"][1].as_f64().unwrap();
    let se = cmp["simulated"]["stderr"][1].as_f64().unwrap();
    assert!((p1 - hat).abs() < 4.0 * se);
}

#[test]
fn simulate_accepts_plain_arm_list() {
    let dir = tempfile::tempdir().unwrap();
    let arms = dir.path().join("arms.json");
    std::fs::write(&arms, "[0.9, 0.95]").unwrap();
    let v = json(&gbm(&["simulate", "--arms", arms.to_str().unwrap(), "--lambda", "0.5", "--trials", "1000"]));
    assert_eq!(v["arms"][0], 0.95);
    let bad_lambda = gbm(&["simulate", "--arms", arms.to_str().unwrap(), "--lambda", "3", "--trials", "1000"]);
    assert_eq!(bad_lambda.status.code(), Some(2));
}

#[test]
fn nscaling_sweep_writes_csv_and_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("n.csv");
    let out = gbm(&["sweep", "nscaling", "--n-list", "2,3,4", "--out", csv.to_str().unwrap()]);
    assert!(out.status.success());
    let text = std::fs::read_to_string(&csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "n,p1_max,g2,lambda_opt,structure");
    assert_eq!(lines.len(), 4);
    let side: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("n.csv.json")).unwrap()).unwrap();
    assert_eq!(side["kind"], "nscaling");
    assert_eq!(side["n_rows"], 3);
}

#[test]
fn surface_sweep_to_stdout() {
    let out = gbm(&["sweep", "surface", "--steps", "2", "--units", "4"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 5);
    assert!(text.starts_with("v_t,v_r,p1_max,g2,structure,lambda_opt"));
}
