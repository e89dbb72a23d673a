use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn matcert(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_matcert")).args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn passing_suite_exits_zero_with_ordered_records() {
    let out = matcert(&["verify-cross", "--dim", "3", "--seeds", "4", "--seed-start", "10"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    assert_eq!(v["schema"], "matcert-run/1");
    assert_eq!(v["summary"]["pass"], true);
    let seeds: Vec<u64> = v["records"].as_array().unwrap().iter().map(|r| r["seed"].as_u64().unwrap()).collect();
    assert_eq!(seeds, vec![10, 11, 12, 13]);
    assert!(v["records"][0]["anchor"].as_str().unwrap().contains('/'));
    assert!(v.get("timing").is_some());
    assert_eq!(String::from_utf8_lossy(&out.stderr).lines().filter(|l| l.starts_with("PASS")).count(), 4);
}

#[test]
fn tolerance_miss_exits_one() {
    let out = matcert(&["verify-cross", "--dim", "3", "--seeds", "2", "--tol", "1e-14", "--omit-timing"]);
    assert_eq!(code(&out), 1);
    assert_eq!(json(&out)["summary"]["pass"], false);
}

#[test]
fn usage_and_input_errors_exit_two() {
    assert_eq!(code(&matcert(&["verify-cross", "--no-such-flag"])), 2);
    assert_eq!(code(&matcert(&["verify-power", "--q", "1/3", "--seeds", "1"])), 2);
    assert_eq!(code(&matcert(&["verify-cross", "--seeds", "1", "--tol", "-1"])), 2);
    assert_eq!(code(&matcert(&["verify-ssa", "--dims", "4", "4", "4", "--seeds", "1"])), 2);

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{\"dims\": [2, 2, 2], \"entries\": ").unwrap();
    let out = matcert(&["decompose", "--in", bad.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("invalid input"));

    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, "{\"tolerance\": 1e-3}").unwrap();
    assert_eq!(code(&matcert(&["--config", cfg.to_str().unwrap(), "verify-cross", "--seeds", "1"])), 2);

    // A non-Hermitian matrix is rejected, not symmetrised.
    let skew = dir.path().join("skew.json");
    std::fs::write(&skew, r#"{"dims": [1, 1, 2], "entries": [[[0.5, 0], [0.3, 0]], [[0.0, 0], [0.5, 0]]]}"#).unwrap();
    assert_eq!(code(&matcert(&["decompose", "--in", skew.to_str().unwrap()])), 2);
}

#[test]
fn reports_are_byte_identical_across_runs_and_thread_counts() {
    let args = ["verify-lieb", "--dims", "2", "2", "--seeds", "3", "--omit-timing"];
    let a = matcert(&args);
    let b = matcert(&args);
    let mut threaded: Vec<&str> = args.to_vec();
    threaded.extend(["--threads", "3"]);
    let c = matcert(&threaded);
    assert_eq!(code(&a), 0);
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(a.stdout, c.stdout);
}

#[test]
fn config_file_supplies_defaults_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"tol": 1e-14, "cross": {"method": "closed_form"}}"#).unwrap();
    let from_file = matcert(&["--config", cfg.to_str().unwrap(), "verify-cross", "--seeds", "1", "--omit-timing"]);
    assert_eq!(code(&from_file), 1);
    assert_eq!(json(&from_file)["config"]["method"]["method"], "closed_form");
    let overridden = matcert(&["--config", cfg.to_str().unwrap(), "--tol", "1e-5", "verify-cross", "--seeds", "1"]);
    assert_eq!(code(&overridden), 0);
}

#[test]
fn generated_state_decomposes() {
    let dir = tempfile::tempdir().unwrap();
    let state = dir.path().join("state.json");
    let report = dir.path().join("out/../report.json");
    std::fs::create_dir(dir.path().join("out")).unwrap();
    let out = matcert(&["gen", "--kind", "state", "--dims", "2", "2", "2", "--seed", "4", "--out", state.to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    let file = read_json(&state);
    assert_eq!(file["dims"], serde_json::json!([2, 2, 2]));
    assert_eq!(file["entries"].as_array().unwrap().len(), 8);

    let out = matcert(&["decompose", "--in", state.to_str().unwrap(), "--seed", "4", "--report", report.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(out.stdout.is_empty());
    let rep = read_json(&report);
    assert_eq!(rep["schema"], "ssa-report/1");
    assert_eq!(rep["seed"], 4);
    assert_eq!(rep["pass"], true);
    assert_eq!(rep["delta_terms"].as_array().unwrap().len(), 6);
    let total = rep["boundary_term"].as_f64().unwrap()
        + rep["delta_terms"].as_array().unwrap().iter().map(|d| d.as_f64().unwrap()).sum::<f64>();
    let cmi = rep["cmi_entropic"].as_f64().unwrap();
    assert!((total - cmi).abs() <= 1e-3 * cmi.max(0.01));
    assert!(rep["twirl_ordering"].is_string());
}

#[test]
fn gen_is_deterministic_and_kinds_round_trip() {
    for kind in ["mean-pair", "segment"] {
        let a = matcert(&["gen", "--kind", kind, "--dims", "3", "--seed", "9"]);
        let b = matcert(&["gen", "--kind", kind, "--dims", "3", "--seed", "9"]);
        assert_eq!(code(&a), 0);
        assert_eq!(a.stdout, b.stdout);
        assert_eq!(json(&a)["kind"], kind);
    }
    assert_eq!(code(&matcert(&["gen", "--kind", "state", "--dims", "2", "2"])), 2);
}
