use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const FIXTURES: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/../core/tests/fixtures");

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dpminimax"))
        .args(args)
        .output()
        .unwrap()
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn bounds_lecam_prints_json() {
    let out = run(&["bounds", "lecam", "--tv", "1", "--d", "1", "--eps", "0.1"]);
    assert!(out.status.success());
    let v = json(&out);
    assert_eq!(v["binding"], "privacy");
    assert!((v["value"].as_f64().unwrap() - 0.45 * (-1.0f64).exp()).abs() < 1e-12);
}

#[test]
fn codes_round_trip_through_verify() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("code.json");
    let out = run(&[
        "codes",
        "gen",
        "--kind",
        "cw",
        "--k",
        "8",
        "--l",
        "4",
        "--out",
        file.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let out = run(&["codes", "verify", file.to_str().unwrap()]);
    assert!(out.status.success());
    assert!(json(&out)["verified_min_distance"].as_u64().unwrap() >= 2);
}

#[test]
fn pack_gen_then_verify() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("pack.json");
    let out = run(&[
        "pack",
        "gen",
        "--family",
        "kary-tv",
        "--k",
        "8",
        "--alpha",
        "0.02",
        "--out",
        file.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let out = run(&["pack", "verify", file.to_str().unwrap()]);
    assert!(out.status.success());
    assert_eq!(json(&out)["passed"], true);
}

#[test]
fn coupling_mean_near_expected() {
    let out = run(&[
        "couple",
        "run",
        "--kind",
        "assouad-product",
        "--d",
        "20",
        "--alpha",
        "0.005",
        "--n",
        "1000",
        "--seed",
        "3",
    ]);
    assert!(out.status.success());
    let v = json(&out);
    let (mean, se) = (v["mean"].as_f64().unwrap(), v["stderr"].as_f64().unwrap());
    assert_eq!(v["bound"].as_f64().unwrap(), 10.0);
    assert!(v["marginal_tv"].as_f64().unwrap() < 0.02);
    assert!((mean - 10.0).abs() <= 4.0 * se);
}

#[test]
fn estimate_is_a_distribution() {
    let out = run(&[
        "mech", "estimate", "--kind", "laplace", "--k", "3", "--eps", "1", "--in", "0,1,1,2", "--seed", "1",
    ]);
    assert!(out.status.success());
    let p: Vec<f64> = serde_json::from_value(json(&out)["estimate"].clone()).unwrap();
    assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12 && p.iter().all(|&x| x >= 0.0));
}

#[test]
fn experiment_writes_reports_and_seed_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("golden.json");
    std::fs::copy(Path::new(FIXTURES).join("golden.json"), &cfg).unwrap();
    let out = run(&["experiment", cfg.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("golden.report.json")).unwrap()).unwrap();
    assert_eq!(report["seed"], 7);
    assert!(dir.path().join("golden.report.csv").exists());

    let stem = dir.path().join("other");
    let out = run(&[
        "experiment",
        cfg.to_str().unwrap(),
        "--seed",
        "99",
        "--out",
        stem.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let report: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("other.json")).unwrap()).unwrap();
    assert_eq!(report["seed"], 99);
}

#[test]
fn failing_band_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("tight.json");
    let text = std::fs::read_to_string(Path::new(FIXTURES).join("golden.json"))
        .unwrap()
        .replace("\"value\": 0.1", "\"value\": 0.001");
    std::fs::write(&cfg, text).unwrap();
    assert_eq!(run(&["risk", cfg.to_str().unwrap()]).status.code(), Some(1));
}

#[test]
fn bad_config_exits_two_with_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    let text = std::fs::read_to_string(Path::new(FIXTURES).join("golden.json"))
        .unwrap()
        .replace("[50, 200, 800]", "[]");
    std::fs::write(&cfg, text).unwrap();
    let out = run(&["experiment", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.starts_with("error:") && err.contains("line 6"), "{err}");
}

#[test]
fn audit_flags_randomized_response() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("rr.json");
    let e = 1f64.exp();
    let (a, b) = (e / (1.0 + e), 1.0 / (1.0 + e));
    let mech = serde_json::json!({
        "datasets": [[0], [1]],
        "outputs": [0, 1],
        "table": [[a, b], [b, a]],
    });
    std::fs::write(&file, mech.to_string()).unwrap();
    let m = file.to_str().unwrap();
    let out = run(&["mech", "audit", "--mech", m, "--eps", "1", "--delta", "0"]);
    assert!(out.status.success());
    assert!(json(&out)["delta"].as_f64().unwrap() <= 1e-12);
    assert_eq!(
        run(&["mech", "audit", "--mech", m, "--eps", "0.5", "--delta", "0"])
            .status
            .code(),
        Some(1)
    );
    assert!(run(&["mech", "audit", "--mech", m, "--eps", "1", "--group", "1"])
        .status
        .success());
}
