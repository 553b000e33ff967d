use std::path::Path;
use std::process::{Command, Output};

const CONFIG: &str = r#"
t_max = 1.0

[domain]
d = 1
l = 64.0
n_x = 1024
n_max = 16
q = 32
alpha = 5.0
omega = 1.0

[initial]
kind = "ground_state_scaled"
scale = 0.5

[step]
dt = 0.01
report_interval = 0.05
snapshot_interval = 0.25

[morawetz]
radii = [1.0]
s_grid = [0.0]
"#;

fn phnls(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_phnls")).args(args).env("RUST_LOG", "warn").output().unwrap()
}

fn json(out: &Output) -> serde_json::Value {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn write_config(dir: &Path) -> String {
    let path = dir.join("run.toml");
    std::fs::write(&path, CONFIG).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn verify_single_suite_emits_json_lines() {
    let out = phnls(&["verify", "--suite", "criterion"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let rows: Vec<serde_json::Value> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(rows.len(), 2);
    assert!(rows.iter().all(|r| r["suite"] == "criterion" && r["pass"] == true));
}

#[test]
fn unknown_suite_is_an_error() {
    let out = phnls(&["verify", "--suite", "nope"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown suite"));
}

#[test]
fn ground_state_classify_evolve_and_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    let gs = dir.path().join("gs.phnl");
    let gs_str = gs.to_str().unwrap();

    let cert = json(&phnls(&["ground-state", "--config", &cfg, "--out", gs_str]));
    assert!(cert["certificate"]["elliptic_residual"].as_f64().unwrap() < 1e-8);
    assert_eq!(cert["config_hash"].as_str().unwrap().len(), 64);
    assert!(dir.path().join("gs.phnl.json").exists());

    // the ground state itself sits on the threshold
    let c = json(&phnls(&["classify", "--config", &cfg, "--init", gs_str, "--ground-state", gs_str]));
    assert_eq!(c["classification"]["verdict"], "on_boundary");

    let run = dir.path().join("run");
    let report = json(&phnls(&["evolve", "--config", &cfg, "--init", &format!("{gs_str}:scale=0.5"), "--out", run.to_str().unwrap()]));
    assert_eq!(report["classification_in"]["verdict"], "k_plus");
    assert_eq!(report["mismatch"], false);
    assert!(run.join("report.json").exists());
    assert!(run.join("trace/trace.csv").exists());
    assert!(run.join("morawetz.json").exists());

    let trace = run.join("trace");
    let trace_str = trace.to_str().unwrap();
    let crit = json(&phnls(&["criterion", "--trace", trace_str, "--window", "0.25", "1.0"]));
    assert!(crit["value"].as_f64().unwrap() > 0.0);
    assert!((crit["exponents"]["q"].as_f64().unwrap() - 70.0 / 9.0).abs() < 1e-12);
    let outside = phnls(&["criterion", "--trace", trace_str, "--window", "0.5", "3.0"]);
    assert_eq!(outside.status.code(), Some(2));

    let m = json(&phnls(&["morawetz", "--config", &cfg, "--trace", trace_str]));
    assert_eq!(m["summary"]["samples"], 5);
    assert!(trace.join("morawetz.csv").exists());
}

#[test]
fn evolve_from_config_matches_explicit_init() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    let gs = dir.path().join("gs.phnl");
    json(&phnls(&["ground-state", "--config", &cfg, "--out", gs.to_str().unwrap()]));
    let a = json(&phnls(&["evolve", "--config", &cfg, "--out", dir.path().join("a").to_str().unwrap()]));
    let init = format!("{}:scale=0.5", gs.display());
    let b = json(&phnls(&["evolve", "--config", &cfg, "--init", &init, "--out", dir.path().join("b").to_str().unwrap()]));
    assert_eq!(a["evidence"], b["evidence"]);
    assert_eq!(a["config_hash"], b["config_hash"]);
}

#[test]
fn bad_init_scale_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    let out = phnls(&["evolve", "--config", &cfg, "--init", "gs.phnl:scale=-1", "--out", dir.path().join("x").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let out = phnls(&["evolve", "--config", &cfg, "--init", "missing.phnl", "--out", dir.path().join("x").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}
