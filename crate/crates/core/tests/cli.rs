//! The installed binary: exit codes, diagnostics and output formats.

use std::path::PathBuf;
use std::process::{Command, Output};

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_riscov")).args(args).output().expect("spawn riscov")
}

fn scratch(name: &str, contents: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("riscov-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let p = dir.join(name);
    std::fs::write(&p, contents).unwrap();
    p
}

fn defaults_json() -> String {
    let out = bin(&["defaults"]);
    assert!(out.status.success());
    String::from_utf8(out.stdout).unwrap()
}

#[test]
fn defaults_round_trip_through_config_file() {
    let json = defaults_json();
    let v: serde_json::Value = serde_json::from_str(&json).unwrap();
    assert_eq!(v["n_elements"], 1e13);
    let p = scratch("defaults.json", &json);
    let out = bin(&["coverage", "--config", p.to_str().unwrap(), "--mode", "mc", "--realizations", "2000"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rec: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(rec["seed"], 2024);
    assert_eq!(rec["scenario"], "high-ris");
    let cp = rec["mc"]["coverage"]["value"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&cp));
}

#[test]
fn malformed_config_names_the_problem() {
    let p = scratch("broken.json", r#"{"lambda_a": 1.0, "tau": "#);
    let out = bin(&["coverage", "--config", p.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!out.stderr.is_empty());

    let mut v: serde_json::Value = serde_json::from_str(&defaults_json()).unwrap();
    v.as_object_mut().unwrap().remove("lambda_b");
    let p = scratch("missing.json", &v.to_string());
    let out = bin(&["coverage", "--config", p.to_str().unwrap(), "--mode", "analytic"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("lambda_b"));
}

#[test]
fn full_channel_refused_at_reference_size() {
    let p = scratch("full.json", &defaults_json());
    let out = bin(&["coverage", "--config", p.to_str().unwrap(), "--mode", "mc", "--fidelity", "full-channel"]);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn usage_errors_and_unknown_presets() {
    assert_eq!(bin(&["sweep"]).status.code(), Some(2));
    assert_eq!(bin(&["figure", "--preset", "fig1"]).status.code(), Some(2));
}

#[test]
fn sweep_writes_csv_file() {
    let p = scratch("sweep-base.json", &defaults_json());
    let out_path = p.with_file_name("sweep.csv");
    let out = bin(&[
        "sweep", "--config", p.to_str().unwrap(), "--param", "tau_db", "--from", "-2", "--to", "4",
        "--steps", "3", "--engine", "mc", "--realizations", "1000", "-o", out_path.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&out_path).unwrap();
    let data: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert!(data[0].starts_with("tau_db,cp_total_analytic,cp_mc"));
    assert_eq!(data.len(), 4);
}
