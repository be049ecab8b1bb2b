use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn lrp(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lrp"))
        .args(args)
        .arg("--out")
        .arg(dir)
        .env_remove("LRP_OUTPUT_DIR")
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("experiment.toml");
    fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

fn json(path: &Path) -> Value {
    serde_json::from_slice(&fs::read(path).unwrap()).unwrap()
}

fn csv_rows(path: &Path) -> Vec<csv::StringRecord> {
    let text = fs::read_to_string(path).unwrap();
    let body = text.strip_prefix("# lrp-data v1\n").expect("versioned header");
    csv::Reader::from_reader(body.as_bytes()).records().map(Result::unwrap).collect()
}

fn stat(rows: &[csv::StringRecord], name: &str) -> f64 {
    rows.iter().find(|r| &r[5] == name).unwrap_or_else(|| panic!("no {name}"))[6].parse().unwrap()
}

#[test]
fn lambda_without_long_edges_is_the_box_side() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "[model]\nbeta = 0.0\n[sizes]\nn = 32\nreplicates = 20\n");
    let out = tmp.path().join("out");
    let o = lrp(&out, &["lambda", "--config", &cfg]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = csv_rows(&out.join("lambda.csv"));
    assert_eq!(stat(&rows, "corner_e1"), 31.0);
    assert_eq!(stat(&rows, "lambda_hat"), 32.0);
    let manifest = json(&out.join("manifest.json"));
    assert_eq!(manifest["status"], "completed");
    assert_eq!(manifest["config"]["sizes"]["n"], 32);
    assert!(out.join("config.resolved.toml").exists());
}

#[test]
fn oracle_reports_the_three_site_law() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "[sizes]\nn = 3\n");
    let out = tmp.path().join("out");
    let o = lrp(&out, &["oracle", "--config", &cfg, "--format", "json"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let summary = json(&out.join("oracle.summary.json"));
    let law = &summary["summary"]["diameter"]["law"];
    assert!((law["1"].as_f64().unwrap() - 0.25).abs() < 1e-12);
    assert!((law["2"].as_f64().unwrap() - 0.75).abs() < 1e-12);
    let table = json(&out.join("oracle.json"));
    assert_eq!(table["format"], "lrp-data");
}

#[test]
fn unknown_keys_are_rejected_with_a_record() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "[sizes]\nn = 8\nreplicate = 10\n");
    let out = tmp.path().join("out");
    let o = lrp(&out, &["lambda", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    let err = json(&out.join("error.json"));
    assert_eq!(err["kind"], "config");
    assert!(err["message"].as_str().unwrap().contains("replicate"));
    assert!(!out.join("lambda.csv").exists());
}

#[test]
fn invalid_values_fail_before_sampling() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let cfg = write_config(tmp.path(), "[sizes]\nn = 8\n");
    let o = lrp(&out, &["consets", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    let o = lrp(&out, &["lambda", "--seed", "1", "--workers", "1", "--config", "/nonexistent.toml"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn same_seed_same_bytes() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "[sizes]\nn = 16\nreplicates = 50\n");
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    assert!(lrp(&a, &["distance", "--config", &cfg, "--workers", "1"]).status.success());
    assert!(lrp(&b, &["distance", "--config", &cfg, "--workers", "3"]).status.success());
    for f in ["distance.csv", "distance.summary.json", "config.resolved.toml"] {
        let (x, y) = (fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap());
        // The resolved config records the worker count; data files must not.
        if f.ends_with(".toml") {
            assert_ne!(x, y);
        } else {
            assert_eq!(x, y, "{f}");
        }
    }
}

#[test]
fn verify_subset_prints_one_line_per_criterion() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let o = lrp(&out, &["verify", "--smoke", "--criteria", "1,8"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("criterion 1: PASS"));
    assert!(text.contains("criterion 8: PASS"));
    assert!(text.contains("2/2 criteria passed"));
    let summary = json(&out.join("verify.summary.json"));
    assert_eq!(summary["passed"], true);
}

#[test]
fn failing_criteria_exit_nonzero() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let o = lrp(&out, &["verify", "--smoke", "--criteria", "15"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8(o.stdout).unwrap().contains("criterion 15: FAIL"));
    assert_eq!(json(&out.join("error.json"))["kind"], "check_failed");
    assert_eq!(json(&out.join("manifest.json"))["status"], "failed");
}
