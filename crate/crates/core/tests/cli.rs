use std::fs;
use std::process::Command;

use svassess::synth::{synthetic_functions, BUNDLED_REPORTS};

fn assess() -> Command {
    Command::new(env!("CARGO_BIN_EXE_assess"))
}

#[test]
fn help_and_version_exit_zero() {
    assert_eq!(assess().arg("--help").output().unwrap().status.code(), Some(0));
    assert_eq!(assess().arg("--version").output().unwrap().status.code(), Some(0));
}

#[test]
fn bad_usage_exits_one() {
    assert_eq!(assess().args(["train", "--frobnicate"]).output().unwrap().status.code(), Some(1));
    assert_eq!(assess().args(["train", "--protocol", "rounds7"]).output().unwrap().status.code(), Some(1));
}

#[test]
fn missing_dataset_exits_one_with_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let status = assess()
        .args(["train", "--dataset", "/nonexistent/reports.jsonl", "--out"])
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(status.status.code(), Some(1));
    let manifest = fs::read_to_string(out.join("manifest.json")).unwrap();
    assert!(manifest.contains("does not exist"));
}

#[test]
fn malformed_config_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("c.json");
    fs::write(&config, r#"{"seeds": 1}"#).unwrap();
    let out = assess().arg("ingest").arg("--config").arg(&config).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn unwritable_output_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("r.jsonl");
    fs::write(&data, BUNDLED_REPORTS).unwrap();
    let blocker = dir.path().join("file");
    fs::write(&blocker, "").unwrap();
    let out = assess()
        .arg("ingest")
        .arg("--dataset")
        .arg(&data)
        .arg("--out")
        .arg(blocker.join("sub"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn context_and_assess_text() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("f.jsonl");
    synthetic_functions(12, 3).save(&data).unwrap();
    let out = dir.path().join("ctx");
    let run = assess()
        .args(["context", "--granularity", "function", "--mode", "vuln+function", "--dataset"])
        .arg(&data)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    assert_eq!(fs::read_to_string(out.join("contexts.jsonl")).unwrap().lines().count(), 12);
}

#[test]
fn gradcheck_subcommand() {
    let dir = tempfile::tempdir().unwrap();
    let run = assess().arg("gradcheck").arg("--out").arg(dir.path()).output().unwrap();
    assert!(run.status.success());
    assert!(dir.path().join("gradcheck.csv").exists());
    assert!(fs::read_to_string(dir.path().join("manifest.json")).unwrap().contains("\"ok\""));
}
