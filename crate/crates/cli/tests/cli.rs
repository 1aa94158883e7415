//! End-to-end checks of the `readmit` binary: exit codes, output
//! directory resolution and optional datasets.

use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use sha2::{Digest, Sha256};

const SMALL: &str = r#"
seed = 3
[synth]
n_rows = 1500
external_rows = 500
[forest]
n_trees = 10
[cv]
k = 3
[selection]
k = 3
n_trees = 8
max_features = 3
[explain]
max_rows = 100
"#;

fn readmit(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_readmit"))
        .args(args)
        .current_dir(dir)
        .env_remove("READMIT_OUT")
        .output()
        .unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn write_config(dir: &Path, extra: &str) -> String {
    let path = dir.join("config.toml");
    std::fs::write(&path, format!("{SMALL}{extra}")).unwrap();
    path.to_string_lossy().into_owned()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_slice(&std::fs::read(path).unwrap()).unwrap()
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = readmit(&["run", "--no-such-flag"], dir.path());
    assert_eq!(code(&out), 2);
}

#[test]
fn help_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let out = readmit(&["--help"], dir.path());
    assert_eq!(code(&out), 0);
    assert!(String::from_utf8_lossy(&out.stdout).contains("explain"));
}

#[test]
fn invalid_config_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    std::fs::write(&path, "[cv]\nk = 1\n").unwrap();
    let out = readmit(&["--config", path.to_str().unwrap(), "synth"], dir.path());
    assert_eq!(code(&out), 2);
}

#[test]
fn missing_config_file_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let out = readmit(&["--config", "nowhere.toml", "synth"], dir.path());
    assert_ne!(code(&out), 0);
    assert!(!String::from_utf8_lossy(&out.stderr).is_empty());
}

#[test]
fn stage_without_inputs_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    for stage in ["preprocess", "select", "train", "evaluate", "explain"] {
        let out = readmit(&["--seed", "1", "--out", "empty", stage], dir.path());
        assert_eq!(code(&out), 3, "{stage}: {}", String::from_utf8_lossy(&out.stderr));
    }
}

#[test]
fn out_flag_takes_precedence_over_environment() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "");
    let status = Command::new(env!("CARGO_BIN_EXE_readmit"))
        .args(["--config", &config, "--out", "flag", "synth"])
        .current_dir(dir.path())
        .env("READMIT_OUT", dir.path().join("env"))
        .status()
        .unwrap();
    assert!(status.success());
    assert!(dir.path().join("flag/data/train.csv").exists());
    assert!(!dir.path().join("env").exists());

    let status = Command::new(env!("CARGO_BIN_EXE_readmit"))
        .args(["--config", &config, "synth"])
        .current_dir(dir.path())
        .env("READMIT_OUT", dir.path().join("env"))
        .status()
        .unwrap();
    assert!(status.success());
    assert!(dir.path().join("env/data/train.csv").exists());
}

#[test]
fn missing_external_set_is_marked_absent_and_manifest_is_consistent() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "[paths]\nexternal = \"no_such_external.csv\"\n");
    let out = readmit(&["--config", &config, "--out", "out", "run"], dir.path());
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let root = dir.path().join("out");

    let metrics = read_json(&root.join("evaluate/metrics.json"));
    assert!(metrics["external"].is_null());
    assert!(metrics["blind"].is_object());
    let absent: Vec<&str> = metrics["absent"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_str().unwrap())
        .collect();
    assert_eq!(absent, ["external"]);

    let report = std::fs::read_to_string(root.join("report.md")).unwrap();
    assert!(report.contains("absent"), "report should mention the absent set");

    let manifest = read_json(&root.join("manifest.json"));
    assert_eq!(manifest["seed"], 3);
    let artifacts = manifest["artifacts"].as_array().unwrap();
    assert!(artifacts.iter().any(|a| a["path"] == "report.md"));
    assert!(artifacts.iter().all(|a| a["path"] != "manifest.json"));
    for artifact in artifacts {
        let bytes = std::fs::read(root.join(artifact["path"].as_str().unwrap())).unwrap();
        assert_eq!(artifact["bytes"], bytes.len());
        assert_eq!(artifact["sha256"], hex::encode(Sha256::digest(&bytes)));
    }
}

#[test]
fn seed_flag_overrides_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "");
    for (name, seed) in [("a", "3"), ("b", "4")] {
        let out = readmit(&["--config", &config, "--seed", seed, "--out", name, "synth"], dir.path());
        assert_eq!(code(&out), 0);
    }
    let a = std::fs::read(dir.path().join("a/data/train.csv")).unwrap();
    let b = std::fs::read(dir.path().join("b/data/train.csv")).unwrap();
    assert_ne!(a, b);
}
