//! Exit-code and artifact contract of the installed binary.

use std::fs;
use std::path::Path;
use std::process::Command;

use cran_mm_core::SystemConfig;

fn binary() -> Command {
    Command::new(env!("CARGO_BIN_EXE_cran-mm"))
}

fn write_tiny_config(dir: &Path) -> std::path::PathBuf {
    let mut cfg = SystemConfig::desk_default();
    cfg.K = 1;
    cfg.L = 1;
    cfg.N_U = vec![1];
    cfg.N_H = vec![1];
    cfg.N_C = 8;
    cfg.weights = vec![1.0];
    cfg.seed = 3;
    let path = dir.join("tiny.json");
    fs::write(&path, serde_json::to_string_pretty(&cfg).unwrap()).unwrap();
    path
}

#[test]
fn run_writes_artifacts_and_exits_clean() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_tiny_config(dir.path());
    let out = dir.path().join("out");
    let status = binary()
        .args(["run", "--config"])
        .arg(&config)
        .args(["--sweep", "pu", "--values", "10,20", "--schemes", "mr", "--trials", "1", "--out"])
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    assert!(out.join("sweep.csv").exists());
    assert!(out.join("sweep_meta.json").exists());
}

#[test]
fn missing_config_is_a_hard_error() {
    let dir = tempfile::tempdir().unwrap();
    let status = binary()
        .args(["run", "--config", "/nonexistent/cfg.json"])
        .args(["--sweep", "pu", "--values", "10", "--out"])
        .arg(dir.path().join("out"))
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(1));
}

#[test]
fn converge_emits_a_trace_for_the_shipped_config() {
    let dir = tempfile::tempdir().unwrap();
    let config = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/desk.json");
    let out = dir.path().join("out");
    let output = binary()
        .args(["converge", "--config"])
        .arg(&config)
        .args(["--scheme", "zf", "--out"])
        .arg(&out)
        .output()
        .unwrap();
    assert!(output.status.success(), "{}", String::from_utf8_lossy(&output.stderr));
    let body = fs::read_to_string(out.join("convergence.csv")).unwrap();
    assert!(body.starts_with("iteration,objective\n0,"));
}
