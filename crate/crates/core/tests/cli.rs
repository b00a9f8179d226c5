mod common;

use std::path::Path;
use std::process::{Command, Output};

fn ep_opinf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ep-opinf")).args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn write_config(dir: &Path) -> String {
    let path = dir.join("tiny.toml");
    let text = common::tiny_burgers_toml(&dir.join("out"), 3, r#""intrusive", "opinf", "ep-opinf""#);
    std::fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn unknown_figure_is_a_usage_error() {
    let out = ep_opinf(&["reproduce", "burgers-spectrum"]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("burgers-violation"));
}

#[test]
fn missing_config_file_is_missing_input() {
    let out = ep_opinf(&["simulate", "--config", "/nonexistent/dir/cfg.toml"]);
    assert_eq!(code(&out), 4);
}

#[test]
fn malformed_config_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    std::fs::write(&path, "problem = \"burgers\"\nmu = \"fast\"\n").unwrap();
    let out = ep_opinf(&["simulate", "--config", path.to_str().unwrap()]);
    assert_eq!(code(&out), 2, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn figure_and_config_problem_must_match() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    let out = ep_opinf(&["reproduce", "kse-nace", "--config", &cfg]);
    assert_eq!(code(&out), 2);
}

#[test]
fn stages_run_in_order_and_report_missing_inputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    let out_dir = dir.path().join("elsewhere");
    let out_arg = out_dir.to_str().unwrap();

    assert_eq!(code(&ep_opinf(&["train", "--config", &cfg, "--output", out_arg])), 4);
    assert_eq!(code(&ep_opinf(&["simulate", "--config", &cfg, "--output", out_arg])), 0);
    assert!(out_dir.join("snapshots/train_003.oimx").exists());
    assert!(!dir.path().join("out").exists());
    assert_eq!(code(&ep_opinf(&["evaluate", "--config", &cfg, "--output", out_arg])), 4);
    assert_eq!(code(&ep_opinf(&["train", "--config", &cfg, "--output", out_arg])), 0);
    assert_eq!(code(&ep_opinf(&["evaluate", "--config", &cfg, "--output", out_arg, "--seed", "99"])), 0);
    assert!(out_dir.join("tables/state_error_test1.csv").exists());
    assert!(out_dir.join("manifest.json").exists());
}

#[test]
fn reproduce_writes_figure_data_and_readme() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("fig");
    let out = ep_opinf(&["reproduce", "burgers-violation", "--output", out_dir.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(out_dir.join("figures/burgers-violation.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("r,intrusive,opinf,ep-opinf"));
    assert_eq!(lines.count(), 10);
    let readme = std::fs::read_to_string(out_dir.join("figures/README.md")).unwrap();
    assert!(readme.contains("reduced dimension r"));
    assert!(String::from_utf8_lossy(&out.stdout).contains("burgers-violation.csv"));
}
