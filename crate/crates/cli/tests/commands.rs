use std::path::PathBuf;
use std::process::Command;

use clap::Parser;
use slicelab::harness::{ScenarioConfig, REFERENCE_SCENARIO};
use slicelab_cli::{execute, Cli, CliError};

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("slicelab-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

fn exec(args: &[&str]) -> Result<String, CliError> {
    let cli = Cli::try_parse_from(std::iter::once("slicelab").chain(args.iter().copied())).unwrap();
    let mut out = Vec::new();
    execute(cli, &mut out).map(|()| String::from_utf8(out).unwrap())
}

#[test]
fn validate_reports_the_reference_scenario() {
    let out = exec(&["validate"]).unwrap();
    assert!(out.starts_with("ok: reference (4 slices"), "{out}");
}

#[test]
fn validate_rejects_bad_files_with_exit_code_two() {
    let path = scratch("bad.toml");
    std::fs::write(
        &path,
        REFERENCE_SCENARIO.replace("duration_s = 480", "duration_s = 0"),
    )
    .unwrap();
    let err = exec(&["validate", path.to_str().unwrap()]).unwrap_err();
    assert_eq!(err.exit_code(), 2);
    assert!(err.to_string().contains("duration_s"), "{err}");
}

#[test]
fn run_writes_report_and_log_then_replays() {
    let log = scratch("run.jsonl");
    let report = scratch("run.json");
    let out = exec(&[
        "run",
        "--duration",
        "45",
        "--seed",
        "7",
        "--log",
        log.to_str().unwrap(),
        "--report",
        report.to_str().unwrap(),
    ])
    .unwrap();
    assert!(out.contains("digest"));
    let r: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(r["seed"], 7);
    assert_eq!(r["elapsed_s"], 45.0);
    let ok = exec(&[
        "replay",
        log.to_str().unwrap(),
        "--duration",
        "45",
        "--seed",
        "7",
    ])
    .unwrap();
    assert!(ok.starts_with("replay matches"), "{ok}");
    let err = exec(&[
        "replay",
        log.to_str().unwrap(),
        "--duration",
        "45",
        "--seed",
        "8",
    ])
    .unwrap_err();
    assert!(matches!(err, CliError::ReplayMismatch { .. }));
    assert_eq!(err.exit_code(), 1);
}

#[test]
fn compare_writes_csv_for_selected_controllers() {
    let csv = scratch("cmp.csv");
    let out = exec(&[
        "compare",
        "--duration",
        "30",
        "--controllers",
        "static_equal,heuristic",
        "--csv",
        csv.to_str().unwrap(),
    ])
    .unwrap();
    assert!(out.contains("static_equal") && out.contains("heuristic"));
    let text = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().count(), 1 + 2 * 4);
    assert!(text.starts_with("controller,phase,slice_id"));
}

#[test]
fn overrides_apply_to_scenario_files() {
    let path = scratch("ref.toml");
    std::fs::write(&path, ScenarioConfig::reference().to_toml()).unwrap();
    let out = exec(&[
        "validate",
        path.to_str().unwrap(),
        "--controller",
        "heuristic",
        "--duration",
        "100",
    ])
    .unwrap();
    assert!(out.contains("100 s, controller heuristic"), "{out}");
}

#[test]
fn unknown_controller_is_a_usage_error() {
    assert!(Cli::try_parse_from(["slicelab", "run", "--controller", "oracle"]).is_err());
}

#[test]
fn binary_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_slicelab");
    let ok = Command::new(bin).arg("validate").output().unwrap();
    assert!(ok.status.success());
    let missing = Command::new(bin)
        .args(["validate", "/nonexistent/scenario.toml"])
        .output()
        .unwrap();
    assert_eq!(missing.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&missing.stderr).contains("error:"));
    let usage = Command::new(bin).arg("frobnicate").output().unwrap();
    assert_eq!(usage.status.code(), Some(2));
}
