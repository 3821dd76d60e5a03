//! End-to-end checks of the binary: exit codes, emitted files, and the
//! shipped example scenarios.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn run_cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_colombeau"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_scenario(dir: &Path, text: &str) -> PathBuf {
    let path = dir.join("scenario.json");
    fs::write(&path, text).unwrap();
    path
}

fn scenarios_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios")
}

#[test]
fn successful_run_exits_zero_and_writes_the_envelope() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let scenario = scenarios_dir().join("classify_mollifier.json");
    let output = run_cli(&[
        "classify",
        "--scenario",
        scenario.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(output.status.code(), Some(0), "{output:?}");
    let report: Value =
        serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["tool"], "colombeau");
    assert_eq!(report["command"], "classify");
    assert_eq!(report["pass"], true);
    assert_eq!(report["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(report["scenario_sha256"].as_str().unwrap().len(), 64);
    assert_eq!(report["report"]["verdict"], "moderate(1)");
    assert!(out.join("seminorms.csv").exists());
}

#[test]
fn failing_check_exits_one_but_still_reports() {
    // Coefficients of size 10 cannot satisfy the decay bound |b_n| ≤ e^{−M(√n)}.
    let tmp = tempfile::tempdir().unwrap();
    let scenario = write_scenario(
        tmp.path(),
        r#"{
            "grid": {"levels": 4},
            "coefficients": [10.0, 10.0, 10.0, 10.0, 10.0],
            "weights": {"gevrey": {"s": 2.0, "p_max": 64}},
            "direction": "decay",
            "inclusion": false
        }"#,
    );
    let out = tmp.path().join("out");
    let output = run_cli(&[
        "hermite",
        "--scenario",
        scenario.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(output.status.code(), Some(1), "{output:?}");
    let report: Value =
        serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["pass"], false);
    assert_eq!(report["report"]["decay"]["pass"], false);
}

#[test]
fn malformed_scenario_exits_two() {
    let tmp = tempfile::tempdir().unwrap();
    let scenario = write_scenario(tmp.path(), "{not json");
    let out = tmp.path().join("out");
    let output = run_cli(&[
        "classify",
        "--scenario",
        scenario.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(output.status.code(), Some(2), "{output:?}");
    assert!(!output.stderr.is_empty());
}

#[test]
fn missing_scenario_file_exits_two() {
    let tmp = tempfile::tempdir().unwrap();
    let output = run_cli(&[
        "classify",
        "--scenario",
        tmp.path().join("nope.json").to_str().unwrap(),
        "--out",
        tmp.path().join("out").to_str().unwrap(),
    ]);
    assert_eq!(output.status.code(), Some(2), "{output:?}");
}

#[test]
fn exhausted_budget_exits_three() {
    let tmp = tempfile::tempdir().unwrap();
    let scenario = write_scenario(
        tmp.path(),
        r#"{
            "grid": {"levels": 4},
            "kernel": {"family": "gaussian", "rate": 1.0},
            "input": {"family": "gaussian", "rate": 1.0},
            "epsilon": 0.25,
            "points": [[0.0]],
            "budget": 1
        }"#,
    );
    let out = tmp.path().join("out");
    let output = run_cli(&[
        "expmap",
        "--scenario",
        scenario.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(output.status.code(), Some(3), "{output:?}");
}

#[test]
fn cli_overrides_are_applied() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let scenario = scenarios_dir().join("classify_mollifier.json");
    let output = run_cli(&[
        "classify",
        "--scenario",
        scenario.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--eps-levels",
        "5",
    ]);
    assert_eq!(output.status.code(), Some(0), "{output:?}");
    let csv = fs::read_to_string(out.join("seminorms.csv")).unwrap();
    assert_eq!(csv.lines().count(), 6, "5 grid levels plus the header");
}

#[test]
fn every_shipped_scenario_runs_clean() {
    let tmp = tempfile::tempdir().unwrap();
    let mut seen = 0;
    for entry in fs::read_dir(scenarios_dir()).unwrap() {
        let path = entry.unwrap().path();
        let name = path.file_stem().unwrap().to_str().unwrap().to_owned();
        let command = name.split('_').next().unwrap().to_owned();
        let out = tmp.path().join(&name);
        let output = run_cli(&[
            &command,
            "--scenario",
            path.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(output.status.code(), Some(0), "{name}: {output:?}");
        assert!(out.join("report.json").exists(), "{name}");
        seen += 1;
    }
    assert_eq!(seen, 4, "one example per subcommand");
}
