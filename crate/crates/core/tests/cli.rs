// The command-line front end: exit codes, one-line errors and artifact layout.
use std::path::Path;
use std::process::{Command, Output};

fn roamsim(args: &[&str], out_env: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_roamsim"));
    cmd.args(args).env_remove("ROAMSIM_OUT");
    if let Some(dir) = out_env {
        cmd.env("ROAMSIM_OUT", dir);
    }
    cmd.output().expect("binary runs")
}

fn fixture(name: &str) -> String {
    format!("{}/examples/{name}", env!("CARGO_MANIFEST_DIR"))
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn validate_accepts_every_fixture() {
    for f in ["two_country_baseline.json", "table1_western_europe.json", "steering_transition.json"] {
        let o = roamsim(&["validate", &fixture(f)], None);
        assert!(o.status.success(), "{f}: {}", stderr(&o));
        assert!(stdout(&o).contains("ok"));
    }
}

#[test]
fn run_of_missing_file_names_the_path() {
    let o = roamsim(&["run", "missing.json"], None);
    assert!(!o.status.success());
    let err = stderr(&o);
    assert!(err.contains("missing.json"), "{err}");
    assert_eq!(err.trim_end().lines().count(), 1, "{err}");
}

#[test]
fn invalid_scenario_reports_the_offending_field() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(fixture("two_country_baseline.json"))
        .unwrap()
        .replace("\"markup\": \"0.2\"", "\"markup\": \"1.5\"");
    let path = dir.path().join("bad.json");
    std::fs::write(&path, text).unwrap();
    let o = roamsim(&["validate", path.to_str().unwrap()], None);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("retail[0].scheme.markup"), "{}", stderr(&o));
}

#[test]
fn run_writes_artifacts_to_out_then_env_directory() {
    let dir = tempfile::tempdir().unwrap();
    let explicit = dir.path().join("explicit");
    let o = roamsim(&["run", &fixture("two_country_baseline.json"), "--out", explicit.to_str().unwrap()], None);
    assert!(o.status.success(), "{}", stderr(&o));
    for f in roamsim::export::ARTIFACTS {
        assert!(explicit.join(f).is_file(), "missing {f}");
    }
    let from_env = dir.path().join("env");
    let o = roamsim(&["run", &fixture("two_country_baseline.json"), "--seed", "3"], Some(&from_env));
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(from_env.join("metrics.csv").is_file());

    let o = roamsim(&["report", explicit.to_str().unwrap()], None);
    assert!(o.status.success(), "{}", stderr(&o));
    let report = stdout(&o);
    assert!(report.starts_with("period"));
    assert_eq!(report.lines().count(), 1 + 12 * 2);
}

#[test]
fn externality_prints_zero_share_deltas_and_more_minutes() {
    let o = roamsim(
        &[
            "experiment",
            "externality",
            &fixture("two_country_baseline.json"),
            "--target",
            "A1",
            "--delta",
            "0.3",
        ],
        None,
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("max |share delta| = 0"), "{text}");
    assert!(text.contains("country minutes 52459 -> 69624 (+17165)"), "{text}");
}

#[test]
fn externality_refuses_steering_scenarios() {
    let o = roamsim(
        &[
            "experiment",
            "externality",
            &fixture("steering_transition.json"),
            "--target",
            "A2",
            "--delta",
            "0.1",
        ],
        None,
    );
    assert!(!o.status.success());
    assert!(stderr(&o).contains("precondition"), "{}", stderr(&o));
}

#[test]
fn report_of_empty_directory_fails_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let o = roamsim(&["report", dir.path().to_str().unwrap()], None);
    assert!(!o.status.success());
    assert!(stderr(&o).starts_with("error: "));
}
