use std::path::PathBuf;
use std::process::Command;

fn tactwin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_tactwin"))
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("tactwin-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

#[test]
fn fixtures_write_json_and_table() {
    let json = scratch("fixtures.json");
    let csv = scratch("fixtures.csv");
    let out = tactwin()
        .args(["fixtures", "--out"])
        .arg(&json)
        .arg("--csv")
        .arg(&csv)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let evals: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
    let evals = evals.as_array().unwrap();
    assert_eq!(evals.len(), 2);
    assert!(evals.iter().all(|e| e["pass"] == true));
    let table = std::fs::read_to_string(&csv).unwrap();
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[0].starts_with("configuration,indenter,avg_error_mm"));
    assert!(lines[1].starts_with("rest,small,"));
    assert!(lines[2].starts_with("deformed,small,"));
}

#[test]
fn unknown_fixture_fails() {
    let out = tactwin().args(["fixtures", "--name", "nope"]).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("nope"));
}

#[test]
fn probe_prints_report_to_stdout() {
    let points = scratch("points.csv");
    let out = tactwin()
        .args(["probe", "--indenter", "medium", "--points-csv"])
        .arg(&points)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["configuration"], "rest");
    let detected = report["report"]["detected"].as_u64().unwrap();
    assert!(detected > 0);
    let rows = std::fs::read_to_string(&points).unwrap().lines().count();
    assert_eq!(rows as u64, detected + 1);
}

#[test]
fn unknown_indenter_is_reported() {
    let out = tactwin().args(["probe", "--indenter", "huge"]).output().unwrap();
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("huge") && err.contains("small"), "{err}");
}

#[test]
fn shift_report_from_schedule_file() {
    let schedule = scratch("hold.json");
    std::fs::write(
        &schedule,
        r#"{"sample_dt_s": 0.5, "keyframes": [{"time_s": 1.0, "cavity": "c1", "pa": 0.0}]}"#,
    )
    .unwrap();
    let out = tactwin()
        .args(["shift-report", "--schedule"])
        .arg(&schedule)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["global_max"].as_f64().unwrap(), 0.0);

    let out = tactwin()
        .args(["shift-report", "--schedule", "missing"])
        .output()
        .unwrap();
    assert!(!out.status.success());
}
