use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use fibervitals::cli::ReportFile;
use serde_json::json;
use tempfile::TempDir;

fn fibervitals(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fibervitals"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write_config(dir: &TempDir, name: &str, value: serde_json::Value) -> PathBuf {
    let path = dir.path().join(name);
    std::fs::write(&path, value.to_string()).unwrap();
    path
}

fn treadmill(dir: &TempDir) -> PathBuf {
    let config = write_config(
        dir,
        "treadmill.json",
        json!({ "scenario": { "duration": 60.0, "cadence": 2.43, "respiration_rate": 0.3, "noise_sd": 0.001, "seed": 7 } }),
    );
    let csv = dir.path().join("treadmill.csv");
    let out = fibervitals(&["simulate", "--config", s(&config), "--output", s(&csv)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    csv
}

fn read_csv(path: &Path) -> Vec<Vec<f64>> {
    let mut reader = csv::Reader::from_path(path).unwrap();
    reader
        .records()
        .map(|r| r.unwrap().iter().map(|v| v.parse().unwrap()).collect())
        .collect()
}

#[test]
fn simulate_writes_recording_and_truth() {
    let dir = tempfile::tempdir().unwrap();
    let csv = treadmill(&dir);
    let text = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().next().unwrap(), "time_s,chest,wrist,ankle");
    assert_eq!(text.lines().count(), 1 + 60 * 250);
    let truth: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("treadmill.csv.truth.json")).unwrap()).unwrap();
    assert!(truth["channels"][0]["foot_times"].as_array().unwrap().len() > 40);
}

#[test]
fn reruns_are_byte_identical_and_seed_flag_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(&dir, "c.json", json!({ "scenario": { "duration": 20.0, "noise_sd": 0.003, "seed": 1 } }));
    let run = |name: &str, extra: &[&str]| {
        let out = dir.path().join(name);
        let mut args = vec!["simulate", "--config", s(&config), "--output", s(&out)];
        args.extend_from_slice(extra);
        assert!(fibervitals(&args).status.success());
        (std::fs::read(&out).unwrap(), std::fs::read(dir.path().join(format!("{name}.truth.json"))).unwrap())
    };
    let a = run("a.csv", &[]);
    let b = run("b.csv", &[]);
    let c = run("c.csv", &["--seed", "2"]);
    assert!(a == b);
    assert!(a.0 != c.0);
}

#[test]
fn unknown_config_key_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(&dir, "bad.json", json!({ "scenario": { "seed": 1, "heart_rat": 60 } }));
    let out = fibervitals(&["simulate", "--config", s(&config), "--output", s(&dir.path().join("x.csv"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("heart_rat"));
}

#[test]
fn analyze_reports_pwv_and_cadence() {
    let dir = tempfile::tempdir().unwrap();
    let csv = treadmill(&dir);
    let report = dir.path().join("report.json");
    let out = fibervitals(&[
        "analyze",
        s(&csv),
        "--distance-m",
        "0.77",
        "--speed-kmh",
        "7",
        "--report",
        s(&report),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let file: ReportFile = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    let pwv = file.report.pwv.unwrap();
    assert!((pwv - 0.77 / 0.092).abs() < 0.3, "{pwv}");
    assert!((file.report.cadence.unwrap() - 2.43).abs() < 1.0 / 30.0);
    assert!(file.report.heart_rate.is_some() && file.report.prv.is_some());
    assert_eq!(file.metadata.tool_version, env!("CARGO_PKG_VERSION"));
    assert!(file.report.is_well_formed());
}

#[test]
fn chest_only_file_gives_respiration_only() {
    let dir = tempfile::tempdir().unwrap();
    let csv = treadmill(&dir);
    let chest = dir.path().join("chest.csv");
    let mut text = String::from("time_s,chest\n");
    for line in std::fs::read_to_string(&csv).unwrap().lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        text.push_str(&format!("{},{}\n", f[0], f[1]));
    }
    std::fs::write(&chest, text).unwrap();
    let report = dir.path().join("r.json");
    let out = fibervitals(&["analyze", s(&chest), "--report", s(&report)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert!((v["respiration_rate"].as_f64().unwrap() - 18.0).abs() < 60.0 / 30.0);
    for absent in ["heart_rate", "prv", "pwv", "cadence", "step_length"] {
        assert!(v.get(absent).is_none(), "{absent} present");
    }
}

#[test]
fn malformed_inputs_exit_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.csv");
    std::fs::write(&empty, "").unwrap();
    assert_eq!(fibervitals(&["analyze", s(&empty)]).status.code(), Some(2));

    let jagged = dir.path().join("jagged.csv");
    std::fs::write(&jagged, "time_s,wrist\n0,1\n0.004,abc\n").unwrap();
    let out = fibervitals(&["analyze", s(&jagged)]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("row 3") && err.contains("wrist"), "{err}");

    assert_eq!(fibervitals(&["analyze", s(&dir.path().join("missing.csv"))]).status.code(), Some(2));
}

#[test]
fn usage_errors_exit_with_code_one() {
    let dir = tempfile::tempdir().unwrap();
    let csv = treadmill(&dir);
    let out_path = dir.path().join("psd.csv");
    assert_eq!(fibervitals(&["spectrum", s(&csv), "--column", "knee", "--output", s(&out_path)]).status.code(), Some(1));
    assert_eq!(fibervitals(&["analyze", s(&csv), "--distance-m", "-1"]).status.code(), Some(1));
    assert_eq!(fibervitals(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(fibervitals(&["--help"]).status.code(), Some(0));
}

#[test]
fn flat_pulse_channel_is_an_analysis_failure() {
    let dir = tempfile::tempdir().unwrap();
    let flat = dir.path().join("flat.csv");
    let mut text = String::from("time_s,wrist\n");
    for i in 0..(60 * 250) {
        text.push_str(&format!("{},0\n", i as f64 / 250.0));
    }
    std::fs::write(&flat, text).unwrap();
    let out = fibervitals(&["analyze", s(&flat)]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn spectrum_peaks_sit_at_breathing_and_cadence() {
    let dir = tempfile::tempdir().unwrap();
    let csv = treadmill(&dir);
    let psd = dir.path().join("psd.csv");
    let out = fibervitals(&["spectrum", s(&csv), "--column", "chest", "--output", s(&psd)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(
        std::fs::read_to_string(&psd).unwrap().lines().next().unwrap(),
        "frequency_Hz,psd"
    );
    let rows = read_csv(&psd);
    let df = rows[1][0] - rows[0][0];
    let local_max: Vec<&Vec<f64>> = rows
        .windows(3)
        .filter(|w| w[1][1] > w[0][1] && w[1][1] >= w[2][1])
        .map(|w| &w[1])
        .collect();
    let mut peaks = local_max.clone();
    peaks.sort_by(|a, b| b[1].total_cmp(&a[1]));
    let mut top: Vec<f64> = peaks[..2].iter().map(|r| r[0]).collect();
    top.sort_by(f64::total_cmp);
    assert!((top[0] - 0.3).abs() <= df && (top[1] - 2.43).abs() <= df, "{top:?}");
}

#[test]
fn spectrum_of_zero_signal_is_zero() {
    let dir = tempfile::tempdir().unwrap();
    let zero = dir.path().join("zero.csv");
    let mut text = String::from("time_s,chest\n");
    for i in 0..(40 * 100) {
        text.push_str(&format!("{},0\n", i as f64 / 100.0));
    }
    std::fs::write(&zero, text).unwrap();
    let psd = dir.path().join("psd.csv");
    assert!(fibervitals(&["spectrum", s(&zero), "--column", "chest", "--output", s(&psd)]).status.success());
    let rows = read_csv(&psd);
    assert!(!rows.is_empty() && rows.iter().all(|r| r[1] == 0.0));
}
