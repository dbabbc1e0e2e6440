use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use chrono::{TimeZone, Utc};
use inlet_core::stats::{write_results_csv, AnalysisResult};

fn inlet(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_inlet")).args(args).output().expect("binary runs")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Three days of hourly readings at a fixed temperature.
fn constant_room(dir: &Path) {
    let mut temps = String::from("timestamp,value\n");
    let mut power = String::from("timestamp,value\n");
    for h in 0..72 {
        let t = Utc.with_ymd_and_hms(2024, 2, 1, 0, 0, 0).unwrap() + chrono::Duration::hours(h);
        temps.push_str(&format!("{},24.0\n", t.to_rfc3339()));
        power.push_str(&format!("{},100.0\n", t.to_rfc3339()));
    }
    fs::write(dir.join("r1_temp.csv"), temps).unwrap();
    fs::write(dir.join("r1_power.csv"), power).unwrap();
    fs::write(
        dir.join("r1.json"),
        r#"{"room_id": "r1", "temperature_files": ["r1_temp.csv"], "power_files": ["r1_power.csv"]}"#,
    )
    .unwrap();
}

fn result(sensitivity: f64) -> AnalysisResult {
    AnalysisResult {
        room_id: "r1".into(),
        event_time: Utc.with_ymd_and_hms(2024, 2, 2, 0, 0, 0).unwrap(),
        window_hours: 24.0,
        guard_minutes: 0.0,
        temp_before: 24.0,
        temp_after: 26.0,
        n_before: 24,
        n_after: 24,
        mean_power_before: 100.0,
        mean_power_after: 100.8,
        pearson_r: 0.9,
        pearson_p: 0.001,
        spearman_rho: 0.85,
        spearman_p: 0.002,
        sensitivity_abs: sensitivity,
        sensitivity_rel: sensitivity,
        confounded: false,
    }
}

#[test]
fn constant_temperature_gives_header_only() {
    let dir = tempfile::tempdir().unwrap();
    constant_room(dir.path());
    let events = dir.path().join("events.csv");
    let out = inlet(&["detect", "--rooms", path(dir.path()), "--window-hours", "12", "--threshold", "0.8", "--out", path(&events)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(fs::read_to_string(&events).unwrap(), "room_id,event_time,temp_before,temp_after,magnitude\n");
}

#[test]
fn usage_errors_exit_one_and_write_nothing() {
    let dir = tempfile::tempdir().unwrap();
    constant_room(dir.path());
    let events = dir.path().join("events.csv");
    let out = inlet(&["detect", "--rooms", path(dir.path()), "--bogus", "--out", path(&events)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
    assert!(!events.exists());

    let out = inlet(&["detect", "--rooms", path(dir.path()), "--threshold", "-1", "--out", path(&events)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!events.exists());

    let res = dir.path().join("opt");
    let out = inlet(&["optimize", "--t-min", "30", "--t-max", "20", "--out", path(&res)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!res.exists());

    assert_eq!(inlet(&[]).status.code(), Some(1));
}

#[test]
fn data_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = inlet(&["detect", "--rooms", path(&dir.path().join("missing"))]);
    assert_eq!(out.status.code(), Some(2));

    let scenario = dir.path().join("bad.json");
    fs::write(&scenario, "{\"rooms\": []}").unwrap();
    let sim = dir.path().join("sim");
    let out = inlet(&["simulate", "--scenario", path(&scenario), "--out", path(&sim)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!sim.exists());

    let results = dir.path().join("results.csv");
    fs::write(&results, "not,a\nresults,file\n").unwrap();
    assert_eq!(inlet(&["report", "--results", path(&results)]).status.code(), Some(2));
}

#[test]
fn help_lists_detector_defaults() {
    let out = inlet(&["detect", "--help"]);
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("[default: 12]"));
    assert!(text.contains("[default: 0.8]"));
    let out = inlet(&["analyze", "--help"]);
    assert!(String::from_utf8_lossy(&out.stdout).contains("[default: 24,48,168,336,720]"));
}

#[test]
fn report_edge_cases() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.csv");
    let mut buf = Vec::new();
    write_results_csv(&[], &mut buf).unwrap();
    fs::write(&empty, buf).unwrap();
    let out = inlet(&["report", "--results", path(&empty)]);
    assert!(out.status.success());
    assert_eq!(String::from_utf8_lossy(&out.stdout), "no analyses\n");

    let single = dir.path().join("single.csv");
    let mut buf = Vec::new();
    write_results_csv(&[result(0.4)], &mut buf).unwrap();
    fs::write(&single, buf).unwrap();
    let out = inlet(&["report", "--results", path(&single)]);
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("mean sensitivity: 0.40 ± 0.00 %/°C"), "{text}");
    assert!(text.contains("24h: 1 positive, 0 negative"));
}

#[test]
fn minute_fixture_reports_every_short_window_positive() {
    let dir = tempfile::tempdir().unwrap();
    let sim = dir.path().join("sim");
    let an = dir.path().join("an");
    let out = inlet(&["simulate", "--preset", "minute-steps", "--seed", "2", "--out", path(&sim)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let out = inlet(&["analyze", "--rooms", path(&sim), "--windows", "1,2,24,168", "--out", path(&an)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let results = fs::read_to_string(an.join("results.csv")).unwrap();
    assert_eq!(results.lines().count(), 1 + 28);
    assert_eq!(fs::read_dir(an.join("plots")).unwrap().count(), 28);
    let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(an.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["count"], 28);

    let out = inlet(&["report", "--results", path(&an.join("results.csv"))]);
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("1h: 7 positive, 0 negative"), "{text}");
    assert!(text.contains("2h: 7 positive, 0 negative"), "{text}");
}

#[test]
fn optimize_writes_curve_and_result() {
    let dir = tempfile::tempdir().unwrap();
    let profile = dir.path().join("profile.csv");
    fs::write(&profile, "load_kw,outdoor_c\n100,30\n120,25\n90,35\n").unwrap();
    let out_dir = dir.path().join("opt");
    let out = inlet(&[
        "optimize", "--profile", path(&profile), "--t-min", "20", "--t-max", "30", "--step", "0.5", "--out", path(&out_dir),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let curve = fs::read_to_string(out_dir.join("curve.csv")).unwrap();
    assert!(curve.starts_with("t_inlet,mean_total_kw,mean_pue,economizer_share\n"));
    assert_eq!(curve.lines().count(), 1 + 21);
    let result: serde_json::Value = serde_json::from_str(&fs::read_to_string(out_dir.join("result.json")).unwrap()).unwrap();
    let t = result["optimal_t"].as_f64().unwrap();
    assert!((20.0..=30.0).contains(&t));
    assert_eq!(result["tolerance"], 0.01);
}
