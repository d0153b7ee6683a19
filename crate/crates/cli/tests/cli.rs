use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_var-anomaly"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn simulate_detect_evaluate_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("panel.csv");
    let out = dir.path().join("run");
    let sim = run(&[
        "simulate",
        "--dim",
        "4",
        "--horizon",
        "400",
        "--window",
        "320:380",
        "--entries",
        "4",
        "--size",
        "0.4",
        "--seed",
        "3",
        "--output",
        s(&data),
    ]);
    assert!(sim.status.success(), "{}", String::from_utf8_lossy(&sim.stderr));
    assert_eq!(fs::read_to_string(&data).unwrap().lines().count(), 401);

    let cfg = dir.path().join("run.toml");
    fs::write(
        &cfg,
        "has_header = true\ncalibration_runs = 30\nquantile = 0.9\nseed = 1\n\n[intervals]\nkind = \"seeded\"\ndecay = 0.8\n",
    )
    .unwrap();
    let det = run(&["detect", "--config", s(&cfg), "--data", s(&data), "--out", s(&out)]);
    let stdout = String::from_utf8_lossy(&det.stdout);
    assert!(det.status.success(), "{}", String::from_utf8_lossy(&det.stderr));
    assert!(stdout.contains("anomaly at rows"), "{stdout}");
    for f in ["manifest.json", "statistics.csv", "detection.csv", "calibration.csv"] {
        assert!(out.join(f).exists(), "{f} missing");
    }
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config"]["calibration_runs"], 30);
    assert_eq!(manifest["split"]["test"], serde_json::json!([201, 400]));

    let ev = run(&[
        "evaluate",
        "--detection",
        s(&out.join("detection.csv")),
        "--truth",
        "120:180",
        "--horizon",
        "200",
    ]);
    assert!(ev.status.success(), "{}", String::from_utf8_lossy(&ev.stderr));
    let report: serde_json::Value = serde_json::from_slice(&ev.stdout).unwrap();
    assert_eq!(report["overlaps_truth"], true);
    assert!(report["hausdorff"].as_f64().unwrap() < 200.0);
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("panel.csv");
    assert!(
        run(&["simulate", "--dim", "3", "--horizon", "200", "--output", s(&data)])
            .status
            .success()
    );
    let cfg = dir.path().join("c.toml");
    fs::write(&cfg, "has_header = true\nthreshold = 1.0\n").unwrap();
    let out = dir.path().join("o");
    let det = run(&[
        "detect",
        "-c",
        s(&cfg),
        "-d",
        s(&data),
        "-o",
        s(&out),
        "--threshold",
        "1e9",
        "--seeded",
        "0.7",
    ]);
    assert!(det.status.success(), "{}", String::from_utf8_lossy(&det.stderr));
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["threshold"], 1e9);
    assert_eq!(manifest["interval_provenance"]["kind"], "seeded");
    assert_eq!(manifest["detected"], serde_json::json!([]));
}

#[test]
fn missing_data_file_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "detect",
        "--data",
        s(&dir.path().join("nope.csv")),
        "--out",
        s(&dir.path().join("o")),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("load"));
    assert!(!dir.path().join("o").exists());
}

#[test]
fn ragged_csv_names_the_row() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("bad.csv");
    fs::write(&data, "1,2\n3,4\n5\n7,8\n").unwrap();
    let out = run(&["detect", "--data", s(&data), "--out", s(&dir.path().join("o"))]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("row 3"), "{err}");
}

#[test]
fn bad_config_value_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("panel.csv");
    assert!(
        run(&["simulate", "--dim", "2", "--horizon", "100", "--output", s(&data)])
            .status
            .success()
    );
    let out = run(&["detect", "--data", s(&data), "--header", "--split", "0.6,0.6,0.2"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("split"));
}

#[test]
fn online_and_calibrate_subcommands() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("panel.csv");
    let sim = run(&[
        "simulate",
        "--dim",
        "3",
        "--horizon",
        "400",
        "--window",
        "300:399",
        "--entries",
        "3",
        "--size",
        "0.3",
        "--seed",
        "7",
        "--output",
        s(&data),
    ]);
    assert!(sim.status.success(), "{}", String::from_utf8_lossy(&sim.stderr));
    let cal_dir = dir.path().join("cal");
    let cal = run(&[
        "calibrate",
        "-d",
        s(&data),
        "-o",
        s(&cal_dir),
        "--header",
        "--runs",
        "20",
        "--seeded",
        "0.8",
    ]);
    assert!(cal.status.success(), "{}", String::from_utf8_lossy(&cal.stderr));
    let rows = fs::read_to_string(cal_dir.join("calibration.csv")).unwrap();
    assert_eq!(rows.lines().next(), Some("run,max_statistic"));
    assert_eq!(rows.lines().count(), 21);

    let on_dir = dir.path().join("online");
    let on = run(&[
        "detect-online",
        "-d",
        s(&data),
        "-o",
        s(&on_dir),
        "--header",
        "--runs",
        "20",
        "--incremental",
    ]);
    assert!(on.status.success(), "{}", String::from_utf8_lossy(&on.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(on_dir.join("online.json")).unwrap()).unwrap();
    assert!(report["threshold"].as_f64().unwrap() > 0.0);
}

#[test]
fn unknown_preset_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "reproduce-tables",
        "--preset",
        "nope",
        "--out",
        s(&dir.path().join("t")),
    ]);
    assert_eq!(out.status.code(), Some(2));
}
