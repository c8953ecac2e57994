use std::path::Path;
use std::process::{Command, Output};

fn gazemap(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gazemap")).args(args).output().unwrap()
}

fn arg(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn fixture(name: &str) -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn simulate(dir: &Path) {
    let out = gazemap(&["simulate", "--preset", "participant2", "--out", arg(dir), "--quiet"]);
    assert!(out.status.success(), "{}", stderr(&out));
}

fn map(dir: &Path, extra: &[&str]) -> Output {
    let gaze = dir.join("gaze.jsonl");
    let masks = dir.join("masks.json");
    let meta = dir.join("meta.json");
    let mut args = vec![
        "map",
        "--gaze",
        arg(&gaze),
        "--masks",
        arg(&masks),
        "--meta",
        arg(&meta),
    ];
    args.extend_from_slice(extra);
    gazemap(&args)
}

#[test]
fn map_writes_identical_reports() {
    let dir = tempfile::tempdir().unwrap();
    simulate(dir.path());
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    assert!(map(dir.path(), &["--out", arg(&a)]).status.success());
    let out = map(dir.path(), &["--out", arg(&b)]);
    assert!(out.status.success());
    assert!(stderr(&out).contains("TFR 0.23"), "{}", stderr(&out));
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());

    let stdout = map(dir.path(), &["--quiet"]);
    assert!(stdout.stderr.is_empty());
    assert_eq!(stdout.stdout, std::fs::read(&a).unwrap());
}

#[test]
fn report_echoes_config() {
    let dir = tempfile::tempdir().unwrap();
    simulate(dir.path());
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"min_consecutive": 5, "tie_break": "area_score_id"}"#).unwrap();
    let out = map(dir.path(), &["--config", arg(&cfg), "--quiet"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["config"]["min_consecutive"], 5);
    assert_eq!(report["config"]["tie_break"], "area_score_id");
    assert_eq!(report["config"]["score_threshold"], 0.7);
}

#[test]
fn t0_override_shifts_alignment() {
    let dir = tempfile::tempdir().unwrap();
    simulate(dir.path());
    let out = map(dir.path(), &["--t0-us", "-30000", "--quiet"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["video"]["t0_us"], -30000);
    assert_eq!(report["frames"][0]["target"], "no-gaze");
}

#[test]
fn missing_mask_file_exits_2_naming_it() {
    let dir = tempfile::tempdir().unwrap();
    simulate(dir.path());
    std::fs::remove_file(dir.path().join("masks.json")).unwrap();
    let out = map(dir.path(), &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("masks.json"), "{}", stderr(&out));
}

#[test]
fn invalid_mask_file_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    simulate(dir.path());
    let path = dir.path().join("masks.json");
    let text = std::fs::read_to_string(&path).unwrap();
    let mut doc: serde_json::Value = serde_json::from_str(&text).unwrap();
    doc["frames"][0]["instances"][0]["rle"]["counts"] = serde_json::json!([1, 2, 3]);
    std::fs::write(&path, doc.to_string()).unwrap();
    let out = map(dir.path(), &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("frame 0, instance 0"), "{}", stderr(&out));

    let inspect = gazemap(&["inspect", "--masks", arg(&path)]);
    assert_eq!(inspect.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&inspect.stdout).contains("violations 1"));
}

#[test]
fn config_errors_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    simulate(dir.path());
    let cfg = dir.path().join("cfg.json");
    for bad in [
        r#"{"min_consecutive": 0}"#,
        r#"{"score_threshold": 1.5}"#,
        r#"{"colour": 1}"#,
        "{",
    ] {
        std::fs::write(&cfg, bad).unwrap();
        let out = map(dir.path(), &["--config", arg(&cfg)]);
        assert_eq!(out.status.code(), Some(3), "{bad}: {}", stderr(&out));
    }
}

#[test]
fn metrics_table_over_reports() {
    let dir = tempfile::tempdir().unwrap();
    simulate(dir.path());
    let report = dir.path().join("Participant_2.json");
    assert!(map(dir.path(), &["--out", arg(&report), "--quiet"]).status.success());
    let out = gazemap(&["metrics", "--report", arg(&report)]);
    assert!(out.status.success());
    assert_eq!(
        String::from_utf8(out.stdout).unwrap(),
        "trial,trial_duration_ms,DT_H1,DT_H2,DT_H3,FC,TFR\nParticipant_2,26120,3360,0,280,55,0.23\n"
    );

    let json = gazemap(&["metrics", "--report", arg(&report), "--format", "structured"]);
    let rows: serde_json::Value = serde_json::from_slice(&json.stdout).unwrap();
    assert_eq!(rows[0]["trial"], "Participant_2");
    assert_eq!(rows[0]["fixation_count"], 55);
}

#[test]
fn validate_prints_accuracy() {
    let out_file = tempfile::NamedTempFile::new().unwrap();
    let out = gazemap(&[
        "validate",
        "--system",
        arg(&fixture("validation_system.json")),
        "--truth",
        arg(&fixture("validation_truth.json")),
        "--format",
        "tabular",
        "--out",
        arg(out_file.path()),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert_eq!(String::from_utf8_lossy(&out.stdout), "accuracy 0.88 (22/25 frames)\n");
    let csv = std::fs::read_to_string(out_file.path()).unwrap();
    assert_eq!(csv.lines().count(), 26);
    assert!(
        csv.contains("2,851 455,off-target,851 455,Electrical,no,Error in mask"),
        "{csv}"
    );
}

#[test]
fn validate_report_against_simulated_truth() {
    let dir = tempfile::tempdir().unwrap();
    simulate(dir.path());
    let report = dir.path().join("report.json");
    assert!(map(dir.path(), &["--out", arg(&report), "--quiet"]).status.success());
    let out = gazemap(&[
        "validate",
        "--system",
        arg(&report),
        "--truth",
        arg(&dir.path().join("ground_truth.json")),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let doc: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(doc["accuracy"], 1.0);
    assert_eq!(doc["rows"], 653);
}

#[test]
fn input_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let cases: [&[&str]; 4] = [
        &["simulate", "--preset", "nobody", "--out", arg(dir.path())],
        &["metrics", "--report", "/nonexistent/report.json"],
        &["inspect"],
        &["map", "--gaze", "only.jsonl"],
    ];
    for args in cases {
        assert_eq!(gazemap(args).status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn inspect_gaze_reports_rate() {
    let dir = tempfile::tempdir().unwrap();
    simulate(dir.path());
    let out = gazemap(&[
        "inspect",
        "--gaze",
        arg(&dir.path().join("gaze.jsonl")),
        "--meta",
        arg(&dir.path().join("meta.json")),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("rate 100.00 Hz"), "{text}");
    assert!(text.contains("fps 25  frames 653"), "{text}");
}
