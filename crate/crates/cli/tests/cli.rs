use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn driftlock(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_driftlock"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn run_config(config: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    driftlock(&args)
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn summary(dir: &Path) -> Value {
    serde_json::from_slice(&std::fs::read(dir.join("summary.json")).unwrap()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn predict_t2_reports_both_parameter_sets() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run_config(&configs().join("predict-t2.json"), tmp.path(), &[]);
    assert!(out.status.success(), "{}", stderr(&out));
    let s = summary(tmp.path());
    let eps0 = &s["results"]["spectra"]["eps0"];
    let eps6 = &s["results"]["spectra"]["eps-6"];
    let rel = |v: &Value, x: f64| (v.as_f64().unwrap() / x - 1.0).abs();
    assert!(rel(&eps0["sigma_static_hz"], 245.69e3) < 0.01);
    assert!(rel(&eps0["t2_star_quasi_static_s"], 0.916e-6) < 0.02);
    assert!(rel(&eps6["sigma_static_hz"], 160.28e3) < 0.01);
    assert!(rel(&eps6["t2_star_quasi_static_s"], 1.404e-6) < 0.02);
    let table = std::fs::read_to_string(tmp.path().join("predictions.csv")).unwrap();
    assert!(table.starts_with("label,sigma_static_hz,t2_quasi_static_s,t2_full_integral_s\n"));
}

#[test]
fn manifest_lists_every_file() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run_config(&configs().join("gst-violation.json"), tmp.path(), &[]);
    assert!(out.status.success(), "{}", stderr(&out));
    let manifest: Value = serde_json::from_slice(&std::fs::read(tmp.path().join("manifest.json")).unwrap()).unwrap();
    let mut listed: Vec<String> = manifest["files"]
        .as_array()
        .unwrap()
        .iter()
        .map(|f| f["name"].as_str().unwrap().to_string())
        .collect();
    listed.push("manifest.json".into());
    listed.sort();
    let mut present: Vec<String> = std::fs::read_dir(tmp.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    present.sort();
    assert_eq!(listed, present);
    assert_eq!(manifest["seed"], 0);
    assert_eq!(manifest["config"]["params"]["k"], 1);
    assert!(manifest["version"].is_string());
}

#[test]
fn gst_fixture_totals_match_construction() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run_config(&configs().join("gst-violation.json"), tmp.path(), &[]);
    assert!(out.status.success(), "{}", stderr(&out));
    let s = summary(tmp.path());
    assert_eq!(
        s["results"]["totals_rendered"],
        "475.7, 3122.8, 4805.3, 6169.1, and 8445.5"
    );
    for (l, want) in [("1", 475.7), ("2", 3122.8), ("4", 4805.3), ("8", 6169.1), ("16", 8445.5)] {
        let got = s["results"]["totals_by_length"][l].as_f64().unwrap();
        assert!((got - want).abs() < 1e-9, "L={l}: {got}");
    }
    let csv = std::fs::read_to_string(tmp.path().join("violations.csv")).unwrap();
    assert!(csv.starts_with("circuit_id,germ,L,k,two_delta_loglik,flag\n"));
}

#[test]
fn bare_number_is_a_missing_unit_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "bad.json",
        r#"{"scenario": "feedback-run", "seed": 1, "params": {"f_target": 2}}"#,
    );
    let out = run_config(&cfg, &tmp.path().join("out"), &[]);
    assert_eq!(out.status.code(), Some(2));
    let err = stderr(&out);
    assert!(err.contains("params.f_target") && err.contains("missing unit"), "{err}");
    assert!(!tmp.path().join("out").exists());
}

#[test]
fn negative_exponent_is_a_range_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "bad.json",
        r#"{"scenario": "synthesize-noise", "seed": 1, "params": {"noise": {"exponent": -1}}}"#,
    );
    let out = run_config(&cfg, &tmp.path().join("out"), &[]);
    assert_eq!(out.status.code(), Some(2));
    let err = stderr(&out);
    assert!(err.contains("params.noise.exponent") && err.contains("[0, 3]"), "{err}");
}

#[test]
fn syntax_error_reports_line() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "bad.json", "{\n  \"scenario\": \"predict-t2\",\n  \"seed\": 1,,\n}");
    let out = run_config(&cfg, &tmp.path().join("out"), &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("line 3"), "{}", stderr(&out));
}

const SMALL_FEEDBACK: &str = r#"{
  "scenario": "feedback-run",
  "seed": 3,
  "params": {
    "noise": { "amplitude": "0.00175 MHz^2/Hz", "exponent": 1.17, "duration": "3 s", "dt": "100 us" },
    "n_cycles": 100,
    "logged_shot_cycles": 2
  }
}"#;

#[test]
fn feedback_run_writes_both_loops() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "fb.json", SMALL_FEEDBACK);
    let out = run_config(&cfg, &tmp.path().join("out"), &[]);
    assert!(out.status.success(), "{}", stderr(&out));
    let dir = tmp.path().join("out");
    for mode in ["closed", "open"] {
        let log = std::fs::read_to_string(dir.join(format!("cycles_{mode}.csv"))).unwrap();
        assert!(log.starts_with("cycle,start_time_s,f_est_hz,correction_hz,true_detuning_hz\n"));
        assert_eq!(log.lines().count(), 101);
        let shots = std::fs::read_to_string(dir.join(format!("shots_{mode}.csv"))).unwrap();
        assert!(shots.starts_with("timestamp_s,t_evolution_s,outcome\n"));
        assert_eq!(shots.lines().count(), 201);
    }
    let s = summary(&dir);
    assert!(s["results"]["closed"]["residual_std_hz"].as_f64().unwrap() > 0.0);
    assert!(s["results"]["closed_over_open"].is_number());
}

#[test]
fn feedback_run_rejects_short_noise() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "fb.json", &SMALL_FEEDBACK.replace("\"3 s\"", "\"1 s\""));
    let out = run_config(&cfg, &tmp.path().join("out"), &[]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("2.4"), "{}", stderr(&out));
}

#[test]
fn seed_and_scenario_overrides() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "fb.json", SMALL_FEEDBACK);
    let (a, b, c) = (tmp.path().join("a"), tmp.path().join("b"), tmp.path().join("c"));
    assert!(run_config(&cfg, &a, &[]).status.success());
    assert!(run_config(&cfg, &b, &["--seed", "3"]).status.success());
    assert!(run_config(&cfg, &c, &["--seed", "4"]).status.success());
    let read = |d: &Path| std::fs::read(d.join("cycles_closed.csv")).unwrap();
    assert_eq!(read(&a), read(&b));
    assert_ne!(read(&a), read(&c));

    let out = run_config(&cfg, &tmp.path().join("d"), &["--scenario", "predict-t2"]);
    // feedback params are not valid predict-t2 params
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("unknown field"), "{}", stderr(&out));
}

#[test]
fn trace_round_trips_through_psd_analysis() {
    let tmp = tempfile::tempdir().unwrap();
    let synth = write_config(
        tmp.path(),
        "synth.json",
        r#"{"scenario": "synthesize-noise", "seed": 2, "params": {"noise": {"duration": "400 s", "dt": "24 ms"}}}"#,
    );
    assert!(run_config(&synth, &tmp.path().join("noise"), &[]).status.success());
    let psd = write_config(
        tmp.path(),
        "psd.json",
        r#"{"scenario": "psd-analysis", "seed": 2, "params": {"input_trace": "noise/trace.csv", "sample_period": "24 ms", "segments": 2}}"#,
    );
    let out = run_config(&psd, &tmp.path().join("psd"), &[]);
    assert!(out.status.success(), "{}", stderr(&out));
    let s = summary(&tmp.path().join("psd"));
    let beta = s["results"]["exponent"].as_f64().unwrap();
    assert!((beta - 1.34).abs() < 0.15, "{beta}");
}
