//! Exit codes and file outputs of the command-line interface.

use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};
use std::sync::atomic::{AtomicU64, Ordering};

static DIR_COUNTER: AtomicU64 = AtomicU64::new(0);

fn scratch_dir(tag: &str) -> PathBuf {
    let n = DIR_COUNTER.fetch_add(1, Ordering::SeqCst);
    let dir = std::env::temp_dir().join(format!("shiftspec-cli-{}-{tag}-{n}", std::process::id()));
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn write_config(dir: &std::path::Path, name: &str, contents: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, contents).unwrap();
    path
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_shiftspec"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(output: &Output) -> i32 {
    output.status.code().expect("exit code")
}

#[test]
fn classify_writes_csv_and_summary() {
    let dir = scratch_dir("classify");
    let cfg = write_config(&dir, "rotation.json", r#"{"builtin": "rotation"}"#);
    let out_dir = dir.join("out");
    let output = run(&[
        "classify",
        "--config",
        cfg.to_str().unwrap(),
        "--samples",
        "8",
        "--horizon",
        "20",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&output), 0, "{output:?}");
    let csv = fs::read_to_string(out_dir.join("classification.csv")).unwrap();
    assert!(csv.starts_with("x0,x1,tag,tau_minus,tau_plus,prime_period"));
    assert_eq!(csv.lines().count(), 9);
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("classify_summary.json")).unwrap())
            .unwrap();
    assert_eq!(summary["counts"]["periodic"], 8);
    assert!(out_dir.join("meta.json").exists());
}

#[test]
fn spectrum_writes_report_tables_and_plot_data() {
    let dir = scratch_dir("spectrum");
    let cfg = write_config(
        &dir,
        "slab.json",
        r#"{"builtin": "slab_constant", "params": {"c": 1.0}}"#,
    );
    let out_dir = dir.join("out");
    let output = run(&[
        "spectrum",
        "--config",
        cfg.to_str().unwrap(),
        "--samples",
        "16",
        "--horizon",
        "5",
        "--t-max",
        "2",
        "--t-steps",
        "4",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&output), 0, "{output:?}");
    for file in [
        "report.json",
        "norm_vs_t.csv",
        "spectrum_points.dat",
        "meta.json",
    ] {
        assert!(out_dir.join(file).exists(), "missing {file}");
    }
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("report.json")).unwrap()).unwrap();
    // the slab past its stay time degenerates to the nilpotent branch
    assert_eq!(report["growth"]["nilpotent"], true);
    assert_eq!(report["verification"]["passed"], true);
    let stdout = String::from_utf8(output.stdout).unwrap();
    assert!(stdout.contains("nilpotent"), "{stdout}");
}

#[test]
fn gamma_emits_tables_for_half_line() {
    let dir = scratch_dir("gamma");
    let cfg = write_config(
        &dir,
        "half_line.json",
        r#"{"custom": {
            "dimension": 1,
            "field": ["1"],
            "h": "1.0",
            "domain": {"box": [[0.0, null]]},
            "p": 2.0,
            "kappa": 1.0,
            "sample_box": [[0.0, 25.0]]
        }}"#,
    );
    let out_dir = dir.join("out");
    let output = run(&[
        "gamma",
        "--config",
        cfg.to_str().unwrap(),
        "--samples",
        "30",
        "--horizon",
        "30",
        "--t-max",
        "10",
        "--t-steps",
        "10",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&output), 0, "{output:?}");
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("gamma_report.json")).unwrap())
            .unwrap();
    let gamma2 = report["gamma2"]["gamma_hat"].as_f64().unwrap();
    assert!((gamma2 - 1.0).abs() < 1e-3, "{gamma2}");
    // generator spectrum is the half-plane Re <= -1 in the full report;
    // here the gamma table must exist for the backward-escaping class
    assert!(out_dir.join("gamma2.csv").exists());
    assert!(!out_dir.join("gamma1.csv").exists());
}

#[test]
fn periodic_emits_orbit_data() {
    let dir = scratch_dir("periodic");
    let cfg = write_config(&dir, "rotation.json", r#"{"builtin": "rotation"}"#);
    let out_dir = dir.join("out");
    let output = run(&[
        "periodic",
        "--config",
        cfg.to_str().unwrap(),
        "--samples",
        "6",
        "--horizon",
        "20",
        "--k-max",
        "2",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&output), 0, "{output:?}");
    let csv = fs::read_to_string(out_dir.join("periodic_points.csv")).unwrap();
    assert!(csv.starts_with("x0,x1,prime_period,theta"));
    assert_eq!(csv.lines().count(), 7);
    let spec: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("periodic_spectrum.json")).unwrap())
            .unwrap();
    assert_eq!(spec["k_max"], 2);
}

#[test]
fn verify_passes_on_sound_declarations() {
    let dir = scratch_dir("verify-ok");
    let cfg = write_config(&dir, "rotation.json", r#"{"builtin": "rotation"}"#);
    let out_dir = dir.join("out");
    let output = run(&[
        "verify",
        "--config",
        cfg.to_str().unwrap(),
        "--samples",
        "12",
        "--horizon",
        "25",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&output), 0, "{output:?}");
    let stdout = String::from_utf8(output.stdout).unwrap();
    assert!(stdout.contains("verification passed"), "{stdout}");
}

#[test]
fn verify_fails_on_corrupted_kappa() {
    let dir = scratch_dir("verify-bad");
    let cfg = write_config(
        &dir,
        "corrupt.json",
        r#"{"builtin": "rotation", "params": {"kappa": 0.1}}"#,
    );
    let out_dir = dir.join("out");
    let output = run(&[
        "verify",
        "--config",
        cfg.to_str().unwrap(),
        "--samples",
        "12",
        "--horizon",
        "25",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&output), 1, "{output:?}");
    let stdout = String::from_utf8(output.stdout).unwrap();
    assert!(stdout.contains("yorke_period_floor"), "{stdout}");
    assert!(stdout.contains("FAIL"), "{stdout}");
}

#[test]
fn config_errors_exit_two() {
    let dir = scratch_dir("config-err");
    // malformed JSON
    let bad_json = write_config(&dir, "bad.json", r#"{"builtin": "#);
    let output = run(&["classify", "--config", bad_json.to_str().unwrap()]);
    assert_eq!(code(&output), 2, "{output:?}");

    // unknown builtin
    let unknown = write_config(&dir, "unknown.json", r#"{"builtin": "torus"}"#);
    let output = run(&["classify", "--config", unknown.to_str().unwrap()]);
    assert_eq!(code(&output), 2, "{output:?}");

    // unknown parameter
    let bad_param = write_config(
        &dir,
        "badparam.json",
        r#"{"builtin": "rotation", "params": {"omga": 1.0}}"#,
    );
    let output = run(&["classify", "--config", bad_param.to_str().unwrap()]);
    assert_eq!(code(&output), 2, "{output:?}");

    // missing file
    let output = run(&["classify", "--config", "/nonexistent/nope.json"]);
    assert_eq!(code(&output), 2, "{output:?}");

    // expression error inside a custom problem
    let bad_expr = write_config(
        &dir,
        "badexpr.json",
        r#"{"custom": {"dimension": 1, "field": ["2x0"], "h": "0",
             "domain": {"all": true}, "p": 2.0, "kappa": 1.0}}"#,
    );
    let output = run(&["classify", "--config", bad_expr.to_str().unwrap()]);
    assert_eq!(code(&output), 2, "{output:?}");

    // empty sample size
    let rotation = write_config(&dir, "rot.json", r#"{"builtin": "rotation"}"#);
    let output = run(&[
        "classify",
        "--config",
        rotation.to_str().unwrap(),
        "--samples",
        "0",
    ]);
    assert_eq!(code(&output), 2, "{output:?}");
}

#[test]
fn demo_smt_failure_reports_gap() {
    let dir = scratch_dir("smt");
    let out_dir = dir.join("out");
    let output = run(&[
        "demo-smt-failure",
        "--t",
        "3.141592653589793",
        "--k-max",
        "5",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&output), 0, "{output:?}");
    let demo: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("smt_demo.json")).unwrap()).unwrap();
    assert_eq!(demo["distinct_count"], 2);
}
