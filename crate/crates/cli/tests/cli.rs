use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_spde-moments"));
    c.env_remove("SPDE_MOMENTS_SEED");
    c
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_string()
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

const HEAT_1D: &str = r#"{
  "schema": 1,
  "params": {"a": 2, "b": 1, "r": 0, "nu": 1, "theta": 1, "d": 1},
  "noise": {"kind": "white1d"},
  "mc": {"samples": 2000},
  "chaos": {"terms": 3},
  "bounds": {"times": [0.5], "terms": 3}
}"#;

#[test]
fn classify_she_white_2d_is_local() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "she.json",
        r#"{"schema": 1, "command": "classify",
            "params": {"a": 2, "b": 1, "r": 0, "nu": 1, "theta": 1, "d": 2},
            "noise": {"kind": "white", "d": 2}}"#,
    );
    let out = run(&["classify", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let headers = rdr.headers().unwrap().clone();
    let want = ["a", "b", "r", "nu", "theta", "d", "alpha", "kind", "nonneg_group", "regime", "critical_alpha"];
    assert_eq!(&headers.iter().take(want.len()).collect::<Vec<_>>(), &want);
    let rows: Vec<csv::StringRecord> = rdr.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 1);
    assert_eq!(&rows[0][9], "LocalLp");
}

#[test]
fn riesz_exponent_above_block_dimension_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "bad.json",
        r#"{"schema": 1, "params": {"a": 2, "b": 1, "r": 0, "nu": 1, "theta": 1, "d": 2},
            "noise": {"kind": "riesz", "blocks": [{"dim": 2, "alpha": 2.5}]}}"#,
    );
    let out = run(&["classify", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("alpha_i") && err.contains("d_i"), "{err}");
}

#[test]
fn invalid_configs_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let wrong_schema = write_config(dir.path(), "s.json", r#"{"schema": 9}"#);
    assert_eq!(run(&["kernel", "--config", &wrong_schema]).status.code(), Some(2));
    let mismatch = write_config(dir.path(), "m.json", r#"{"schema": 1, "command": "chaos"}"#);
    assert_eq!(run(&["kernel", "--config", &mismatch]).status.code(), Some(2));
    let bad_params = write_config(
        dir.path(),
        "p.json",
        r#"{"schema": 1, "params": {"a": 3, "b": 1, "nu": 1, "theta": 1, "d": 1}}"#,
    );
    assert_eq!(run(&["kernel", "--config", &bad_params]).status.code(), Some(2));
    assert_eq!(run(&["kernel"]).status.code(), Some(2));
}

#[test]
fn bounds_in_local_regime_is_a_numerical_failure() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "local.json",
        r#"{"schema": 1, "params": {"a": 2, "b": 1, "r": 0, "nu": 1, "theta": 1, "d": 3},
            "noise": {"kind": "riesz", "blocks": [{"dim": 3, "alpha": 2}]},
            "mc": {"samples": 500}, "bounds": {"terms": 2}}"#,
    );
    assert_eq!(run(&["bounds", "--config", &cfg]).status.code(), Some(3));
}

#[test]
fn outputs_are_byte_identical_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "heat.json", HEAT_1D);
    let a = run(&["chaos", "--config", &cfg]);
    let b = run(&["chaos", "--config", &cfg]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let c = run(&["chaos", "--config", &cfg, "--seed", "11"]);
    assert_ne!(a.stdout, c.stdout);
    let d = bin().args(["chaos", "--config", &cfg]).env("SPDE_MOMENTS_SEED", "11").output().unwrap();
    assert_eq!(c.stdout, d.stdout);
}

#[test]
fn json_report_carries_metadata() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "heat.json", HEAT_1D);
    let out_path = dir.path().join("chaos.json");
    let out = run(&["chaos", "--config", &cfg, "--seed", "5", "--format", "json", "--out", out_path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&out_path).unwrap()).unwrap();
    assert_eq!(v["meta"]["command"], "chaos");
    assert_eq!(v["meta"]["seed"], 5);
    assert_eq!(v["meta"]["samples"], 2000);
    assert!(v["meta"]["version"].is_string());
    let rows = v["rows"].as_array().unwrap();
    // t_n for n = 1..=3 and fn_norm_sq for n = 0..=3
    assert_eq!(rows.len(), 7);
    assert_eq!(rows[0]["sequence"], "t_n");
    assert_eq!(rows[0]["value"], Value::Null);
    assert!((rows[0]["estimate"].as_f64().unwrap() - 2f64.sqrt() / 4.0).abs() < 1e-12);
    assert!(rows.iter().all(|r| r["samples"] == 2000 && r["seed"].is_u64()));
}

#[test]
fn csv_uses_seventeen_significant_digits() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "heat.json", HEAT_1D);
    let out = run(&["kernel", "--config", &cfg]);
    let text = String::from_utf8(out.stdout).unwrap();
    let line = text.lines().nth(2).unwrap();
    let field = line.split(',').nth(2).unwrap();
    let mantissa = field.split('e').next().unwrap().replace(['-', '.'], "");
    assert_eq!(mantissa.len(), 17, "{field}");
}

#[test]
fn every_command_runs_on_heat() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "heat.json", HEAT_1D);
    for cmd in ["classify", "kernel", "chaos", "variational", "asymptotics", "bounds"] {
        let out = run(&[cmd, "--config", &cfg, "--format", "json"]);
        assert_eq!(out.status.code(), Some(0), "{cmd}: {}", String::from_utf8_lossy(&out.stderr));
        let v: Value = serde_json::from_slice(&out.stdout).unwrap();
        assert!(!v["rows"].as_array().unwrap().is_empty(), "{cmd}");
    }
}

#[test]
fn asymptotics_reports_heat_coefficient() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "heat.json", HEAT_1D);
    let out = run(&["asymptotics", "--config", &cfg, "--format", "json"]);
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    let general = &v["rows"][0];
    assert_eq!(general["mode"], "general");
    assert!((general["coefficient"].as_f64().unwrap() - 1.0 / 24.0).abs() < 1e-14);
    assert_eq!(general["beta"], 3.0);
}

#[test]
fn sweep_over_alphas() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "sweep.json",
        r#"{"schema": 1, "params": {"a": 2, "b": 1, "r": 0, "nu": 1, "theta": 1, "d": 3},
            "sweep": {"alphas": [1.0, 2.0, 2.5],
                      "points": [{"params": {"a": 2, "b": 1, "nu": 1, "theta": 1, "d": 1},
                                  "noise": {"kind": "white1d"}}]}}"#,
    );
    let out = run(&["sweep", "--config", &cfg, "--format", "json"]);
    assert_eq!(out.status.code(), Some(0));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    let regimes: Vec<&str> = v["rows"].as_array().unwrap().iter().map(|r| r["regime"].as_str().unwrap()).collect();
    assert_eq!(regimes, ["GlobalBoundaryWhite1D", "GlobalLp", "LocalLp", "NoL2PerFigures"]);
}

#[test]
fn verify_passes_on_a_fresh_checkout() {
    let out = run(&["verify"]);
    let err = String::from_utf8(out.stderr).unwrap();
    assert_eq!(out.status.code(), Some(0), "{err}");
    assert_eq!(err.lines().filter(|l| l.starts_with('A')).count(), 15);
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 16);
}
