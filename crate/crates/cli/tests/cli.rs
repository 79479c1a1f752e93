//! End-to-end tests of the `aclab` binary.

use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn aclab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_aclab")).args(args).output().expect("binary runs")
}

fn stdout_json(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("config.json");
    std::fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_string()
}

const SMALL_LAYER: &str = r#"{"potential":{"kind":"quartic"},"grid":{"h":0.2,"extent":[12.0,12.0]},
  "boundary":{"kind":"layer","t":0.0},
  "analysis":{"spectral":{"gap":{"L_minus":8,"L_plus":8,"h":0.02}}}}"#;

#[test]
fn profile_prints_surface_tension() {
    let v = stdout_json(&aclab(&["profile"]));
    let s = v["profile"]["sigma0"].as_f64().unwrap();
    assert!((s - 2.0 * 2f64.sqrt() / 3.0).abs() < 1e-7);
}

#[test]
fn gap_sweep_reports_each_length() {
    let v = stdout_json(&aclab(&["gap", "--L", "10", "--L", "20", "--h", "0.02"]));
    let rows = v["gap"].as_array().unwrap();
    assert_eq!(rows.len(), 2);
    for r in rows {
        let mu = r["mu_hat"].as_f64().unwrap();
        assert!((mu - 1.5).abs() < 0.02, "mu_hat {mu}");
    }
}

#[test]
fn invalid_translations_name_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"potential":{"kind":"quartic"},"grid":{"h":0.2,"extent":[8,8]},"boundary":{"kind":"multilayer","ts":[2,1]}}"#);
    let out = aclab(&["run", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("boundary.ts"), "{err}");
}

#[test]
fn unknown_config_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"potential":{"kind":"quartic"},"grid":{"h":0.2,"extent":[8,8]},"boundary":{"kind":"saddle"},"colour":1}"#);
    let out = aclab(&["run", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn missing_inputs_exit_with_one() {
    assert_eq!(aclab(&["run", "--config", "/nonexistent/config.json"]).status.code(), Some(1));
    assert_eq!(aclab(&["analyze", "--field", "/nonexistent/field.csv"]).status.code(), Some(1));
    assert_eq!(aclab(&["profile", "--potential", "/nonexistent/w.csv"]).status.code(), Some(1));
}

#[test]
fn runs_are_reproducible_and_fields_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL_LAYER);
    let mut reports = Vec::new();
    for name in ["a", "b"] {
        let out_dir = dir.path().join(name);
        let out = aclab(&["run", "--config", &cfg, "--out", out_dir.to_str().unwrap()]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        for file in ["report.json", "field.csv", "profile.csv", "curves.csv", "energy_history.csv", "angular.csv"] {
            assert!(out_dir.join(file).exists(), "{file} missing");
        }
        let mut v: Value = serde_json::from_str(&std::fs::read_to_string(out_dir.join("report.json")).unwrap()).unwrap();
        v.as_object_mut().unwrap().remove("timings");
        for key in ["blowdown", "stress", "fit", "spectral"] {
            if let Some(o) = v.get_mut(key).and_then(Value::as_object_mut) {
                o.remove("timings");
            }
        }
        reports.push(v);
    }
    assert_eq!(reports[0], reports[1]);

    let field = dir.path().join("a").join("field.csv");
    let analysis = stdout_json(&aclab(&["analyze", "--field", field.to_str().unwrap(), "--blowdown"]));
    assert_eq!(analysis["blowdown"], reports[0]["blowdown"]);
}

#[test]
fn report_merge_requires_matching_configuration() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL_LAYER);
    let a = dir.path().join("a");
    assert!(aclab(&["run", "--config", &cfg, "--out", a.to_str().unwrap()]).status.success());
    let b = dir.path().join("b");
    assert!(aclab(&["solve", "--config", &cfg, "--out", b.to_str().unwrap()]).status.success());
    let ra = a.join("report.json");
    let rb = b.join("report.json");
    let merged = stdout_json(&aclab(&["report", ra.to_str().unwrap(), "--merge", rb.to_str().unwrap()]));
    assert_eq!(merged["solve"], stdout_json(&aclab(&["report", ra.to_str().unwrap()]))["solve"]);

    let c = dir.path().join("c");
    let out = aclab(&["solve", "--config", &cfg, "--out", c.to_str().unwrap(), "--h", "0.25"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rc = c.join("report.json");
    assert_eq!(aclab(&["report", ra.to_str().unwrap(), "--merge", rc.to_str().unwrap()]).status.code(), Some(1));
}
