//! End-to-end runs of the `collapse-lab` binary.

use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn lab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_collapse-lab")).args(args).output().unwrap()
}

fn ok_json(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn err_json(out: &Output) -> Value {
    let v: Value = serde_json::from_slice(&out.stderr).unwrap();
    v["error"].clone()
}

fn write(path: &Path, v: &Value) -> String {
    std::fs::write(path, serde_json::to_vec_pretty(v).unwrap()).unwrap();
    path.to_str().unwrap().to_owned()
}

#[test]
fn groundstate_cubic_peak() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let v = ok_json(&lab(&["groundstate", "--d", "1", "--sigma1", "1", "--sigma2", "1", "--out", out]));
    assert!((v["peak"].as_f64().unwrap() - 2f64.sqrt()).abs() < 1e-6, "{v}");
    for f in ["groundstate.csv", "groundstate.bin", "groundstate.json"] {
        assert!(dir.path().join(f).is_file(), "{f}");
    }
}

#[test]
fn missing_config_is_exit_2() {
    let out = lab(&["evolve", "--config", "/nonexistent/cfg.json"]);
    assert_eq!(out.status.code(), Some(2));
    let e = err_json(&out);
    assert_eq!(e["kind"], "config-not-found");
    assert!(e["message"].as_str().unwrap().contains("/nonexistent/cfg.json"));
}

#[test]
fn invalid_config_is_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(&dir.path().join("bad.json"), &serde_json::json!({ "model": { "eta": -1.0 } }));
    let out = lab(&["evolve", "--config", &bad]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(err_json(&out)["kind"], "config-invalid");
    let unknown = write(&dir.path().join("unknown.json"), &serde_json::json!({ "model": { "etaa": 1.0 } }));
    assert_eq!(lab(&["evolve", "--config", &unknown]).status.code(), Some(2));
}

#[test]
fn config_schema_lists_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("schema.json");
    let v = ok_json(&lab(&["config-schema", "--out", path.to_str().unwrap()]));
    assert_eq!(v["fields"]["model.eta"]["default"], 0.0);
    assert!(v["fields"]["model.eta"]["doc"].as_str().is_some_and(|d| !d.is_empty()));
    let file: Value = serde_json::from_slice(&std::fs::read(&path).unwrap()).unwrap();
    assert_eq!(file, v);
}

#[test]
fn radiation_table_writes_fit_footer() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let v = ok_json(&lab(&["radiation-table", "--bs", "0.3,0.4", "--out", out]));
    assert_eq!(v["rows"].as_array().unwrap().len(), 2);
    let csv = std::fs::read_to_string(dir.path().join("radiation_table.csv")).unwrap();
    assert!(csv.starts_with("b,gamma_b"));
    assert!(csv.lines().last().unwrap().starts_with("# fit"));
    // Γ_b shrinks as b decreases
    let g: Vec<f64> = v["rows"].as_array().unwrap().iter().map(|r| r["gamma_b"].as_f64().unwrap()).collect();
    assert!(g[0] < g[1]);
}

#[test]
fn empty_scan_succeeds() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        &dir.path().join("scan.json"),
        &serde_json::json!({ "sweep": { "parameter": "eta", "values": [] }, "tracking": { "enabled": false } }),
    );
    let out = dir.path().join("out");
    let v = ok_json(&lab(&["scan", "--config", &cfg, "--out", out.to_str().unwrap(), "--workers", "3"]));
    assert!(v["cells"].as_array().unwrap().is_empty());
    assert!(out.join("scan.json").is_file() && out.join("scan.csv").is_file());
}

#[test]
fn evolve_then_fit_and_decompose() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        &dir.path().join("run.json"),
        &serde_json::json!({ "evolve": { "t_end": 0.02 }, "tracking": { "enabled": false } }),
    );
    let run = dir.path().join("run");
    let v = ok_json(&lab(&["evolve", "--config", &cfg, "--out", run.to_str().unwrap()]));
    assert_eq!(v["outcome"], "horizon");
    assert!(v["audit"]["max_mass_residual_rel"].as_f64().unwrap() < 1e-10);

    let f = ok_json(&lab(&["fit", "--run", run.to_str().unwrap()]));
    let summary: Value = serde_json::from_slice(&std::fs::read(run.join("summary.json")).unwrap()).unwrap();
    assert_eq!(f["fits"], summary["fits"]);
    assert!(run.join("fits.json").is_file());

    let dec = dir.path().join("dec");
    let d = ok_json(&lab(&[
        "decompose",
        "--config",
        &cfg,
        "--field",
        run.join("final.bin").to_str().unwrap(),
        "--out",
        dec.to_str().unwrap(),
    ]));
    assert_eq!(d["converged"], true);
    let b = d["state"]["b"].as_f64().unwrap();
    assert!((b - 0.3).abs() < 0.05, "{d}");
    assert!(dec.join("decomposition.json").is_file() && dec.join("xi.csv").is_file());
}
