//! Experiment runs through the harness: tracking, artifacts and sweeps.

use std::path::Path;

use collapse_core::evolve::AuditRecord;
use collapse_core::harness::{
    run_experiment, run_scan, Classification, ExperimentConfig, RunSummary, ScanReport, SweepBlock, SweepParameter,
};
use collapse_core::io::{read_field, read_json, read_jsonl, read_records_csv};
use collapse_core::modulation::{ModulationRates, ModulationSample};

fn quick(eta: f64, t_end: f64) -> ExperimentConfig {
    let mut c = ExperimentConfig::default();
    c.model.eta = eta;
    c.evolve.t_end = Some(t_end);
    c
}

#[test]
fn tracked_collapse_early_window_and_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cfg = quick(0.0, 0.2);
    let s = run_experiment(&cfg, d).unwrap();
    assert_eq!(s.outcome, "horizon");

    let samples: Vec<ModulationSample> = read_jsonl(&d.join("modulation.jsonl")).unwrap();
    let rates: Vec<ModulationRates> = read_jsonl(&d.join("rates.jsonl")).unwrap();
    assert!(samples.len() >= 10);
    assert!(samples.iter().all(|m| m.converged));
    assert_eq!(s.tracking.unwrap().gaps, 0);
    let b0 = cfg.profile.b0;
    for m in &samples {
        // trapping band over the early window
        assert!((m.b / b0 - 1.0).abs() <= 0.5, "b = {} at t = {}", m.b, m.t);
    }
    assert!(samples.windows(2).all(|w| w[1].lambda < w[0].lambda));
    for r in &rates {
        let b = samples.iter().find(|m| m.t == r.t).unwrap().b;
        assert!(r.lambda_law.abs() < 0.5 * b, "{r:?}");
    }

    // every artifact reads back through its loader
    let back: RunSummary = read_json(&d.join("summary.json")).unwrap();
    assert_eq!(back, s);
    let records: Vec<AuditRecord> = read_jsonl(&d.join("diagnostics.jsonl")).unwrap();
    assert_eq!(records.len(), s.audit.unwrap().intervals + 1);
    let (cols, rows) = read_records_csv(&d.join("diagnostics.csv")).unwrap();
    assert_eq!(rows.len(), records.len());
    let k = cols.iter().position(|c| c == "mass").unwrap();
    assert_eq!(rows[3][k].parse::<f64>().unwrap(), records[3].mass);
    let (hc, fc) = read_field(&d.join("final.csv")).unwrap();
    let (hb, fb) = read_field(&d.join("final.bin")).unwrap();
    assert_eq!(hc, hb);
    assert_eq!(fc.samples(), fb.samples());
    let cfg_back: ExperimentConfig = read_json(&d.join("config.json")).unwrap();
    assert_eq!(cfg_back, cfg);
    assert!(d.join("summary.txt").is_file() && d.join("bootstrap.json").is_file());
}

fn sweep(values: Vec<f64>, workers: usize) -> ExperimentConfig {
    let mut c = quick(0.0, 0.03);
    c.tracking.enabled = false;
    c.sweep = Some(SweepBlock {
        parameter: SweepParameter::Eta,
        values,
        workers,
        rescale_reference: None,
        curve_b: None,
    });
    c
}

fn cells_equal(a: &ScanReport, b: &ScanReport, da: &Path, db: &Path) {
    assert_eq!(a.cells, b.cells);
    for c in &a.cells {
        let f = format!("cell_{:03}/diagnostics.jsonl", c.index);
        assert_eq!(std::fs::read(da.join(&f)).unwrap(), std::fs::read(db.join(&f)).unwrap());
    }
}

#[test]
fn worker_count_does_not_change_cells() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let values = vec![0.0, 1e-2, 0.5];
    let one = run_scan(&sweep(values.clone(), 1), a.path()).unwrap();
    let three = run_scan(&sweep(values, 3), b.path()).unwrap();
    assert_eq!(one.cells.len(), 3);
    assert!(one.cells.iter().all(|c| c.error.is_none()));
    cells_equal(&one, &three, a.path(), b.path());
}

#[test]
fn empty_sweep_gives_empty_report() {
    let dir = tempfile::tempdir().unwrap();
    let rep = run_scan(&sweep(vec![], 2), dir.path()).unwrap();
    assert!(rep.cells.is_empty() && rep.monotone);
    let t = rep.threshold.unwrap();
    assert!(t.blow_max.is_none() && t.arrest_min.is_none());
    let back: ScanReport = read_json(&dir.path().join("scan.json")).unwrap();
    assert_eq!(back, rep);
}

#[test]
fn eta_sweep_is_monotone() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = ExperimentConfig::default();
    c.tracking.enabled = false;
    c.sweep = Some(SweepBlock {
        parameter: SweepParameter::Eta,
        values: vec![1e-4, 1e-2, 1.0, 2.0],
        workers: 2,
        rescale_reference: None,
        curve_b: None,
    });
    let rep = run_scan(&c, dir.path()).unwrap();
    let classes: Vec<_> = rep.cells.iter().map(|c| c.classification.unwrap()).collect();
    assert!(rep.monotone, "{classes:?}");
    assert_eq!(classes[0], Classification::Blowup);
    assert_eq!(classes[3], Classification::Arrested);
    let t = rep.threshold.unwrap();
    assert!(t.blow_max.unwrap() < t.arrest_min.unwrap());
}
