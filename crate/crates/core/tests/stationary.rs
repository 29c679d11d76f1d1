//! Subcritical soliton: the ground state only rotates its phase.

use std::sync::Arc;

use collapse_core::evolve::{make_initial_data, run_with, DtRule, EvolveConfig, FvOperator};
use collapse_core::modulation::{ModulationState, Tracker};
use collapse_core::profiles::pb::ground_member;
use collapse_core::profiles::{assemble_profile, build_family, FamilySpec};
use collapse_core::{ComplexField, ModelParams, RadialGrid, Spacing, C64};

fn setup() -> (ModelParams, Arc<RadialGrid>, Arc<RadialGrid>) {
    let p = ModelParams::new(1, 1.0, 1.0, 0.0, 0.1).unwrap();
    let pg = Arc::new(RadialGrid::new(1, 4096, 40.0, Spacing::Sinh { core: 4.0 }).unwrap());
    let g = Arc::new(RadialGrid::new(1, 2048, 40.0, Spacing::Sinh { core: 4.0 }).unwrap());
    (p, pg, g)
}

#[test]
fn soliton_rotates_in_place() {
    let (p, pg, g) = setup();
    let q = assemble_profile(&p, ground_member(&p, 0.02, 2048).unwrap(), pg).unwrap();
    let psi0 = make_initial_data(&q, 1.0, 0.0, None, g.clone()).unwrap();
    let op = FvOperator::new(&g);
    let grad_q = op.grad_norm(psi0.samples());
    let cfg = EvolveConfig {
        dt_rule: DtRule::Fixed { dt: 5e-3 },
        t_end: Some(2.0),
        ..Default::default()
    };
    let mut last = None;
    let traj = run_with(&psi0, &p, &cfg, grad_q, |s| last = Some((s.t, s.psi.clone()))).unwrap();
    let (t, psi) = last.unwrap();
    assert!((t - 2.0).abs() < 1e-12);
    let rot = psi0.scale(C64::from_polar(1.0, t));
    let err = psi
        .samples()
        .iter()
        .zip(rot.samples())
        .map(|(a, b)| (a - b).norm())
        .fold(0.0, f64::max);
    assert!(err < 2e-3, "{err}");
    // modulus is stationary to much better than the phase
    let modulus = psi
        .samples()
        .iter()
        .zip(psi0.samples())
        .map(|(a, b)| (a.norm() - b.norm()).abs())
        .fold(0.0, f64::max);
    assert!(modulus < 1e-4, "{modulus}");
    let m: Vec<f64> = traj.records.iter().map(|r| r.mass).collect();
    assert!(m.iter().all(|x| (x / m[0] - 1.0).abs() < 1e-12));
    assert!(traj.records.iter().all(|r| r.momentum == 0.0));
}

#[test]
fn stationary_tracking() {
    let (p, pg, g) = setup();
    let spec = FamilySpec { b_lo: 0.0, b_hi: 0.05, ..Default::default() };
    let fam = build_family(&p, &spec, pg.clone()).unwrap();
    let q = assemble_profile(&p, ground_member(&p, 0.02, 1024).unwrap(), pg).unwrap();
    let psi0: ComplexField = make_initial_data(&q, 1.0, 0.0, None, g.clone()).unwrap();
    let grad_q = FvOperator::new(&g).grad_norm(psi0.samples());
    let cfg = EvolveConfig {
        dt_rule: DtRule::Fixed { dt: 5e-3 },
        t_end: Some(1.0),
        checkpoint_stride: 20,
        ..Default::default()
    };
    let mut tr = Tracker::new(&fam, &p, None, ModulationState::new(0.0, 1.0, 0.0));
    run_with(&psi0, &p, &cfg, grad_q, |s| {
        tr.push(s.t, s.tau, &s.psi, s.lambda_proxy);
    })
    .unwrap();
    let series = tr.series;
    assert!(series.gaps.is_empty(), "{:?}", series.gaps);
    assert!(series.samples.len() >= 10);
    for m in &series.samples {
        assert!(m.b < 1e-3, "b = {}", m.b);
        assert!((m.lambda - 1.0).abs() < 1e-3, "lambda = {}", m.lambda);
    }
    for r in series.rates() {
        assert!(r.gamma_law.abs() < 1e-2, "{r:?}");
        assert!(r.lambda_law.abs() < 1e-2, "{r:?}");
    }
}
