//! Invariants checked on random inputs.

use std::sync::{Arc, OnceLock};

use collapse_core::evolve::scheme::{midpoint_step, nonlinear_substep, FvOperator, SolverTolerance};
use collapse_core::fit::fit_line;
use collapse_core::io::{read_field, write_field_bin, write_field_csv, FieldHeader};
use collapse_core::modulation::{decompose, ModulationState};
use collapse_core::profiles::{build_family, FamilySpec, ProfileFamily};
use collapse_core::{ComplexField, ModelParams, RadialGrid, Spacing, C64};
use proptest::prelude::*;

fn grid(n: usize) -> Arc<RadialGrid> {
    Arc::new(RadialGrid::new(1, n, 20.0, Spacing::Sinh { core: 2.0 }).unwrap())
}

/// a·exp(−r²/w²) with a chirp.
fn gaussian(g: &Arc<RadialGrid>, a: f64, w: f64, chirp: f64) -> ComplexField {
    ComplexField::from_fn(g.clone(), |r| C64::from_polar(a * (-(r * r) / (w * w)).exp(), chirp * r * r)).unwrap()
}

fn pair(a: &[C64], b: &[C64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x.conj() * y).re).sum()
}

fn family() -> &'static ProfileFamily {
    static F: OnceLock<ProfileFamily> = OnceLock::new();
    F.get_or_init(|| {
        let p = ModelParams::new(1, 2.2, 2.2, 0.0, 0.1).unwrap();
        let g = Arc::new(RadialGrid::new(1, 4096, 40.0, Spacing::Sinh { core: 4.0 }).unwrap());
        build_family(&p, &FamilySpec { b_lo: 0.25, b_hi: 0.35, ..Default::default() }, g).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn stiffness_is_symmetric_and_nonnegative(
        a in 0.1..2.0f64, w in 0.5..4.0f64, c in -1.0..1.0f64,
        a2 in 0.1..2.0f64, w2 in 0.5..4.0f64, c2 in -1.0..1.0f64,
    ) {
        let g = grid(256);
        let op = FvOperator::new(&g);
        let f = gaussian(&g, a, w, c);
        let h = gaussian(&g, a2, w2, c2);
        let sf = op.stiffness(f.samples());
        let sh = op.stiffness(h.samples());
        let lhs = pair(h.samples(), &sf);
        let rhs = pair(f.samples(), &sh);
        prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + lhs.abs()));
        prop_assert!(pair(f.samples(), &sf) >= 0.0);
        prop_assert!(op.kinetic(f.samples()) >= 0.0);
    }

    #[test]
    fn midpoint_conserves_mass_without_damping(a in 0.2..1.5f64, w in 0.7..3.0f64, c in -0.5..0.5f64) {
        let p = ModelParams::new(1, 1.0, 1.0, 0.0, 0.1).unwrap();
        let g = grid(256);
        let op = FvOperator::new(&g);
        let f = gaussian(&g, a, w, c);
        let (next, _) = midpoint_step(&op, f.samples(), 1e-2, &p, SolverTolerance::default()).unwrap();
        let (m0, m1) = (op.mass(f.samples()), op.mass(&next));
        prop_assert!((m1 - m0).abs() <= 1e-12 * m0);
        let (e0, e1) = (op.energy(f.samples(), 1.0), op.energy(&next, 1.0));
        prop_assert!((e1 - e0).abs() <= 1e-10 * (1.0 + e0.abs()));
    }

    #[test]
    fn midpoint_damping_loses_mass_and_commutes_with_phase(
        a in 0.2..1.5f64, w in 0.7..3.0f64, eta in 1e-3..1.0f64, theta in -3.0..3.0f64,
    ) {
        let p = ModelParams::new(1, 1.0, 1.0, eta, 0.1).unwrap();
        let g = grid(256);
        let op = FvOperator::new(&g);
        let f = gaussian(&g, a, w, 0.0);
        let (next, _) = midpoint_step(&op, f.samples(), 1e-2, &p, SolverTolerance::default()).unwrap();
        prop_assert!(op.mass(&next) < op.mass(f.samples()));
        let u = C64::from_polar(1.0, theta);
        let rot: Vec<C64> = f.samples().iter().map(|z| z * u).collect();
        let (next_rot, _) = midpoint_step(&op, &rot, 1e-2, &p, SolverTolerance::default()).unwrap();
        let err = next.iter().zip(&next_rot).map(|(x, y)| (x * u - y).norm()).fold(0.0, f64::max);
        prop_assert!(err <= 1e-12 * a);
    }

    #[test]
    fn nonlinear_substep_never_grows(re in -3.0..3.0f64, im in -3.0..3.0f64, h in 0.0..1.0f64, eta in 0.0..2.0f64) {
        let p = ModelParams::new(1, 2.2, 1.5, eta, 0.1).unwrap();
        let z = C64::new(re, im);
        let out = nonlinear_substep(z, h, &p);
        prop_assert!(out.norm() <= z.norm() * (1.0 + 1e-15));
        if eta == 0.0 {
            prop_assert!((out.norm() - z.norm()).abs() <= 1e-15 * z.norm().max(1.0));
        }
    }

    #[test]
    fn fields_round_trip_through_files(
        vals in prop::collection::vec((-1e3..1e3f64, -1e3..1e3f64), 16..80),
        r_max in 1.0..100.0f64,
    ) {
        let g = Arc::new(RadialGrid::uniform(2, vals.len(), r_max).unwrap());
        let f = ComplexField::new(g.clone(), vals.iter().map(|&(a, b)| C64::new(a, b)).collect()).unwrap();
        let header = FieldHeader::new("checkpoint", &g, serde_json::json!({"t": 0.5}));
        let dir = tempfile::tempdir().unwrap();
        for name in ["f.csv", "f.bin"] {
            let path = dir.path().join(name);
            if name.ends_with("csv") {
                write_field_csv(&path, &header, &f).unwrap();
            } else {
                write_field_bin(&path, &header, &f).unwrap();
            }
            let (h, back) = read_field(&path).unwrap();
            prop_assert_eq!(&h, &header);
            prop_assert_eq!(back.samples(), f.samples());
            prop_assert!(back.grid().same_as(&g));
        }
    }

    #[test]
    fn fit_line_recovers_exact_lines(
        slope in -10.0..10.0f64, intercept in -10.0..10.0f64,
        xs in prop::collection::btree_set(-1000i32..1000, 3..40),
    ) {
        let x: Vec<f64> = xs.iter().map(|&v| v as f64 / 100.0).collect();
        let y: Vec<f64> = x.iter().map(|v| slope * v + intercept).collect();
        let fit = fit_line(&x, &y).unwrap();
        prop_assert!((fit.slope - slope).abs() <= 1e-9 * (1.0 + slope.abs()));
        prop_assert!((fit.intercept - intercept).abs() <= 1e-9 * (1.0 + intercept.abs()));
        prop_assert_eq!(fit.n, x.len());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn decompose_recovers_scaled_cores(b in 0.27..0.33f64, gamma in -2.0..2.0f64, mu in 0.5..2.0f64) {
        let f = family();
        let g = &f.grid;
        // exact samples of λ^{−1/σ}Q_b(r/λ)e^{iγ} on the stretched grid
        let sg = Arc::new(RadialGrid::new(1, g.len(), g.r_max * mu, Spacing::Sinh { core: 4.0 * mu }).unwrap());
        let amp = C64::from_polar(mu.powf(-1.0 / f.params.sigma1), gamma);
        let psi = ComplexField::new(sg, f.q_b(b).unwrap().samples().iter().map(|z| z * amp).collect()).unwrap();
        let r = decompose(&psi, f, &ModulationState::new(b * 1.05, mu * 0.95, gamma + 0.05)).unwrap();
        prop_assert!(r.converged);
        prop_assert!((r.state.b - b).abs() < 1e-9);
        prop_assert!((r.state.lambda / mu - 1.0).abs() < 1e-9);
        let dg = (r.state.gamma - gamma).rem_euclid(std::f64::consts::TAU);
        prop_assert!(dg.min(std::f64::consts::TAU - dg) < 1e-9);
        prop_assert!(r.xi.norm_l2() < 1e-9);
    }
}
