//! f and K(b) along the profile ladder.

use std::sync::Arc;

use collapse_core::field::ComplexField;
use collapse_core::fit::fit_proportional;
use collapse_core::functionals::{k_of_b, lyapunov_j, mass, virial_f, FLadder, JInputs};
use collapse_core::profiles::{build_family, FamilySpec};
use collapse_core::{ModelParams, RadialGrid, Spacing};

#[test]
fn k_is_proportional_to_b_squared() {
    let p = ModelParams::new(1, 2.2, 2.2, 0.0, 0.1).unwrap();
    let g = Arc::new(RadialGrid::new(1, 4096, 40.0, Spacing::Sinh { core: 4.0 }).unwrap());
    let fam = build_family(&p, &FamilySpec { b_lo: 0.0, b_hi: 0.3, ..Default::default() }, g.clone()).unwrap();
    let zero = ComplexField::zeros(g.clone());
    let f: Vec<f64> = fam.bs.iter().map(|&b| virial_f(&fam.q_b(b).unwrap(), &zero, &p).unwrap()).collect();

    // with ξ = 0 and Q_b ≈ e^{−ibr²/4}Q, f ≈ (b/4)‖rQ‖²
    let q0 = fam.q_b(0.0).unwrap();
    let rq = q0.map(|r, z| z * r);
    let slope = mass(&rq) / 4.0;
    assert!((f[1] / fam.bs[1] / slope - 1.0).abs() < 1e-3, "{} vs {slope}", f[1] / fam.bs[1]);

    let ladder = FLadder { b: fam.bs.clone(), f: f.clone() };
    let (mut b2, mut ks) = (Vec::new(), Vec::new());
    for (k, &b) in fam.bs.iter().enumerate().skip(1) {
        let qb = fam.q_b(b).unwrap();
        let kb = k_of_b(b, mass(&qb), fam.q_mass, f[k], &ladder).unwrap();
        let j = lyapunov_j(&JInputs { xi: &zero, qb: &qb, q_mass: fam.q_mass, b, a: 5.0, f_value: f[k], ladder: &ladder }).unwrap();
        assert!((j - kb).abs() <= 1e-15 * (1.0 + kb.abs()));
        b2.push(b * b);
        ks.push(kb);
    }
    let c = fit_proportional(&b2, &ks).unwrap();
    assert!(c > 0.0);
    for (x, k) in b2.iter().zip(&ks) {
        assert!((k - c * x).abs() / x <= 0.5 * c, "K/b² = {} against {c}", k / x);
    }
    // K vanishes at b = 0 with ‖Q_0‖ = ‖Q‖
    let k0 = k_of_b(0.0, mass(&q0), fam.q_mass, 0.0, &ladder).unwrap();
    assert!(k0.abs() < 1e-12);
}
