//! Shared fixtures for the kernel benchmarks.

use std::sync::Arc;

use collapse_core::evolve::{make_initial_data, FvOperator};
use collapse_core::profiles::{assemble_profile, build_family, solve_pb, FamilySpec, ProfileFamily, SolitonProfile};
use collapse_core::{ComplexField, ModelParams, RadialGrid, Spacing};

/// The default supercritical model, d = 1, σ₁ = σ₂ = 2.2.
pub fn model(eta: f64) -> ModelParams {
    ModelParams::new(1, 2.2, 2.2, eta, 0.1).expect("default model")
}

pub fn profile_grid() -> Arc<RadialGrid> {
    Arc::new(RadialGrid::new(1, 4096, 40.0, Spacing::Sinh { core: 4.0 }).expect("profile grid"))
}

pub fn simulation_grid(n: usize) -> Arc<RadialGrid> {
    Arc::new(RadialGrid::new(1, n, 150.0, Spacing::Sinh { core: 2e-3 }).expect("simulation grid"))
}

pub fn profile(b: f64) -> SolitonProfile {
    let p = model(0.0);
    let pb = solve_pb(&p, b, 0.02, 1024).expect("P_b");
    assemble_profile(&p, pb, profile_grid()).expect("profile")
}

/// A narrow ladder around b = 0.3.
pub fn family() -> ProfileFamily {
    build_family(&model(0.0), &FamilySpec { b_lo: 0.25, b_hi: 0.35, ..Default::default() }, profile_grid()).expect("family")
}

/// Q_b scaled to λ₀ = 0.5 on a simulation grid of n nodes, with its operator.
pub fn initial_state(n: usize) -> (FvOperator, ComplexField) {
    let g = simulation_grid(n);
    let psi = make_initial_data(&profile(0.3), 0.5, 0.0, None, g.clone()).expect("initial data");
    (FvOperator::new(&g), psi)
}
