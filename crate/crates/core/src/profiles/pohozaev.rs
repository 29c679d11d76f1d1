use serde::Serialize;

use super::assemble::{Fidelity, SolitonProfile};
use crate::error::Result;
use crate::field::{apply_lambda, real_pair, I};
use crate::functionals::{energy, mass};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PohozaevReport {
    pub energy: f64,
    pub mass: f64,
    /// (i s_cβ∂_bQ_b, ΛQ_b); zero at zeroth order.
    pub drift_pairing: f64,
    /// (Ψ_b, ΛQ_b).
    pub psi_pairing: f64,
    pub residual: f64,
}

/// |2E[Q_b] − (i s_cβ∂_bQ_b + Ψ_b, ΛQ_b) − s_c(2E[Q_b] + ‖Q_b‖²)|.
pub fn pohozaev_report(profile: &SolitonProfile) -> Result<PohozaevReport> {
    let p = &profile.params;
    let q = profile.q_b();
    let lq = apply_lambda(&q, p.sigma1);
    let e = energy(&q, p.sigma1);
    let m = mass(&q);
    let psi_pairing = real_pair(&profile.psi_b(), &lq)?;
    let drift_pairing = match (profile.fidelity, &profile.dq_db, profile.beta()) {
        (Fidelity::FirstOrder, Some(dq), Some(beta)) => real_pair(&dq.scale(I * (p.s_c * beta)), &lq)?,
        _ => 0.0,
    };
    let residual = (2.0 * e - drift_pairing - psi_pairing - p.s_c * (2.0 * e + m)).abs();
    Ok(PohozaevReport {
        energy: e,
        mass: m,
        drift_pairing,
        psi_pairing,
        residual,
    })
}

pub fn pohozaev_residual(profile: &SolitonProfile) -> Result<f64> {
    Ok(pohozaev_report(profile)?.residual)
}
