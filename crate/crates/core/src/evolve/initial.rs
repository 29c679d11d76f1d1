//! Initial data ψ₀ = λ₀^{−1/σ₁}(Q_{b₀} + ξ₀)(r/λ₀)e^{iγ₀}.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{ComplexField, C64};
use crate::functionals::energy;
use crate::grid::RadialGrid;
use crate::modulation::{hs_exponent, orthogonality_residuals, xi_norms};
use crate::profiles::SolitonProfile;

/// Samples the rescaled profile (plus an optional remainder given on any grid)
/// on `grid`. Q_b is evaluated from the profile itself, not interpolated.
pub fn make_initial_data(
    profile: &SolitonProfile,
    lambda0: f64,
    gamma0: f64,
    xi0: Option<&ComplexField>,
    grid: Arc<RadialGrid>,
) -> Result<ComplexField> {
    if !(lambda0 > 0.0 && lambda0.is_finite()) {
        return Err(Error::InvalidParameter(format!("lambda0 = {lambda0} must be positive")));
    }
    if grid.d != profile.params.d {
        return Err(Error::GridMismatch);
    }
    let amp = lambda0.powf(-1.0 / profile.params.sigma1);
    let rot = C64::from_polar(amp, gamma0);
    let same = grid.same_as(&profile.grid) && lambda0 == 1.0;
    let q = profile.q_b();
    let samples = grid
        .nodes
        .iter()
        .enumerate()
        .map(|(j, &r)| {
            let y = r / lambda0;
            let mut v = if same { q.samples()[j] } else { profile.q_at(y) };
            if let Some(xi) = xi0 {
                v += if same && xi.grid().same_as(&grid) {
                    xi.samples()[j]
                } else {
                    xi.at(y)
                };
            }
            v * rot
        })
        .collect();
    ComplexField::new(grid, samples)
}

/// Finite-parameter analogues of the initial-set conditions. Reported, never
/// enforced. Ratios are log₁₀(value/bound); negative means satisfied.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdmissibilityReport {
    pub b0: f64,
    pub lambda0: f64,
    pub gamma_b: Option<f64>,
    pub nu: f64,
    pub s_c: f64,
    /// Γ^{1+ν¹⁰} ≤ s_c ≤ Γ^{1−ν¹⁰}.
    pub sc_in_band: Option<bool>,
    /// log10 of λ₀ against Γ^{100}; the ratios are None when Γ is unknown or the value is zero.
    pub lambda_ratio: Option<f64>,
    /// λ₀^{2−2s_c}|E[ψ₀]| + λ₀^{1−2s_c}|P[ψ₀]|.
    pub energy_momentum: f64,
    /// Against Γ^{50}.
    pub energy_momentum_ratio: Option<f64>,
    /// ‖|∇|^sξ₀‖² + ‖∇ξ₀‖² + ∫|ξ₀|²e^{−|y|}.
    pub xi_norm: f64,
    /// Against Γ^{1−ν}.
    pub xi_ratio: Option<f64>,
    pub orthogonality: [f64; 4],
    /// η ≤ s_c³.
    pub eta_small: bool,
    pub admissible: bool,
}

/// Evaluates the report for ψ₀ built from `profile`, λ₀ and ξ₀ (on the profile grid).
pub fn admissibility(
    profile: &SolitonProfile,
    xi0: Option<&ComplexField>,
    lambda0: f64,
    gamma_b: Option<f64>,
    nu: f64,
) -> Result<AdmissibilityReport> {
    let p = &profile.params;
    let s_c = p.s_c;
    let q = profile.q_b();
    let xi = match xi0 {
        Some(x) => {
            q.check_same_grid(x)?;
            x.clone()
        }
        None => ComplexField::zeros(q.grid().clone()),
    };
    let v = q.add(&xi)?;
    // λ^{2−2s_c}E[ψ₀] = E[Q_b + ξ₀] and P ≡ 0 for radial data
    let em = energy(&v, p.sigma1).abs();
    let norms = xi_norms(&xi, hs_exponent(p));
    let xi_norm = norms.h1_local() + if norms.hs.is_finite() { norms.hs } else { 0.0 };
    let orthogonality = if xi0.is_some() {
        orthogonality_residuals(&xi, &q, p.sigma1)?
    } else {
        [0.0; 4]
    };
    let eta_small = p.eta <= s_c.powi(3);
    let ratio = |value: f64, exp: f64, g: f64| (value != 0.0).then(|| value.log10() - exp * g.log10());
    let (sc_in_band, lambda_ratio, em_ratio, xi_ratio) = match gamma_b {
        Some(g) if g > 0.0 => {
            let lo = (1.0 + nu.powi(10)) * g.ln();
            let hi = (1.0 - nu.powi(10)) * g.ln();
            let l = s_c.ln();
            (
                Some(l >= lo && l <= hi),
                ratio(lambda0, 100.0, g),
                ratio(em, 50.0, g),
                ratio(xi_norm, 1.0 - nu, g),
            )
        }
        _ => (None, None, None, None),
    };
    let small = |value: f64, r: Option<f64>| gamma_b.is_some() && (value == 0.0 || r.is_some_and(|r| r < 0.0));
    let admissible = sc_in_band == Some(true)
        && small(lambda0, lambda_ratio)
        && small(em, em_ratio)
        && small(xi_norm, xi_ratio)
        && orthogonality.iter().all(|o| o.abs() <= 1e-9 * (1.0 + xi.norm_l2()))
        && eta_small;
    Ok(AdmissibilityReport {
        b0: profile.b,
        lambda0,
        gamma_b,
        nu,
        s_c,
        sc_in_band,
        lambda_ratio,
        energy_momentum: em,
        energy_momentum_ratio: em_ratio,
        xi_norm,
        xi_ratio,
        orthogonality,
        eta_small,
        admissible,
    })
}
