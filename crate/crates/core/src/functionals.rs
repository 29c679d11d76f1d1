//! Scalar functionals of radial fields.

use serde::{Deserialize, Serialize};

use crate::cutoff::chi_a;
use crate::error::{Error, Result};
use crate::field::{apply_lambda, real_pair, vector_momentum, ComplexField, I};
use crate::params::ModelParams;
use crate::profiles::GroundState;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BalanceRecord {
    pub t: f64,
    pub mass: f64,
    pub energy: f64,
    pub momentum: f64,
    pub mass_rate: f64,
    pub energy_rate: f64,
    pub momentum_rate: f64,
    /// ∫₀ᵗ of the three rates.
    pub cumulative_mass_dissipation: f64,
    pub cumulative_energy_dissipation: f64,
    pub cumulative_momentum_dissipation: f64,
}

pub fn mass(psi: &ComplexField) -> f64 {
    let s = psi.samples();
    psi.grid().integrate_by(|i| s[i].norm_sqr())
}

pub fn grad_norm_sq(psi: &ComplexField) -> f64 {
    let d = psi.d_dr();
    let s = d.samples();
    psi.grid().integrate_by(|i| s[i].norm_sqr())
}

/// E = ∫ ½|∇ψ|² − |ψ|^{2σ₁+2}/(2σ₁+2).
pub fn energy(psi: &ComplexField, sigma1: f64) -> f64 {
    let dpsi = psi.d_dr();
    let s = psi.samples();
    let ds = dpsi.samples();
    let p = 2.0 * sigma1 + 2.0;
    psi.grid()
        .integrate_by(|i| 0.5 * ds[i].norm_sqr() - s[i].norm().powf(p) / p)
}

/// Vector momentum (∇ψ, iψ); zero for every radial field.
pub fn momentum(psi: &ComplexField) -> f64 {
    vector_momentum(psi)
}

/// The scalar radial quantity (∂_rψ, iψ) = ∫ Im(ψ̄ ∂_rψ). Diagnostic only; it
/// is not a conserved quantity of the undamped flow.
pub fn radial_momentum(psi: &ComplexField) -> f64 {
    let dpsi = psi.d_dr();
    let s = psi.samples();
    let ds = dpsi.samples();
    psi.grid().integrate_by(|i| (s[i].conj() * ds[i]).im)
}

pub fn mass_rate(psi: &ComplexField, params: &ModelParams) -> f64 {
    if params.eta == 0.0 {
        return 0.0;
    }
    let p = 2.0 * params.sigma2 + 2.0;
    let s = psi.samples();
    -2.0 * params.eta * psi.grid().integrate_by(|i| s[i].norm().powf(p))
}

pub fn energy_rate(psi: &ComplexField, params: &ModelParams) -> f64 {
    if params.eta == 0.0 {
        return 0.0;
    }
    let (s1, s2) = (params.sigma1, params.sigma2);
    let dpsi = psi.d_dr();
    let s = psi.samples();
    let ds = dpsi.samples();
    params.eta
        * psi.grid().integrate_by(|i| {
            let a = s[i].norm();
            let re = (s[i].conj() * ds[i]).re;
            let cross = if a == 0.0 {
                0.0
            } else {
                2.0 * s2 * a.powf(2.0 * s2) * (re / a).powi(2)
            };
            a.powf(2.0 * s1 + 2.0 * s2 + 2.0) - a.powf(2.0 * s2) * ds[i].norm_sqr() - cross
        })
}

/// Rate of the vector momentum; zero for radial fields.
pub fn momentum_rate(_psi: &ComplexField, _params: &ModelParams) -> f64 {
    0.0
}

/// −2η∫|ψ|^{2σ₂} Im(ψ̄∂_rψ), the radial reading of the momentum rate.
pub fn radial_momentum_rate(psi: &ComplexField, params: &ModelParams) -> f64 {
    if params.eta == 0.0 {
        return 0.0;
    }
    let dpsi = psi.d_dr();
    let s = psi.samples();
    let ds = dpsi.samples();
    -2.0 * params.eta
        * psi
            .grid()
            .integrate_by(|i| s[i].norm().powf(2.0 * params.sigma2) * (s[i].conj() * ds[i]).im)
}

/// 𝓗(f, f) with the mass-critical ground state Q_c (σ = 2/d) on the same grid.
pub fn quadratic_form_h(f: &ComplexField, qc: &GroundState) -> Result<f64> {
    if !f.grid().same_as(&qc.grid) {
        return Err(Error::GridMismatch);
    }
    let d = f.grid().d as f64;
    let sigma_c = 2.0 / d;
    if (qc.params.sigma1 - sigma_c).abs() > 1e-12 {
        return Err(Error::InvalidParameter(format!(
            "H needs the mass-critical ground state (sigma = {sigma_c}), got sigma = {}",
            qc.params.sigma1
        )));
    }
    let q = &qc.samples;
    let dq = qc.grid.d_dr(q);
    let nodes = &f.grid().nodes;
    let df = f.d_dr();
    let s = f.samples();
    let ds = df.samples();
    let w_re = (2.0 / d) * (1.0 + 4.0 / d);
    let w_im = 2.0 / d;
    Ok(f.grid().integrate_by(|i| {
        let weight = q[i].max(0.0).powf(4.0 / d - 1.0) * nodes[i] * dq[i];
        ds[i].norm_sqr() + weight * (w_re * s[i].re * s[i].re + w_im * s[i].im * s[i].im)
    }))
}

/// f = −½(iQ̃_b, r∂_rQ̃_b) − (iξ̃, ΛQ̃_b).
pub fn virial_f(qb: &ComplexField, xi: &ComplexField, params: &ModelParams) -> Result<f64> {
    qb.check_same_grid(xi)?;
    let rdq = qb.d_dr().map(|r, z| z * r);
    let iq = qb.scale(I);
    let ixi = xi.scale(I);
    let lq = apply_lambda(qb, params.sigma1);
    Ok(-0.5 * real_pair(&iq, &rdq)? - real_pair(&ixi, &lq)?)
}

/// f(v) sampled on a b-ladder starting at v = 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FLadder {
    pub b: Vec<f64>,
    pub f: Vec<f64>,
}

impl FLadder {
    /// Trapezoid ∫₀^b f(v) dv.
    pub fn integral_to(&self, b: f64) -> Result<f64> {
        if self.b.len() != self.f.len() || self.b.is_empty() {
            return Err(Error::IncompleteLadder("empty or ragged f-ladder".into()));
        }
        if self.b[0].abs() > 1e-14 {
            return Err(Error::IncompleteLadder(format!(
                "ladder starts at b = {} instead of 0",
                self.b[0]
            )));
        }
        let top = *self.b.last().unwrap();
        if b > top + 1e-12 {
            return Err(Error::IncompleteLadder(format!("ladder ends at {top} < b = {b}")));
        }
        if self.b.len() > 2 {
            let h0 = self.b[1] - self.b[0];
            if self.b.windows(2).any(|w| w[1] - w[0] > 1.5 * h0 || w[1] <= w[0]) {
                return Err(Error::IncompleteLadder("gap in the b-ladder".into()));
            }
        }
        let mut acc = 0.0;
        for k in 0..self.b.len() - 1 {
            let (b0, b1) = (self.b[k], self.b[k + 1]);
            if b <= b0 {
                break;
            }
            let (f0, f1) = (self.f[k], self.f[k + 1]);
            if b >= b1 {
                acc += 0.5 * (f0 + f1) * (b1 - b0);
            } else {
                let fb = f0 + (f1 - f0) * (b - b0) / (b1 - b0);
                acc += 0.5 * (f0 + fb) * (b - b0);
            }
        }
        Ok(acc)
    }
}

/// K = ‖Q_b‖² − ‖Q‖² − b f(b) + ∫₀^b f.
pub fn k_of_b(b: f64, qb_mass: f64, q_mass: f64, f_b: f64, ladder: &FLadder) -> Result<f64> {
    Ok(qb_mass - q_mass - b * f_b + ladder.integral_to(b)?)
}

pub struct JInputs<'a> {
    pub xi: &'a ComplexField,
    pub qb: &'a ComplexField,
    pub q_mass: f64,
    pub b: f64,
    pub a: f64,
    pub f_value: f64,
    pub ladder: &'a FLadder,
}

/// J = ∫(1−χ_A)|ξ|² + ‖Q_b‖² − ‖Q‖² + 2(ξ, Q_b) − b f + ∫₀^b f.
pub fn lyapunov_j(inp: &JInputs<'_>) -> Result<f64> {
    inp.xi.check_same_grid(inp.qb)?;
    let s = inp.xi.samples();
    let nodes = &inp.xi.grid().nodes;
    let outer = inp
        .xi
        .grid()
        .integrate_by(|i| (1.0 - chi_a(nodes[i], inp.a)) * s[i].norm_sqr());
    Ok(outer + mass(inp.qb) - inp.q_mass + 2.0 * real_pair(inp.xi, inp.qb)? - inp.b * inp.f_value
        + inp.ladder.integral_to(inp.b)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::C64;
    use crate::grid::{RadialGrid, Spacing};
    use crate::profiles::solve_ground_state;
    use std::sync::Arc;

    fn grid(d: usize) -> Arc<RadialGrid> {
        Arc::new(RadialGrid::new(d, 4096, 40.0, Spacing::Sinh { core: 4.0 }).unwrap())
    }

    #[test]
    fn mass_critical_soliton_has_zero_energy() {
        let p = ModelParams::new(1, 2.0, 2.0, 0.0, 0.1).unwrap();
        let q = solve_ground_state(&p, grid(1)).unwrap().to_field();
        assert!(energy(&q, 2.0).abs() < 1e-6, "{}", energy(&q, 2.0));
    }

    #[test]
    fn rates_vanish_without_damping_and_mass_rate_nonpositive() {
        let g = grid(2);
        let psi = ComplexField::from_fn(g, |r| C64::from_polar((-r * r).exp(), r)).unwrap();
        let p0 = ModelParams::new(2, 1.5, 1.0, 0.0, 0.1).unwrap();
        assert_eq!(mass_rate(&psi, &p0), 0.0);
        assert_eq!(energy_rate(&psi, &p0), 0.0);
        assert_eq!(momentum_rate(&psi, &p0), 0.0);
        let p1 = p0.with_damping(1.0, 0.3).unwrap();
        assert!(mass_rate(&psi, &p1) < 0.0);
    }

    #[test]
    fn real_field_has_no_radial_momentum_rate() {
        let g = grid(1);
        let psi = ComplexField::from_fn(g, |r| C64::new((-r * r).exp(), 0.0)).unwrap();
        let p = ModelParams::new(1, 2.5, 1.0, 0.4, 0.1).unwrap();
        assert_eq!(radial_momentum_rate(&psi, &p), 0.0);
        assert_eq!(momentum(&psi), 0.0);
    }

    #[test]
    fn linear_damping_handles_zero_amplitude() {
        let g = grid(1);
        let psi = ComplexField::from_fn(g, |r| C64::new(r * (-r * r).exp(), 0.0)).unwrap();
        let p = ModelParams::new(1, 2.5, 0.0, 0.4, 0.1).unwrap();
        assert!(energy_rate(&psi, &p).is_finite());
    }

    #[test]
    fn h_form_weights() {
        let g = grid(1);
        let p = ModelParams::new(1, 2.0, 2.0, 0.0, 0.1).unwrap();
        let qc = solve_ground_state(&p, g.clone()).unwrap();
        let far = ComplexField::from_fn(g.clone(), |r| {
            C64::new(if (30.0..=35.0).contains(&r) { ((r - 30.0) * (35.0 - r)).powi(3) } else { 0.0 }, 0.0)
        })
        .unwrap();
        let h = quadratic_form_h(&far, &qc).unwrap();
        let g2 = grad_norm_sq(&far);
        assert!(((h - g2) / g2).abs() < 1e-6);
        let bump = ComplexField::from_fn(g, |r| C64::new((-r * r).exp(), 0.0)).unwrap();
        let hr = quadratic_form_h(&bump, &qc).unwrap() - grad_norm_sq(&bump);
        let hi = quadratic_form_h(&bump.scale(I), &qc).unwrap() - grad_norm_sq(&bump);
        assert!((hi - hr / 5.0).abs() < 1e-12 * hr.abs().max(1.0));
        let h3 = quadratic_form_h(&bump.scale(C64::new(3.0, 0.0)), &qc).unwrap();
        assert!((h3 - 9.0 * quadratic_form_h(&bump, &qc).unwrap()).abs() < 1e-10);
    }

    #[test]
    fn ladder_integral_and_errors() {
        let b: Vec<f64> = (0..=10).map(|k| k as f64 * 0.01).collect();
        let f: Vec<f64> = b.iter().map(|v| 2.0 * v).collect();
        let lad = FLadder { b, f };
        assert!((lad.integral_to(0.1).unwrap() - 0.01).abs() < 1e-15);
        assert!((lad.integral_to(0.055).unwrap() - 0.055 * 0.055).abs() < 1e-15);
        assert!(lad.integral_to(0.2).is_err());
        let shifted = FLadder {
            b: vec![0.01, 0.02],
            f: vec![0.0, 0.0],
        };
        assert!(shifted.integral_to(0.015).is_err());
    }

    #[test]
    fn scaling_bookkeeping() {
        let d = 1;
        let sigma = 2.2;
        let s_c = 0.5 - 1.0 / sigma;
        let g = Arc::new(RadialGrid::new(d, 4096, 60.0, Spacing::Sinh { core: 2.0 }).unwrap());
        let u = |r: f64| C64::from_polar((-r * r / 2.0).exp() * 1.3, 0.2 * r * r);
        let base = ComplexField::from_fn(g.clone(), u).unwrap();
        for lam in [0.5, 2.0] {
            let psi = ComplexField::from_fn(g.clone(), |r| u(r / lam) * lam.powf(-1.0 / sigma)).unwrap();
            let rm = mass(&psi) / (lam.powf(2.0 * s_c) * mass(&base));
            let re = energy(&psi, sigma) / (lam.powf(2.0 * s_c - 2.0) * energy(&base, sigma));
            assert!((rm - 1.0).abs() < 1e-8, "mass {rm}");
            assert!((re - 1.0).abs() < 1e-8, "energy {re}");
        }
    }
}
