use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::pb::PbSolution;
use crate::cutoff::Plateau;
use crate::error::{Error, Result};
use crate::field::{ComplexField, C64, I};
use crate::grid::RadialGrid;
use crate::params::ModelParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Fidelity {
    ZerothOrder,
    FirstOrder,
}

/// The correction: gauge-free T on the P_b grid and the drift constant β.
#[derive(Debug, Clone)]
pub struct Correction {
    pub t: Vec<C64>,
    pub t_r: Vec<C64>,
    pub beta: f64,
    /// β from the continuous solvability formula b‖P‖²/(P, ∂_bP).
    pub beta_solvability: f64,
    /// Smallest singular value of the bordered L₋ system.
    pub sigma_min: f64,
    /// ∂_bP on the P_b grid.
    pub dp_db: Vec<f64>,
    /// ∂_bU of the corrected core on the P_b grid.
    pub du_db: Vec<C64>,
}

/// Collapse core Q̂_b = φ_b e^{−ibr²/4} P_b with its localization error.
#[derive(Debug, Clone)]
pub struct SolitonProfile {
    pub params: ModelParams,
    pub b: f64,
    pub rho: f64,
    pub r_b: f64,
    pub r_b_minus: f64,
    pub pb: PbSolution,
    pub grid: Arc<RadialGrid>,
    pub phi: Vec<f64>,
    pub qhat: ComplexField,
    pub psi_tilde: ComplexField,
    pub correction: Option<Correction>,
    /// Gauge-free T_b on the profile grid (zero beyond R_b), first order only.
    pub tb: Option<ComplexField>,
    /// ∂_b Q̂_b on the profile grid, filled in by the first-order solve.
    pub dq_db: Option<ComplexField>,
    pub fidelity: Fidelity,
}

pub fn gauge(b: f64, r: f64) -> C64 {
    C64::from_polar(1.0, -b * r * r / 4.0)
}

impl SolitonProfile {
    pub fn cutoff(&self) -> Option<Plateau> {
        (self.b > 0.0).then(|| Plateau::new(self.r_b_minus, self.r_b))
    }

    /// (φ, φ', Δφ) at r.
    pub fn phi_at(&self, r: f64) -> (f64, f64, f64) {
        match self.cutoff() {
            Some(c) => {
                let (v, d1, _) = c.eval(r);
                (v, d1, c.laplacian(r, self.params.d))
            }
            None => (1.0, 0.0, 0.0),
        }
    }

    /// Gauge-free core U = P_b (+ s_c T_b at first order), with U' at r.
    pub fn core_at(&self, r: f64) -> (C64, C64) {
        let p = C64::new(self.pb.at(r), 0.0);
        let pr = C64::new(self.pb.dr_at(r), 0.0);
        match (&self.correction, self.fidelity) {
            (Some(c), Fidelity::FirstOrder) if r < self.pb.grid.r_max => {
                let s = self.params.s_c;
                let g = &self.pb.grid;
                (p + g.interpolate(&c.t, r) * s, pr + g.interpolate(&c.t_r, r) * s)
            }
            _ => (p, pr),
        }
    }

    /// Ψ̃_b at r:
    /// (2φ'P' + PΔφ + (φ^{2σ+1} − φ)P^{2σ+1}) e^{−ibr²/4}.
    pub fn psi_tilde_at(&self, r: f64) -> C64 {
        if self.b == 0.0 || r < self.r_b_minus || r > self.r_b {
            return C64::new(0.0, 0.0);
        }
        let s = self.params.sigma1;
        let (phi, phi_r, phi_lap) = self.phi_at(r);
        let p = self.pb.at(r);
        let pr = self.pb.dr_at(r);
        let v = 2.0 * phi_r * pr
            + p * phi_lap
            + (phi.powf(2.0 * s + 1.0) - phi) * p.abs().powf(2.0 * s) * p;
        gauge(self.b, r) * v
    }

    /// The localization error of the current core with the sign that makes
    /// the profile equation read LHS = −Ψ_b.
    pub fn psi_b(&self) -> ComplexField {
        let s = self.params.sigma1;
        self.grid_map(|r| {
            if self.b == 0.0 || r < self.r_b_minus || r > self.r_b {
                return C64::new(0.0, 0.0);
            }
            let (phi, phi_r, phi_lap) = self.phi_at(r);
            let (u, ur) = self.core_at(r);
            let nl = u * u.norm().powf(2.0 * s) * (phi.powf(2.0 * s + 1.0) - phi);
            -(ur * (2.0 * phi_r) + u * phi_lap + nl) * gauge(self.b, r)
        })
    }

    /// Q_b on the profile grid at the profile's fidelity.
    pub fn q_b(&self) -> ComplexField {
        match self.fidelity {
            Fidelity::ZerothOrder => self.qhat.clone(),
            Fidelity::FirstOrder => self.grid_map(|r| {
                let (phi, _, _) = self.phi_at(r);
                let (u, _) = self.core_at(r);
                gauge(self.b, r) * u * phi
            }),
        }
    }

    /// Gauge-free φ_b U samples on the profile grid.
    pub fn gauge_free(&self) -> Vec<C64> {
        self.grid
            .nodes
            .iter()
            .map(|&r| {
                let (phi, _, _) = self.phi_at(r);
                self.core_at(r).0 * phi
            })
            .collect()
    }

    /// Q_b at an arbitrary radius (zero beyond R_b).
    pub fn q_at(&self, r: f64) -> C64 {
        let r = r.abs();
        if self.b > 0.0 && r >= self.r_b {
            return C64::new(0.0, 0.0);
        }
        let (phi, _, _) = self.phi_at(r);
        let u = match self.fidelity {
            Fidelity::ZerothOrder => C64::new(self.pb.at(r), 0.0),
            Fidelity::FirstOrder => self.core_at(r).0,
        };
        gauge(self.b, r) * u * phi
    }

    pub fn beta(&self) -> Option<f64> {
        self.correction.as_ref().map(|c| c.beta)
    }

    fn grid_map<F: Fn(f64) -> C64>(&self, f: F) -> ComplexField {
        ComplexField::from_parts(self.grid.clone(), self.grid.sample(f))
    }
}

/// Builds Q̂_b = φ_b e^{−ibr²/4} P_b and Ψ̃_b on `grid`.
pub fn assemble_profile(params: &ModelParams, pb: PbSolution, grid: Arc<RadialGrid>) -> Result<SolitonProfile> {
    if grid.d != params.d || pb.grid.d != params.d {
        return Err(Error::GridMismatch);
    }
    let b = pb.b;
    let mut prof = SolitonProfile {
        params: *params,
        b,
        rho: pb.rho,
        r_b: pb.r_b,
        r_b_minus: pb.r_b_minus,
        pb,
        grid: grid.clone(),
        phi: Vec::new(),
        qhat: ComplexField::zeros(grid.clone()),
        psi_tilde: ComplexField::zeros(grid.clone()),
        correction: None,
        tb: None,
        dq_db: None,
        fidelity: Fidelity::ZerothOrder,
    };
    prof.phi = grid.nodes.iter().map(|&r| prof.phi_at(r).0).collect();
    let qhat: Vec<C64> = grid
        .nodes
        .iter()
        .zip(&prof.phi)
        .map(|(&r, &phi)| gauge(b, r) * (phi * prof.pb.at(r)))
        .collect();
    prof.qhat = ComplexField::new(grid.clone(), qhat)?;
    let psi: Vec<C64> = grid.nodes.iter().map(|&r| prof.psi_tilde_at(r)).collect();
    prof.psi_tilde = ComplexField::new(grid, psi)?;
    Ok(prof)
}

/// Samples an arbitrary grid with Ψ̃_b.
pub fn psi_tilde_on(profile: &SolitonProfile, grid: Arc<RadialGrid>) -> ComplexField {
    let s = grid.sample(|r| profile.psi_tilde_at(r));
    ComplexField::from_parts(grid, s)
}

/// i·f convenience.
pub fn times_i(f: &ComplexField) -> ComplexField {
    f.scale(I)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{apply_lambda, real_pair, vector_momentum};
    use crate::grid::Spacing;
    use crate::profiles::pb::solve_pb;

    fn profile(b: f64) -> SolitonProfile {
        let p = ModelParams::new(1, 2.2, 2.2, 0.0, 0.1).unwrap();
        let pb = solve_pb(&p, b, 0.02, 1024).unwrap();
        let g = Arc::new(RadialGrid::new(1, 4096, 40.0, Spacing::Sinh { core: 4.0 }).unwrap());
        assemble_profile(&p, pb, g).unwrap()
    }

    #[test]
    fn lambda_pairing_identity() {
        for b in [0.2, 0.3] {
            let prof = profile(b);
            let q = &prof.qhat;
            let lq = apply_lambda(q, prof.params.sigma1);
            let lhs = real_pair(&lq, &times_i(q)).unwrap();
            let rq = q.map(|r, z| z * r);
            let rhs = -(b / 2.0) * real_pair(&rq, &rq).unwrap();
            assert!(((lhs - rhs) / rhs).abs() < 1e-6, "b={b}: {lhs} vs {rhs}");
            assert_eq!(vector_momentum(q), 0.0);
        }
    }

    #[test]
    fn psi_tilde_supported_in_cutoff_zone() {
        let prof = profile(0.3);
        let mut inside = 0.0_f64;
        for (&r, z) in prof.grid.nodes.iter().zip(prof.psi_tilde.samples()) {
            if r < prof.r_b_minus || r > prof.r_b {
                assert_eq!(z.norm(), 0.0, "r={r}");
            } else {
                inside = inside.max(z.norm());
            }
        }
        assert!(inside > 0.0);
    }

    #[test]
    fn cutoff_plateaus() {
        let prof = profile(0.3);
        for (&r, &phi) in prof.grid.nodes.iter().zip(&prof.phi) {
            assert!((0.0..=1.0).contains(&phi));
            if r <= prof.r_b_minus {
                assert_eq!(phi, 1.0);
            }
            if r >= prof.r_b {
                assert_eq!(phi, 0.0);
            }
        }
    }
}
