//! Cached b-ladder of collapse profiles with Lagrange interpolation in b.
//!
//! Members are stored gauge-free (φ_b U, smooth in b); the factor e^{−ibr²/4}
//! is applied on the fly.

use std::sync::Arc;

use serde::Serialize;

use super::assemble::{assemble_profile, gauge, Fidelity, SolitonProfile};
use super::pb::{continue_pb, ground_member};
use super::tb::solve_tb;
use crate::error::{Error, Result};
use crate::field::{ComplexField, C64, I};
use crate::fit::fit_line;
use crate::grid::RadialGrid;
use crate::params::ModelParams;

pub const LADDER_STEP: f64 = 0.01;

#[derive(Debug, Clone, Serialize)]
pub struct MemberStats {
    pub b: f64,
    /// ‖P_b − Q‖_∞ on the P_b grid.
    pub pb_deviation: f64,
    pub bvp_residual: f64,
    /// ‖Q_b‖²_{L²} at the family fidelity.
    pub mass: f64,
    pub beta: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct ProfileFamily {
    pub params: ModelParams,
    pub rho: f64,
    pub fidelity: Fidelity,
    pub grid: Arc<RadialGrid>,
    pub bs: Vec<f64>,
    pub stats: Vec<MemberStats>,
    /// ‖Q‖²_{L²} of the ground state.
    pub q_mass: f64,
    members: Vec<Vec<C64>>,
}

#[derive(Debug, Clone, Copy)]
pub struct FamilySpec {
    pub b_lo: f64,
    pub b_hi: f64,
    pub step: f64,
    pub rho: f64,
    pub fidelity: Fidelity,
    /// Node count of each P_b grid.
    pub pb_nodes: usize,
}

impl Default for FamilySpec {
    fn default() -> Self {
        Self {
            b_lo: 0.1,
            b_hi: 0.4,
            step: LADDER_STEP,
            rho: 0.02,
            fidelity: Fidelity::ZerothOrder,
            pb_nodes: 1024,
        }
    }
}

/// Lagrange weights and their derivatives for node positions 0..k at p.
fn lagrange(nodes: &[f64], x: f64) -> (Vec<f64>, Vec<f64>) {
    let k = nodes.len();
    let mut w = vec![0.0; k];
    let mut dw = vec![0.0; k];
    for a in 0..k {
        let mut v = 1.0;
        for b in 0..k {
            if a != b {
                v *= (x - nodes[b]) / (nodes[a] - nodes[b]);
            }
        }
        w[a] = v;
        let mut s = 0.0;
        for skip in 0..k {
            if skip == a {
                continue;
            }
            let mut t = 1.0 / (nodes[a] - nodes[skip]);
            for b in 0..k {
                if b != a && b != skip {
                    t *= (x - nodes[b]) / (nodes[a] - nodes[b]);
                }
            }
            s += t;
        }
        dw[a] = s;
    }
    (w, dw)
}

/// Builds the ladder b_lo, b_lo + step, …, b_hi by continuation from the
/// ground state, assembling every member on `grid`.
pub fn build_family(params: &ModelParams, spec: &FamilySpec, grid: Arc<RadialGrid>) -> Result<ProfileFamily> {
    if !(spec.b_lo >= 0.0 && spec.b_hi > spec.b_lo && spec.step > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "bad ladder [{}, {}] step {}",
            spec.b_lo, spec.b_hi, spec.step
        )));
    }
    if spec.fidelity == Fidelity::FirstOrder && spec.b_lo <= 0.0 {
        return Err(Error::InvalidParameter("first-order ladder needs b_lo > 0".into()));
    }
    let count = ((spec.b_hi - spec.b_lo) / spec.step).round() as usize + 1;
    if count < 4 {
        return Err(Error::IncompleteLadder(format!("{count} members, need at least 4")));
    }
    let ground = ground_member(params, spec.rho, spec.pb_nodes)?;
    let q_field = ComplexField::from_fn(grid.clone(), |r| C64::new(ground.at(r), 0.0))?;
    let q_mass = crate::functionals::mass(&q_field);
    let mut cur = ground.clone();
    let mut bs = Vec::with_capacity(count);
    let mut members = Vec::with_capacity(count);
    let mut stats = Vec::with_capacity(count);
    for k in 0..count {
        let b = spec.b_lo + k as f64 * spec.step;
        if b > 0.0 {
            cur = continue_pb(params, &cur, b)?;
        }
        let pb_deviation = cur
            .grid
            .nodes
            .iter()
            .zip(&cur.p)
            .map(|(&r, &v)| (v - ground.at(r)).abs())
            .fold(0.0, f64::max);
        let bvp_residual = cur.bvp_residual();
        let mut prof = assemble_profile(params, cur.clone(), grid.clone())?;
        if spec.fidelity == Fidelity::FirstOrder {
            prof = solve_tb(&prof)?;
        }
        let samples = prof.gauge_free();
        let mass = crate::functionals::mass(&prof.q_b());
        stats.push(MemberStats {
            b,
            pb_deviation,
            bvp_residual,
            mass,
            beta: prof.beta(),
        });
        bs.push(b);
        members.push(samples);
    }
    Ok(ProfileFamily {
        params: *params,
        rho: spec.rho,
        fidelity: spec.fidelity,
        grid,
        bs,
        stats,
        q_mass,
        members,
    })
}

impl ProfileFamily {
    pub fn b_range(&self) -> (f64, f64) {
        (self.bs[0], self.bs[self.bs.len() - 1])
    }

    pub fn contains(&self, b: f64) -> bool {
        let (lo, hi) = self.b_range();
        b >= lo - 1e-12 && b <= hi + 1e-12
    }

    fn stencil(&self, b: f64) -> Result<(usize, Vec<f64>, Vec<f64>)> {
        let (lo, hi) = self.b_range();
        if !self.contains(b) {
            return Err(Error::OutsideLadder { b, lo, hi });
        }
        let n = self.bs.len();
        let step = (hi - lo) / (n - 1) as f64;
        let p = (b - lo) / step;
        let start = (p.floor() as isize - 1).clamp(0, n as isize - 4) as usize;
        let (w, dw) = lagrange(&self.bs[start..start + 4], b);
        Ok((start, w, dw))
    }

    /// Gauge-free samples and their b-derivative at b.
    fn gauge_free_at(&self, b: f64) -> Result<(Vec<C64>, Vec<C64>)> {
        let (start, w, dw) = self.stencil(b)?;
        let n = self.grid.len();
        let mut v = vec![C64::new(0.0, 0.0); n];
        let mut dv = vec![C64::new(0.0, 0.0); n];
        for k in 0..4 {
            let m = &self.members[start + k];
            for i in 0..n {
                v[i] += m[i] * w[k];
                dv[i] += m[i] * dw[k];
            }
        }
        Ok((v, dv))
    }

    /// Q_b interpolated from the ladder.
    pub fn q_b(&self, b: f64) -> Result<ComplexField> {
        let (v, _) = self.gauge_free_at(b)?;
        let s = self.grid.nodes.iter().zip(v).map(|(&r, u)| gauge(b, r) * u).collect();
        ComplexField::new(self.grid.clone(), s)
    }

    /// ∂_bQ_b from the derivative of the interpolant.
    pub fn dq_db(&self, b: f64) -> Result<ComplexField> {
        let (v, dv) = self.gauge_free_at(b)?;
        let s = self
            .grid
            .nodes
            .iter()
            .zip(v.iter().zip(&dv))
            .map(|(&r, (&u, &du))| gauge(b, r) * (du - I * (r * r / 4.0) * u))
            .collect();
        ComplexField::new(self.grid.clone(), s)
    }

    /// Member k as stored (no interpolation).
    pub fn member(&self, k: usize) -> ComplexField {
        let b = self.bs[k];
        let s = self
            .grid
            .nodes
            .iter()
            .zip(&self.members[k])
            .map(|(&r, &u)| gauge(b, r) * u)
            .collect();
        ComplexField::from_parts(self.grid.clone(), s)
    }

    /// True when ‖P_b − Q‖_∞ increases along the ladder.
    pub fn deviation_monotone(&self) -> bool {
        self.stats.windows(2).all(|w| w[1].pb_deviation >= w[0].pb_deviation)
    }

    /// Quadratic fit of ‖Q_b‖² − ‖Q‖² against b: coefficients and R².
    pub fn mass_fit(&self) -> Result<([f64; 3], f64)> {
        let y: Vec<f64> = self.stats.iter().map(|s| s.mass - self.q_mass).collect();
        crate::fit::fit_quadratic(&self.bs, &y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailSlopes {
    /// Slope of ln|Q_b| over [R_b⁻/2, R_b⁻].
    pub core: f64,
    /// Slope of ln|Q_b| over the cut-off zone [R_b⁻, R_b).
    pub cutoff: f64,
}

fn log_slope(profile: &SolitonProfile, q: &ComplexField, lo: f64, hi: f64) -> Result<f64> {
    let (x, y): (Vec<f64>, Vec<f64>) = profile
        .grid
        .nodes
        .iter()
        .zip(q.samples())
        .filter(|(&r, z)| r >= lo && r < hi && z.norm() > 1e-300)
        .map(|(&r, z)| (r, z.norm().ln()))
        .unzip();
    Ok(fit_line(&x, &y)?.slope)
}

pub fn tail_slopes(profile: &SolitonProfile) -> Result<TailSlopes> {
    let q = profile.q_b();
    Ok(TailSlopes {
        core: log_slope(profile, &q, profile.r_b_minus / 2.0, profile.r_b_minus)?,
        cutoff: log_slope(profile, &q, profile.r_b_minus, profile.r_b)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Spacing;

    fn family(lo: f64, hi: f64) -> ProfileFamily {
        let p = ModelParams::new(1, 2.2, 2.2, 0.0, 0.1).unwrap();
        let g = Arc::new(RadialGrid::new(1, 2048, 40.0, Spacing::Sinh { core: 4.0 }).unwrap());
        let spec = FamilySpec {
            b_lo: lo,
            b_hi: hi,
            pb_nodes: 768,
            ..FamilySpec::default()
        };
        build_family(&p, &spec, g).unwrap()
    }

    #[test]
    fn lagrange_reproduces_cubics() {
        let nodes = [0.1, 0.2, 0.3, 0.4];
        let f = |x: f64| 1.0 - 2.0 * x + x.powi(3);
        let (w, dw) = lagrange(&nodes, 0.27);
        let v: f64 = nodes.iter().zip(&w).map(|(&x, w)| f(x) * w).sum();
        let dv: f64 = nodes.iter().zip(&dw).map(|(&x, w)| f(x) * w).sum();
        assert!((v - f(0.27)).abs() < 1e-14);
        assert!((dv - (-2.0 + 3.0 * 0.27 * 0.27)).abs() < 1e-12);
    }

    #[test]
    fn ladder_properties() {
        let fam = family(0.1, 0.4);
        assert!(fam.deviation_monotone());
        assert!(fam.stats.iter().all(|s| s.bvp_residual <= 1e-8));
        let (_, r2) = fam.mass_fit().unwrap();
        assert!(r2 > 0.99, "{r2}");
        // members are reproduced exactly at ladder nodes
        let k = 7;
        let q = fam.q_b(fam.bs[k]).unwrap();
        let m = fam.member(k);
        assert!(q.sub(&m).unwrap().max_abs() < 1e-13);
        assert!(fam.q_b(0.5).is_err());
    }

    #[test]
    fn derivative_matches_differences() {
        let fam = family(0.2, 0.4);
        let b = 0.305;
        let h = 1e-5;
        let fd = fam
            .q_b(b + h)
            .unwrap()
            .sub(&fam.q_b(b - h).unwrap())
            .unwrap()
            .scale(C64::new(0.5 / h, 0.0));
        let an = fam.dq_db(b).unwrap();
        let err = fd.sub(&an).unwrap().max_abs();
        assert!(err < 1e-6 * an.max_abs(), "{err}");
    }

    #[test]
    fn tail_slope_windows() {
        let p = ModelParams::new(1, 2.2, 2.2, 0.0, 0.1).unwrap();
        let g = Arc::new(RadialGrid::new(1, 2048, 40.0, Spacing::Sinh { core: 4.0 }).unwrap());
        for b in [0.1, 0.2, 0.3, 0.4] {
            let pb = crate::profiles::solve_pb(&p, b, 0.02, 768).unwrap();
            let prof = assemble_profile(&p, pb, g.clone()).unwrap();
            let t = tail_slopes(&prof).unwrap();
            assert!(t.cutoff <= -1.0, "b={b}: {t:?}");
            // WKB: P_b decays like exp(−∫√(1 − b²r²/4)), slower than e^{−r}
            assert!(t.core < 0.0 && t.core > -1.5, "b={b}: {t:?}");
        }
    }
}
