//! Time steppers on a finite-volume form of the radial Laplacian.
//!
//! Cells are [r_{j−½}, r_{j+½}] with midpoint faces; V_j is the exact cell
//! measure and κ_{j+½} = |S^{d−1}| r_{j+½}^{d−1}/(r_{j+1} − r_j). With
//! S the symmetric stiffness matrix, Δ_h = −V⁻¹S, so the discrete mass
//! Σ V|ψ|² and kinetic energy ½(Sψ, ψ) are exact quadratic invariants of the
//! linear flow. No flux crosses r = 0 or r_max.

use serde::{Deserialize, Serialize};

use crate::banded::solve_tridiagonal;
use crate::error::{Error, Result};
use crate::field::{C64, I};
use crate::grid::RadialGrid;
use crate::params::{sphere_area, ModelParams};

#[derive(Debug, Clone)]
pub struct FvOperator {
    pub d: usize,
    pub volumes: Vec<f64>,
    /// Face coefficients, κ[j] couples nodes j and j+1.
    pub kappa: Vec<f64>,
}

impl FvOperator {
    pub fn new(grid: &RadialGrid) -> Self {
        let n = grid.len();
        let d = grid.d;
        let w = sphere_area(d);
        let r = &grid.nodes;
        let faces: Vec<f64> = (0..n - 1).map(|j| 0.5 * (r[j] + r[j + 1])).collect();
        let measure = |a: f64, b: f64| w / d as f64 * (b.powi(d as i32) - a.powi(d as i32));
        let mut volumes = Vec::with_capacity(n);
        for j in 0..n {
            let a = if j == 0 { 0.0 } else { faces[j - 1] };
            let b = if j == n - 1 { r[n - 1] } else { faces[j] };
            volumes.push(measure(a, b));
        }
        let kappa = (0..n - 1)
            .map(|j| w * faces[j].powi(d as i32 - 1) / (r[j + 1] - r[j]))
            .collect();
        Self { d, volumes, kappa }
    }

    pub fn len(&self) -> usize {
        self.volumes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.volumes.is_empty()
    }

    /// S f.
    pub fn stiffness(&self, f: &[C64]) -> Vec<C64> {
        let n = self.len();
        let mut out = vec![C64::new(0.0, 0.0); n];
        for j in 0..n - 1 {
            let flux = (f[j + 1] - f[j]) * self.kappa[j];
            out[j] -= flux;
            out[j + 1] += flux;
        }
        out
    }

    /// Δ_h f = −V⁻¹ S f.
    pub fn laplacian(&self, f: &[C64]) -> Vec<C64> {
        self.stiffness(f)
            .into_iter()
            .zip(&self.volumes)
            .map(|(s, v)| -s / *v)
            .collect()
    }

    pub fn mass(&self, f: &[C64]) -> f64 {
        f.iter().zip(&self.volumes).map(|(z, v)| v * z.norm_sqr()).sum()
    }

    /// ½‖∇f‖² = ½ Σ κ|f_{j+1} − f_j|².
    pub fn kinetic(&self, f: &[C64]) -> f64 {
        0.5 * self
            .kappa
            .iter()
            .enumerate()
            .map(|(j, k)| k * (f[j + 1] - f[j]).norm_sqr())
            .sum::<f64>()
    }

    pub fn grad_norm(&self, f: &[C64]) -> f64 {
        (2.0 * self.kinetic(f)).sqrt()
    }

    pub fn potential(&self, f: &[C64], sigma1: f64) -> f64 {
        let p = 2.0 * sigma1 + 2.0;
        f.iter()
            .zip(&self.volumes)
            .map(|(z, v)| v * z.norm().powf(p))
            .sum::<f64>()
            / p
    }

    pub fn energy(&self, f: &[C64], sigma1: f64) -> f64 {
        self.kinetic(f) - self.potential(f, sigma1)
    }

    /// −2η Σ V|f|^{2σ₂+2}.
    pub fn mass_rate(&self, f: &[C64], params: &ModelParams) -> f64 {
        if params.eta == 0.0 {
            return 0.0;
        }
        let p = 2.0 * params.sigma2 + 2.0;
        -2.0 * params.eta * f.iter().zip(&self.volumes).map(|(z, v)| v * z.norm().powf(p)).sum::<f64>()
    }

    /// η Σ V|f|^{2σ₂}(|f|^{2σ₁+2} + Re f̄Δ_h f), the discrete counterpart of
    /// η∫|ψ|^{2σ₂}(|ψ|^{2σ₁+2} + Re ψ̄Δψ).
    pub fn energy_rate(&self, f: &[C64], params: &ModelParams) -> f64 {
        if params.eta == 0.0 {
            return 0.0;
        }
        let s = self.stiffness(f);
        let mut acc = 0.0;
        for j in 0..self.len() {
            let a2 = f[j].norm_sqr();
            let h = damping_weight(a2, params.sigma2);
            // V·Re(f̄Δ_h f) = −Re(f̄ S f)
            acc += h * (self.volumes[j] * a2.powf(params.sigma1 + 1.0) - (f[j].conj() * s[j]).re);
        }
        params.eta * acc
    }
}

/// |ψ|^{2σ₂} from |ψ|², with |ψ|⁰ = 1.
#[inline]
fn damping_weight(a2: f64, sigma2: f64) -> f64 {
    if sigma2 == 0.0 {
        1.0
    } else {
        a2.powf(sigma2)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    /// Implicit midpoint with the averaged nonlinearity (F(|ψ⁺|²) − F(|ψ|²))/(|ψ⁺|² − |ψ|²):
    /// conserves discrete mass and energy exactly when η = 0.
    Midpoint,
    /// Half nonlinear substep, Crank–Nicolson linear substep, half nonlinear substep.
    Strang,
}

#[derive(Debug, Clone, Copy)]
pub struct SolverTolerance {
    pub rel: f64,
    pub max_iterations: usize,
}

impl Default for SolverTolerance {
    fn default() -> Self {
        Self {
            rel: 1e-14,
            max_iterations: 60,
        }
    }
}

/// Exact solution of iψ_t + |ψ|^{2σ₁}ψ + iη|ψ|^{2σ₂}ψ = 0 over time h.
pub fn nonlinear_substep(z: C64, h: f64, params: &ModelParams) -> C64 {
    let a0 = z.norm();
    if a0 == 0.0 {
        return z;
    }
    let s1 = params.sigma1;
    let s2 = params.sigma2;
    let eta = params.eta;
    let p0 = a0.powf(2.0 * s1);
    let (ratio, phase) = if eta == 0.0 {
        (1.0, h * p0)
    } else if s2 == 0.0 {
        let decay = (-eta * h).exp();
        let e2 = (-2.0 * s1 * eta * h).exp_m1();
        (decay, -p0 * e2 / (2.0 * s1 * eta))
    } else {
        let k = 2.0 * s2 * eta * a0.powf(2.0 * s2);
        let kh = k * h;
        let ratio = (1.0 + kh).powf(-1.0 / (2.0 * s2));
        let q = s1 / s2;
        let phase = if kh < 1e-8 {
            p0 * h * (1.0 - 0.5 * q * kh)
        } else if (1.0 - q).abs() < 1e-12 {
            p0 * kh.ln_1p() / k
        } else {
            p0 * ((1.0 - q) * kh.ln_1p()).exp_m1() / (k * (1.0 - q))
        };
        (ratio, phase)
    };
    z * ratio * C64::from_polar(1.0, phase)
}

fn tridiagonal(op: &FvOperator, dt: f64) -> (Vec<C64>, Vec<C64>, Vec<C64>) {
    let n = op.len();
    let c = I * (0.5 * dt);
    let mut lower = vec![C64::new(0.0, 0.0); n];
    let mut diag: Vec<C64> = op.volumes.iter().map(|&v| C64::new(v, 0.0)).collect();
    let mut upper = vec![C64::new(0.0, 0.0); n];
    for j in 0..n - 1 {
        let k = op.kappa[j];
        diag[j] += c * k;
        diag[j + 1] += c * k;
        upper[j] = -c * k;
        lower[j + 1] = -c * k;
    }
    (lower, diag, upper)
}

/// (V − i dt/2 S)ψ.
fn explicit_half(op: &FvOperator, psi: &[C64], dt: f64) -> Vec<C64> {
    let s = op.stiffness(psi);
    let c = I * (0.5 * dt);
    psi.iter()
        .zip(&op.volumes)
        .zip(&s)
        .map(|((&z, &v), &sz)| z * v - c * sz)
        .collect()
}

/// Crank–Nicolson for iψ_t + Δ_hψ = 0.
pub fn linear_substep(op: &FvOperator, psi: &[C64], dt: f64) -> Vec<C64> {
    let (lo, di, up) = tridiagonal(op, dt);
    let mut rhs = explicit_half(op, psi, dt);
    solve_tridiagonal(&lo, &di, &up, &mut rhs);
    rhs
}

/// Averaged nonlinearity G(s₀, s₁) = (F(s₁) − F(s₀))/(s₁ − s₀), F(s) = s^{σ+1}/(σ+1).
#[inline]
fn averaged_power(s0: f64, s1: f64, sigma: f64) -> f64 {
    let ds = s1 - s0;
    let m = s0.max(s1);
    if ds.abs() <= 1e-7 * m {
        // divided difference of F to O(ds²)
        let a = 0.5 * (s0 + s1);
        a.powf(sigma) * (1.0 + sigma * (sigma - 1.0) * ds * ds / (24.0 * a * a).max(f64::MIN_POSITIVE))
    } else {
        (s1.powf(sigma + 1.0) - s0.powf(sigma + 1.0)) / ((sigma + 1.0) * ds)
    }
}

/// One step of the conservative midpoint scheme; returns (ψ⁺, iterations).
pub fn midpoint_step(
    op: &FvOperator,
    psi: &[C64],
    dt: f64,
    params: &ModelParams,
    tol: SolverTolerance,
) -> Result<(Vec<C64>, usize)> {
    let n = op.len();
    let (lo, di, up) = tridiagonal(op, dt);
    let base = explicit_half(op, psi, dt);
    let scale = psi.iter().map(|z| z.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let mut next = psi.to_vec();
    let mut rhs = vec![C64::new(0.0, 0.0); n];
    for it in 1..=tol.max_iterations {
        for j in 0..n {
            let m = 0.5 * (psi[j] + next[j]);
            let s0 = psi[j].norm_sqr();
            let s1 = next[j].norm_sqr();
            let g = averaged_power(s0, s1, params.sigma1);
            let h = if params.eta == 0.0 {
                0.0
            } else {
                params.eta * damping_weight(m.norm_sqr(), params.sigma2)
            };
            rhs[j] = base[j] + I * dt * op.volumes[j] * (C64::new(g, h) * m);
        }
        solve_tridiagonal(&lo, &di, &up, &mut rhs);
        let mut change = 0.0_f64;
        for j in 0..n {
            let c = (rhs[j] - next[j]).norm();
            if !(c <= change) {
                change = c;
            }
        }
        std::mem::swap(&mut next, &mut rhs);
        if !change.is_finite() {
            break;
        }
        if change <= tol.rel * scale {
            return Ok((next, it));
        }
    }
    Err(Error::NoConvergence {
        solver: "midpoint fixed point",
        iterations: tol.max_iterations,
        residual: f64::NAN,
    })
}

pub fn strang_step(op: &FvOperator, psi: &[C64], dt: f64, params: &ModelParams) -> Vec<C64> {
    let half: Vec<C64> = psi.iter().map(|&z| nonlinear_substep(z, 0.5 * dt, params)).collect();
    let lin = linear_substep(op, &half, dt);
    lin.into_iter().map(|z| nonlinear_substep(z, 0.5 * dt, params)).collect()
}

pub fn advance(
    scheme: Scheme,
    op: &FvOperator,
    psi: &[C64],
    dt: f64,
    params: &ModelParams,
    tol: SolverTolerance,
) -> Result<(Vec<C64>, usize)> {
    match scheme {
        Scheme::Midpoint => midpoint_step(op, psi, dt, params, tol),
        Scheme::Strang => Ok((strang_step(op, psi, dt, params), 0)),
    }
}
