//! Outgoing radiation Δζ − ζ + ib(d/2·ζ + rζ') = Ψ̃_b and its flux constant.
//!
//! Second-order differences on a uniform far grid. At r_max the log-derivative
//! of the slow branch, ζ'/ζ = −d/(2r) − i/(br), is imposed through a ghost node.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::banded::BandMatrix;
use crate::cutoff::Plateau;
use crate::error::{Error, Result};
use crate::field::{ComplexField, C64, I};
use crate::fit::{fit_line, mean_and_rel_std, median};
use crate::grid::RadialGrid;
use crate::params::sphere_area;
use crate::profiles::assemble::{psi_tilde_on, SolitonProfile};

/// Pivot ratio above which the solve is rejected.
const MAX_PIVOT_RATIO: f64 = 1e13;
/// Relative standard deviation allowed for r^d|ζ|² over the window.
pub const PLATEAU_TOL: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OuterCondition {
    /// ζ' = (−d/(2r) − i/(br))ζ at r_max.
    Robin,
}

#[derive(Debug, Clone)]
pub struct Radiation {
    pub b: f64,
    pub zeta: ComplexField,
    pub gamma_b: f64,
    pub plateau_window: (f64, f64),
    /// Relative standard deviation of r^d|ζ|² over the window.
    pub plateau_rel_std: f64,
    pub bc_kind: OuterCondition,
    /// Max-norm of the discrete equation residual over the max-norm of Ψ̃_b.
    pub residual: f64,
    pub pivot_ratio: f64,
}

/// Far grid reaching max(3R_b², 1.5·max(R_b², 4/b²)) with spacing that keeps
/// about twelve nodes per wavelength of the fast branch e^{−ibr²/2} at r_max.
pub fn far_grid(d: usize, b: f64, r_b: f64) -> Result<Arc<RadialGrid>> {
    let r_max = (3.0 * r_b * r_b).max(1.5 * (r_b * r_b).max(4.0 / (b * b)));
    let h = 0.02_f64.min(0.5 / (b * r_max));
    let n = (r_max / h).ceil() as usize + 1;
    Ok(Arc::new(RadialGrid::uniform(d, n, r_max)?))
}

fn operator(grid: &RadialGrid, b: f64) -> Result<BandMatrix<C64>> {
    let n = grid.len();
    let h = grid.r_max / (n - 1) as f64;
    let d = grid.d as f64;
    let h2 = h * h;
    let mut m = BandMatrix::<C64>::zeros(n, 1, 1);
    let diag = C64::new(-2.0 / h2 - 1.0, b * d / 2.0);
    // r = 0: ζ'(0) = 0, Δζ → d·ζ''.
    m.add(0, 0, C64::new(-2.0 * d / h2 - 1.0, b * d / 2.0));
    m.add(0, 1, C64::new(2.0 * d / h2, 0.0));
    for i in 1..n {
        let r = grid.nodes[i];
        let lo = C64::new(1.0 / h2 - (d - 1.0) / (2.0 * r * h), -b * r / (2.0 * h));
        let hi = C64::new(1.0 / h2 + (d - 1.0) / (2.0 * r * h), b * r / (2.0 * h));
        m.add(i, i, diag);
        m.add(i, i - 1, lo);
        if i + 1 < n {
            m.add(i, i + 1, hi);
        } else {
            // ghost ζ_{n} = ζ_{n−2} + 2hκζ_{n−1}
            let kappa = C64::new(-d / (2.0 * r), -1.0 / (b * r));
            m.add(i, i - 1, hi);
            m.add(i, i, hi * kappa * (2.0 * h));
        }
    }
    Ok(m)
}

/// Solves for ζ_b with source `source` sampled on `grid` (uniform).
pub fn solve_radiation_with(b: f64, source: &ComplexField, window: (f64, f64)) -> Result<Radiation> {
    if !(b > 0.0) {
        return Err(Error::InvalidParameter(format!("b = {b} must be positive")));
    }
    let grid = source.grid().clone();
    if window.1 > grid.r_max {
        return Err(Error::MissingPlateau(format!(
            "window [{:.1}, {:.1}] beyond r_max = {:.1}",
            window.0, window.1, grid.r_max
        )));
    }
    let m = operator(&grid, b)?;
    let a = m.clone();
    let lu = m.factor()?;
    let pivot_ratio = lu.pivot_ratio();
    if pivot_ratio > MAX_PIVOT_RATIO {
        return Err(Error::NearSingular {
            context: format!("radiation operator, pivot ratio {pivot_ratio:.3e}"),
            sigma_min: 1.0 / pivot_ratio,
        });
    }
    let rhs = source.samples().to_vec();
    let z = lu.solve(&rhs);
    let res = a
        .matvec(&z)
        .iter()
        .zip(&rhs)
        .map(|(u, v)| (u - v).norm())
        .fold(0.0, f64::max);
    let scale = source.max_abs();
    let zeta = ComplexField::new(grid.clone(), z)?;
    let (gamma_b, plateau_rel_std) = if scale == 0.0 {
        (0.0, 0.0)
    } else {
        plateau(&zeta, window)?
    };
    Ok(Radiation {
        b,
        zeta,
        gamma_b,
        plateau_window: window,
        plateau_rel_std,
        bc_kind: OuterCondition::Robin,
        residual: if scale == 0.0 { res } else { res / scale },
        pivot_ratio,
    })
}

fn plateau(zeta: &ComplexField, window: (f64, f64)) -> Result<(f64, f64)> {
    let d = zeta.grid().d as i32;
    let vals: Vec<f64> = zeta
        .grid()
        .nodes
        .iter()
        .zip(zeta.samples())
        .filter(|(&r, _)| r >= window.0 && r <= window.1)
        .map(|(&r, z)| r.powi(d) * z.norm_sqr())
        .collect();
    let g = median(&vals).ok_or_else(|| Error::MissingPlateau("empty extraction window".into()))?;
    let (_, rel) = mean_and_rel_std(&vals);
    Ok((g, rel))
}

/// ζ_b for the profile's Ψ̃_b on the default far grid, window [R_b², 2R_b²].
pub fn solve_radiation(profile: &SolitonProfile) -> Result<Radiation> {
    let grid = far_grid(profile.params.d, profile.b, profile.r_b)?;
    let source = psi_tilde_on(profile, grid);
    let r2 = profile.r_b * profile.r_b;
    solve_radiation_with(profile.b, &source, (r2, 2.0 * r2))
}

/// Γ_b with the plateau-quality check.
pub fn extract_gamma(rad: &Radiation) -> Result<f64> {
    if rad.gamma_b > 0.0 && rad.plateau_rel_std > PLATEAU_TOL {
        return Err(Error::MissingPlateau(format!(
            "relative deviation {:.3} over [{:.1}, {:.1}] exceeds {PLATEAU_TOL}",
            rad.plateau_rel_std, rad.plateau_window.0, rad.plateau_window.1
        )));
    }
    Ok(rad.gamma_b)
}

impl Radiation {
    /// ‖∇ζ_b‖²_{L²} over the far grid.
    pub fn grad_norm_sq(&self) -> f64 {
        let dz = self.zeta.d_dr();
        let g = self.zeta.grid();
        g.integrate_by(|i| dz.samples()[i].norm_sqr())
    }

    /// ∫_{r≤R}|ζ|² at every node.
    pub fn cumulative_mass(&self) -> Vec<f64> {
        let g = self.zeta.grid();
        let s = self.zeta.samples();
        let mut out = Vec::with_capacity(g.len());
        let area = sphere_area(g.d);
        let mut acc = 0.0;
        out.push(0.0);
        for i in 1..g.len() {
            let f = |j: usize| area * g.nodes[j].powi(g.d as i32 - 1) * s[j].norm_sqr();
            acc += 0.5 * (f(i - 1) + f(i)) * (g.nodes[i] - g.nodes[i - 1]);
            out.push(acc);
        }
        out
    }

    /// Slope of ∫_{r≤R}|ζ|² against ln R over the extraction window.
    pub fn log_mass_slope(&self) -> Result<f64> {
        let g = self.zeta.grid();
        let cm = self.cumulative_mass();
        let (x, y): (Vec<f64>, Vec<f64>) = g
            .nodes
            .iter()
            .zip(&cm)
            .filter(|(&r, _)| r >= self.plateau_window.0 && r <= self.plateau_window.1)
            .map(|(&r, &m)| (r.ln(), m))
            .unzip();
        Ok(fit_line(&x, &y)?.slope)
    }
}

#[derive(Debug, Clone)]
pub struct LocalizedRadiation {
    pub a: f64,
    pub zeta_tilde: ComplexField,
    /// (Δφ_A)ζ + 2φ_A'ζ' + ib r φ_A' ζ.
    pub forcing: ComplexField,
}

/// A = max(Γ_b^{−a}, 2R_b).
pub fn default_radius(gamma_b: f64, a: f64, r_b: f64) -> f64 {
    gamma_b.powf(-a).max(2.0 * r_b)
}

/// ζ̃_b = φ_A ζ_b with φ_A = 1 on [0, A], 0 beyond 2A.
pub fn localize_radiation(rad: &Radiation, a: f64, r_b: f64) -> Result<LocalizedRadiation> {
    if a < 2.0 * r_b {
        return Err(Error::RadiusTooSmall { a, required: 2.0 * r_b });
    }
    let grid = rad.zeta.grid().clone();
    if 2.0 * a > grid.r_max {
        return Err(Error::InvalidParameter(format!(
            "2A = {} beyond far-grid r_max = {}",
            2.0 * a,
            grid.r_max
        )));
    }
    let cut = Plateau::new(a, 2.0 * a);
    let d = grid.d;
    let dz = rad.zeta.d_dr();
    let b = rad.b;
    let mut zt = Vec::with_capacity(grid.len());
    let mut f = Vec::with_capacity(grid.len());
    for (i, &r) in grid.nodes.iter().enumerate() {
        let z = rad.zeta.samples()[i];
        let (phi, phi_r, _) = cut.eval(r);
        zt.push(z * phi);
        if r <= a || r >= 2.0 * a {
            f.push(C64::new(0.0, 0.0));
        } else {
            let lap = cut.laplacian(r, d);
            f.push(z * lap + dz.samples()[i] * (2.0 * phi_r) + I * b * r * phi_r * z);
        }
    }
    Ok(LocalizedRadiation {
        a,
        zeta_tilde: ComplexField::new(grid.clone(), zt)?,
        forcing: ComplexField::new(grid, f)?,
    })
}

impl LocalizedRadiation {
    pub fn h1_norm_sq(&self) -> f64 {
        let g = self.zeta_tilde.grid();
        let dz = self.zeta_tilde.d_dr();
        g.integrate_by(|i| self.zeta_tilde.samples()[i].norm_sqr() + dz.samples()[i].norm_sqr())
    }
}
