use std::sync::Arc;

use serde::Serialize;

use super::bvp;
use crate::error::{Error, Result};
use crate::grid::RadialGrid;
use crate::params::ModelParams;

/// Positive radial solution of ΔQ − Q + Q^{2σ+1} = 0.
#[derive(Debug, Clone)]
pub struct GroundState {
    pub params: ModelParams,
    pub grid: Arc<RadialGrid>,
    pub samples: Vec<f64>,
    pub peak: f64,
    pub residual: f64,
    pub report: ShapeReport,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ShapeReport {
    pub positive: bool,
    pub decreasing: bool,
    /// |Q(r_max)| relative to Q(0).
    pub tail_ratio: f64,
    /// Largest d ln Q / dr over the decaying range.
    pub tail_slope: f64,
}

/// ((σ+1) sech²(σr))^{1/(2σ)}, the one-dimensional ground state.
pub fn closed_form_1d(sigma: f64, r: f64) -> f64 {
    let s = 1.0 / (sigma * r).cosh();
    ((sigma + 1.0) * s * s).powf(1.0 / (2.0 * sigma))
}

fn rhs(d: usize, sigma: f64, r: f64, y: f64, yp: f64) -> f64 {
    let damp = if r > 0.0 { (d as f64 - 1.0) / r * yp } else { 0.0 };
    -damp + y - bvp::power_term(y, sigma)
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Shot {
    Over,
    Under,
}

/// Integrates the shooting ODE from Q(0) = α. Returns the outcome and the
/// trajectory (r, y, y') up to the first event.
fn shoot(d: usize, sigma: f64, alpha: f64, r_end: f64, hs: f64) -> (Shot, Vec<(f64, f64, f64)>) {
    let c = (alpha - alpha.powf(2.0 * sigma + 1.0)) / (2.0 * d as f64);
    let mut r = hs;
    let mut y = alpha + c * hs * hs;
    let mut yp = 2.0 * c * hs;
    let mut path = vec![(0.0, alpha, 0.0), (r, y, yp)];
    while r < r_end {
        let f = |r: f64, y: f64, yp: f64| (yp, rhs(d, sigma, r, y, yp));
        let (k1y, k1p) = f(r, y, yp);
        let (k2y, k2p) = f(r + hs / 2.0, y + hs / 2.0 * k1y, yp + hs / 2.0 * k1p);
        let (k3y, k3p) = f(r + hs / 2.0, y + hs / 2.0 * k2y, yp + hs / 2.0 * k2p);
        let (k4y, k4p) = f(r + hs, y + hs * k3y, yp + hs * k3p);
        y += hs / 6.0 * (k1y + 2.0 * k2y + 2.0 * k3y + k4y);
        yp += hs / 6.0 * (k1p + 2.0 * k2p + 2.0 * k3p + k4p);
        r += hs;
        path.push((r, y, yp));
        if y < 0.0 {
            return (Shot::Over, path);
        }
        if yp > 0.0 && r > 0.5 {
            return (Shot::Under, path);
        }
    }
    (Shot::Under, path)
}

/// Shooting estimate of Q(0), then the sampled shooting profile continued by
/// an exponential tail as a Newton initial guess.
fn shooting_guess(d: usize, sigma: f64, grid: &RadialGrid) -> Result<(f64, Vec<f64>)> {
    let hs = 2e-3;
    let r_end = grid.r_max.min(40.0);
    let mut lo = 1.0;
    let mut hi = 2.0;
    let mut guard = 0;
    while shoot(d, sigma, hi, r_end, hs).0 == Shot::Under {
        lo = hi;
        hi *= 2.0;
        guard += 1;
        if guard > 40 {
            return Err(Error::ShootingBracket {
                lo,
                hi,
                reason: "no overshoot found".into(),
            });
        }
    }
    if shoot(d, sigma, lo, r_end, hs).0 == Shot::Over {
        return Err(Error::ShootingBracket {
            lo,
            hi,
            reason: "lower end overshoots".into(),
        });
    }
    for _ in 0..200 {
        if hi - lo <= 1e-15 * hi {
            break;
        }
        let mid = 0.5 * (lo + hi);
        match shoot(d, sigma, mid, r_end, hs).0 {
            Shot::Over => hi = mid,
            Shot::Under => lo = mid,
        }
    }
    if hi - lo > 1e-10 * hi {
        return Err(Error::NoConvergence {
            solver: "ground-state shooting",
            iterations: 200,
            residual: hi - lo,
        });
    }
    let alpha = 0.5 * (lo + hi);
    let (_, path) = shoot(d, sigma, lo, r_end, hs);
    // Keep the trajectory while it is still a faithful decaying profile.
    let cut = path
        .iter()
        .position(|&(_, y, yp)| y < 1e-6 * alpha || (yp > 0.0))
        .filter(|&k| k > 1)
        .unwrap_or(path.len() - 1);
    let (rc, yc, _) = path[cut];
    let guess = grid.sample(|r| {
        if r <= rc {
            let k = ((r / hs).floor() as usize).min(cut.saturating_sub(1));
            let (r0, y0, p0) = path[k];
            let (r1, y1, p1) = path[k + 1];
            let t = (r - r0) / (r1 - r0);
            let w = r1 - r0;
            let t2 = t * t;
            let t3 = t2 * t;
            (2.0 * t3 - 3.0 * t2 + 1.0) * y0
                + (t3 - 2.0 * t2 + t) * w * p0
                + (-2.0 * t3 + 3.0 * t2) * y1
                + (t3 - t2) * w * p1
        } else {
            let decay = (-(r - rc)).exp() * (rc / r).powf((d as f64 - 1.0) / 2.0);
            yc.max(0.0) * decay
        }
    });
    Ok((alpha, guess))
}

pub fn shape_report(grid: &RadialGrid, q: &[f64]) -> ShapeReport {
    let peak = q[0];
    let live = q.iter().position(|&v| v < 1e-12 * peak).unwrap_or(q.len());
    let positive = q[..live].iter().all(|&v| v > 0.0);
    let decreasing = q[..live].windows(2).all(|w| w[1] < w[0]);
    let slope_range: Vec<usize> = (1..live.saturating_sub(1))
        .filter(|&i| grid.nodes[i] >= 3.0 && q[i] > 1e-10 * peak)
        .collect();
    let dq = grid.d_dr(q);
    let tail_slope = slope_range
        .iter()
        .map(|&i| dq[i] / q[i])
        .fold(f64::NEG_INFINITY, f64::max);
    ShapeReport {
        positive,
        decreasing,
        tail_ratio: q[q.len() - 1].abs() / peak,
        tail_slope,
    }
}

pub fn solve_ground_state(params: &ModelParams, grid: Arc<RadialGrid>) -> Result<GroundState> {
    let d = params.d;
    let sigma = params.sigma1;
    if grid.d != d {
        return Err(Error::GridMismatch);
    }
    if d >= 3 && sigma >= 2.0 / (d as f64 - 2.0) {
        return Err(Error::InvalidParameter(format!(
            "no ground state for sigma1 = {sigma} >= 2/(d-2) in d = {d}"
        )));
    }
    let (_alpha, guess) = shooting_guess(d, sigma, &grid)?;
    let potential = vec![-1.0; grid.len()];
    let scale = guess[0].max(1.0);
    let out = bvp::newton(&grid, &potential, sigma, guess, 1e-12 * scale, 60)?;
    let samples = out.u;
    let peak = samples[0];
    if !(peak > 0.5) {
        return Err(Error::NoConvergence {
            solver: "ground-state Newton (collapsed to the trivial branch)",
            iterations: out.iterations,
            residual: out.residual,
        });
    }
    let report = shape_report(&grid, &samples);
    Ok(GroundState {
        params: *params,
        grid,
        samples,
        peak,
        residual: out.residual,
        report,
    })
}

impl GroundState {
    pub fn mass(&self) -> f64 {
        self.grid.integrate_by(|i| self.samples[i] * self.samples[i])
    }

    pub fn grad_norm_sq(&self) -> f64 {
        let dq = self.grid.d_dr(&self.samples);
        self.grid.integrate_by(|i| dq[i] * dq[i])
    }

    pub fn at(&self, r: f64) -> f64 {
        self.grid.interpolate(&self.samples, r)
    }

    pub fn to_field(&self) -> crate::field::ComplexField {
        crate::field::ComplexField::from_real(self.grid.clone(), &self.samples)
            .expect("ground state samples are finite")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Spacing;

    fn grid(d: usize) -> Arc<RadialGrid> {
        Arc::new(RadialGrid::new(d, 4096, 40.0, Spacing::Sinh { core: 4.0 }).unwrap())
    }

    #[test]
    fn one_dimensional_closed_forms() {
        for sigma in [1.0, 2.0] {
            let p = ModelParams::new(1, sigma, sigma, 0.0, 0.1).unwrap();
            let gs = solve_ground_state(&p, grid(1)).unwrap();
            let err = gs
                .grid
                .nodes
                .iter()
                .zip(&gs.samples)
                .filter(|(r, _)| **r <= 15.0)
                .map(|(&r, &q)| (q - closed_form_1d(sigma, r)).abs())
                .fold(0.0, f64::max);
            assert!(err < 1e-6, "sigma={sigma}: {err}");
            assert!(gs.residual <= 1e-8 * gs.peak);
            assert!(gs.report.positive && gs.report.decreasing);
            assert!(gs.report.tail_ratio < 1e-10);
        }
    }

    #[test]
    fn soliton_mass_is_four() {
        let p = ModelParams::new(1, 1.0, 1.0, 0.0, 0.1).unwrap();
        let gs = solve_ground_state(&p, grid(1)).unwrap();
        assert!((gs.mass() - 4.0).abs() < 1e-8, "{}", gs.mass());
        assert!((gs.peak - 2.0_f64.sqrt()).abs() < 1e-8);
    }

    #[test]
    fn higher_dimensional_ground_states_converge() {
        for (d, sigma) in [(2usize, 1.0), (3, 1.0), (3, 0.7)] {
            let p = ModelParams::new(d, sigma, sigma, 0.0, 0.1).unwrap();
            let gs = solve_ground_state(&p, grid(d)).unwrap();
            assert!(gs.residual <= 1e-8 * gs.peak, "d={d}");
            assert!(gs.report.positive && gs.report.decreasing, "d={d}");
        }
        // Townes soliton peak in 2D cubic NLS.
        let p = ModelParams::new(2, 1.0, 1.0, 0.0, 0.1).unwrap();
        let gs = solve_ground_state(&p, grid(2)).unwrap();
        assert!((gs.peak - 2.206_200_864).abs() < 1e-6, "{}", gs.peak);
    }

    #[test]
    fn energy_critical_rejected() {
        let p = ModelParams::new(3, 2.0, 2.0, 0.0, 0.1).unwrap();
        assert!(solve_ground_state(&p, grid(3)).is_err());
    }
}
