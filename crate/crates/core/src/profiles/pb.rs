use std::sync::Arc;

use super::bvp;
use super::ground_state::solve_ground_state;
use crate::error::{Error, Result};
use crate::grid::{RadialGrid, Spacing};
use crate::params::ModelParams;

/// Beyond this radius P_b is below 1e-30 of its peak, so the Dirichlet
/// boundary is placed at min(R_b, R_CAP).
pub const R_CAP: f64 = 80.0;

const MAX_DB: f64 = 0.05;

/// Smallest admissible ball: below one decay length of Q the Dirichlet wall,
/// not the ground-state core, shapes the solution.
pub const MIN_RADIUS: f64 = 1.0;

/// Solution of (−Δ + 1 − b²r²/4)P = P^{2σ+1} on [0, R_b], P(R_b) = 0, on a
/// dedicated grid spanning the ball.
#[derive(Debug, Clone)]
pub struct PbSolution {
    pub b: f64,
    pub rho: f64,
    pub r_b: f64,
    pub r_b_minus: f64,
    pub sigma: f64,
    pub grid: Arc<RadialGrid>,
    pub p: Vec<f64>,
    pub p_r: Vec<f64>,
    /// ΔP, read off from the equation.
    pub p_lap: Vec<f64>,
    pub residual: f64,
    pub continuation_steps: usize,
    /// Peak of the ground state the continuation started from.
    pub q_peak: f64,
}

pub fn radii(b: f64, rho: f64) -> (f64, f64) {
    let r_b = 2.0 / b * (1.0 - rho).sqrt();
    (r_b, (1.0 - rho).sqrt() * r_b)
}

fn pb_grid(d: usize, n: usize, b: f64, rho: f64) -> Result<Arc<RadialGrid>> {
    let r_solve = if b > 0.0 { radii(b, rho).0.min(R_CAP) } else { R_CAP };
    let spacing = if r_solve <= 8.0 {
        Spacing::Uniform
    } else {
        Spacing::Sinh { core: 4.0 }
    };
    Ok(Arc::new(RadialGrid::new(d, n, r_solve, spacing)?))
}

fn potential(grid: &RadialGrid, b: f64) -> Vec<f64> {
    grid.nodes.iter().map(|&r| -(1.0 - b * b * r * r / 4.0)).collect()
}

fn finish(
    params: &ModelParams,
    b: f64,
    rho: f64,
    grid: Arc<RadialGrid>,
    p: Vec<f64>,
    residual: f64,
    steps: usize,
) -> PbSolution {
    let sigma = params.sigma1;
    let p_r = grid.d_dr(&p);
    let p_lap = grid
        .nodes
        .iter()
        .zip(&p)
        .map(|(&r, &v)| (1.0 - b * b * r * r / 4.0) * v - bvp::power_term(v, sigma))
        .collect();
    let (r_b, r_b_minus) = if b > 0.0 {
        radii(b, rho)
    } else {
        (f64::INFINITY, f64::INFINITY)
    };
    PbSolution {
        b,
        rho,
        r_b,
        r_b_minus,
        sigma,
        grid,
        p,
        p_r,
        p_lap,
        residual,
        continuation_steps: steps,
        q_peak: f64::NAN,
    }
}

fn check_branch(sol: &PbSolution, q0: f64) -> Result<()> {
    let n = sol.p.len();
    if let Some(i) = sol.p[..n - 1].iter().position(|&v| v <= 0.0) {
        return Err(Error::PositivityLoss {
            b: sol.b,
            detail: format!("P_b({:.4}) = {:.3e} <= 0", sol.grid.nodes[i], sol.p[i]),
        });
    }
    if sol.p[0] > 2.0 * q0 {
        return Err(Error::PositivityLoss {
            b: sol.b,
            detail: format!(
                "P_b(0) = {:.4} left the ground-state branch (Q(0) = {:.4}); R_b = {:.3} is below the validity window",
                sol.p[0], q0, sol.r_b
            ),
        });
    }
    Ok(())
}

/// One Newton solve at `b`, warm-started from `prev` (interpolated onto the new
/// ball).
fn step_to(params: &ModelParams, prev: &PbSolution, b: f64, rho: f64) -> Result<PbSolution> {
    let grid = pb_grid(params.d, prev.grid.len(), b, rho)?;
    let guess: Vec<f64> = grid
        .nodes
        .iter()
        .map(|&r| prev.grid.interpolate(&prev.p, r))
        .collect();
    let pot = potential(&grid, b);
    let tol = 1e-12 * prev.p[0].max(1.0);
    let out = bvp::newton(&grid, &pot, params.sigma1, guess, tol, 40)?;
    let mut sol = finish(params, b, rho, grid, out.u, out.residual, 1);
    sol.q_peak = prev.q_peak;
    Ok(sol)
}

/// The b = 0 member: the ground state with a Dirichlet wall at R_CAP.
pub fn ground_member(params: &ModelParams, rho: f64, n: usize) -> Result<PbSolution> {
    let grid = pb_grid(params.d, n, 0.0, rho)?;
    let gs = solve_ground_state(params, grid.clone())?;
    let mut sol = finish(params, 0.0, rho, grid, gs.samples, gs.residual, 0);
    sol.q_peak = gs.peak;
    Ok(sol)
}

/// Continues from `start` to `b` in steps of at most 0.05 in b, halving the
/// step on Newton failure.
pub fn continue_pb(params: &ModelParams, start: &PbSolution, b: f64) -> Result<PbSolution> {
    let rho = start.rho;
    let q0 = start.q_peak;
    let mut cur = start.clone();
    let mut steps = 0;
    let mut db = (b - cur.b).abs().min(MAX_DB).max(1e-12);
    let dir = (b - cur.b).signum();
    while (b - cur.b).abs() > 1e-15 {
        let next_b = if (b - cur.b).abs() <= db { b } else { cur.b + dir * db };
        match step_to(params, &cur, next_b, rho) {
            Ok(sol) => {
                check_branch(&sol, q0)?;
                cur = sol;
                steps += 1;
                db = (db * 1.5).min(MAX_DB);
            }
            Err(e @ Error::PositivityLoss { .. }) => return Err(e),
            Err(e) => {
                db *= 0.5;
                if db < 1e-6 {
                    let residual = match e {
                        Error::NoConvergence { residual, .. } => residual,
                        _ => f64::NAN,
                    };
                    return Err(Error::ContinuationFailed {
                        b: next_b,
                        step: steps,
                        residual,
                    });
                }
            }
        }
    }
    cur.continuation_steps = start.continuation_steps + steps;
    Ok(cur)
}

/// Solves for P_b by continuation from the ground state. `n` is the node count
/// of the grid spanning [0, min(R_b, R_CAP)].
pub fn solve_pb(params: &ModelParams, b: f64, rho: f64, n: usize) -> Result<PbSolution> {
    if !(b.is_finite() && b > 0.0) {
        return Err(Error::InvalidParameter(format!("b = {b} must be positive")));
    }
    if !(rho > 0.0 && rho < 1.0) {
        return Err(Error::InvalidParameter(format!("rho = {rho} not in (0, 1)")));
    }
    let (r_b, _) = radii(b, rho);
    if r_b < MIN_RADIUS {
        return Err(Error::PositivityLoss {
            b,
            detail: format!(
                "R_b = {r_b:.3} < {MIN_RADIUS}: the ball cannot hold a positive ground-state core"
            ),
        });
    }
    let start = ground_member(params, rho, n)?;
    continue_pb(params, &start, b)
}

impl PbSolution {
    pub fn at(&self, r: f64) -> f64 {
        if r >= self.grid.r_max {
            return 0.0;
        }
        self.grid.interpolate(&self.p, r)
    }

    pub fn dr_at(&self, r: f64) -> f64 {
        if r >= self.grid.r_max {
            return 0.0;
        }
        self.grid.interpolate(&self.p_r, r)
    }

    pub fn lap_at(&self, r: f64) -> f64 {
        if r >= self.grid.r_max {
            return 0.0;
        }
        self.grid.interpolate(&self.p_lap, r)
    }

    /// Max-norm of the discrete BVP residual, recomputed from the samples.
    pub fn bvp_residual(&self) -> f64 {
        let pot = potential(&self.grid, self.b);
        bvp::interior_norm(&bvp::residual(&self.grid, &pot, self.sigma, &self.p))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profiles::ground_state::closed_form_1d;

    fn params() -> ModelParams {
        ModelParams::new(1, 2.2, 2.2, 0.0, 0.1).unwrap()
    }

    #[test]
    fn small_b_matches_ground_state() {
        let p = params();
        let sol = solve_pb(&p, 1e-4, 0.02, 2048).unwrap();
        let q0 = ground_member(&p, 0.02, 2048).unwrap();
        let err = sol
            .grid
            .nodes
            .iter()
            .zip(&sol.p)
            .map(|(&r, &v)| (v - q0.at(r)).abs())
            .fold(0.0, f64::max);
        assert!(err <= 1e-3 * q0.p[0], "{err}");
    }

    #[test]
    fn ground_member_matches_closed_form() {
        let p = ModelParams::new(1, 2.0, 2.0, 0.0, 0.1).unwrap();
        let g = ground_member(&p, 0.02, 2048).unwrap();
        let err = g
            .grid
            .nodes
            .iter()
            .zip(&g.p)
            .filter(|(r, _)| **r < 15.0)
            .map(|(&r, &v)| (v - closed_form_1d(2.0, r)).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-6, "{err}");
    }

    #[test]
    fn moderate_b_close_to_ground_state_peak() {
        let p = params();
        let sol = solve_pb(&p, 0.3, 0.02, 1024).unwrap();
        let q0 = ground_member(&p, 0.02, 1024).unwrap().p[0];
        assert!(((sol.p[0] - q0) / q0).abs() < 0.05, "{} vs {}", sol.p[0], q0);
        assert!(sol.bvp_residual() <= 1e-8);
        assert_eq!(sol.p[sol.p.len() - 1], 0.0);
        assert!((sol.grid.r_max - sol.r_b).abs() < 1e-12);
    }

    #[test]
    fn absurd_b_loses_positivity() {
        let p = params();
        let err = solve_pb(&p, 2.5, 0.02, 512).unwrap_err();
        assert!(matches!(err, Error::PositivityLoss { .. }), "{err:?}");
    }
}
