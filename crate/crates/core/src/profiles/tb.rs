//! First-order correction U = P_b + s_c T_b of the collapse core.
//!
//! In gauge-free variables Q_b = e^{−ibr²/4}U the profile equation on the
//! plateau reads
//! ΔU − U + b²r²/4 U − ib s_c U + |U|^{2σ}U + i s_c β(∂_bU − ir²/4 U) = 0.
//! With T = A + iB the O(s_c) part splits into L₊A = −β r²/4 P and
//! L₋B + β∂_bP = bP; β is fixed by solvability against ker L₋ = span{P}.

use nalgebra::{DMatrix, DVector};

use super::assemble::{gauge, Correction, Fidelity, SolitonProfile};
use super::bvp;
use super::pb::{continue_pb, PbSolution};
use crate::error::{Error, Result};
use crate::field::{ComplexField, C64, I};
use crate::grid::RadialGrid;
use crate::params::ModelParams;

/// Step of the centered differences in b.
pub const DB: f64 = 1e-3;

/// Inverse power iteration for the smallest singular value of `m`.
fn sigma_min(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    let lu = m.clone().lu();
    let lut = m.transpose().lu();
    let mut x = DVector::from_element(n, 1.0 / (n as f64).sqrt());
    let mut est = f64::INFINITY;
    for _ in 0..30 {
        let Some(y) = lu.solve(&x) else { return 0.0 };
        let Some(z) = lut.solve(&y) else { return 0.0 };
        let nz = z.norm();
        if !(nz.is_finite() && nz > 0.0) {
            return 0.0;
        }
        let next = 1.0 / nz.sqrt();
        x = z / nz;
        if (next - est).abs() <= 1e-6 * next {
            return next;
        }
        est = next;
    }
    est
}

struct Linear {
    t: Vec<C64>,
    beta: f64,
    sigma_min: f64,
}

fn l_diag(grid: &RadialGrid, p: &[f64], b: f64, sigma: f64, power_factor: f64) -> Vec<f64> {
    grid.nodes
        .iter()
        .zip(p)
        .map(|(&r, &v)| -1.0 + b * b * r * r / 4.0 + power_factor * v.abs().powf(2.0 * sigma))
        .collect()
}

/// Solves the O(s_c) system on `grid` for P = `p` at parameter `b`.
/// B and β come from the bordered system [[L₋, ∂_bP], [wᵀP, 0]](B, β) = (bP, 0);
/// then L₊A₁ = −r²/4 P and A = βA₁.
fn linear_correction(
    grid: &RadialGrid,
    p: &[f64],
    dp: &[f64],
    b: f64,
    sigma: f64,
    with_smin: bool,
) -> Result<Linear> {
    let n = grid.len();
    let diag = l_diag(grid, p, b, sigma, 1.0);
    let mut m = DMatrix::<f64>::zeros(n + 1, n + 1);
    let mut rhs = DVector::<f64>::zeros(n + 1);
    for i in 0..n - 1 {
        let row = grid.lap_row(i);
        for k in 0..row.len {
            m[(i, row.start + k)] += row.c[k];
        }
        m[(i, i)] += diag[i];
        m[(i, n)] = dp[i];
        rhs[i] = b * p[i];
    }
    m[(n - 1, n - 1)] = 1.0;
    for j in 0..n {
        m[(n, j)] = grid.weights[j] * p[j];
    }
    let smin = if with_smin {
        let s = sigma_min(&m);
        if !(s > 1e-12 * m.amax()) {
            return Err(Error::NearSingular {
                context: "bordered L- system for the imaginary part of T_b".into(),
                sigma_min: s,
            });
        }
        s
    } else {
        f64::NAN
    };
    let sol = m.lu().solve(&rhs).ok_or_else(|| Error::Singular {
        context: "bordered L- system".into(),
    })?;
    let beta = sol[n];

    let lu = bvp::factor_operator(grid, &l_diag(grid, p, b, sigma, 2.0 * sigma + 1.0))?;
    let mut a1: Vec<f64> = grid.nodes.iter().zip(p).map(|(&r, &v)| -r * r / 4.0 * v).collect();
    a1[n - 1] = 0.0;
    lu.solve_in_place(&mut a1);

    let t: Vec<C64> = a1
        .iter()
        .zip(sol.iter())
        .map(|(&a, &bb)| C64::new(beta * a, bb))
        .collect();
    if let Some(i) = t.iter().position(|z| !(z.re.is_finite() && z.im.is_finite())) {
        return Err(Error::NonFinite { index: i, r: grid.nodes[i] });
    }
    Ok(Linear { t, beta, sigma_min: smin })
}

/// P at b + k·DB, k ∈ {−2, …, 2}, sampled on the grid of `pb`.
fn ladder(pb: &PbSolution, params: &ModelParams) -> Result<Vec<Vec<f64>>> {
    let mut out = Vec::with_capacity(5);
    for k in [-2.0, -1.0, 0.0, 1.0, 2.0] {
        if k == 0.0 {
            out.push(pb.p.clone());
        } else {
            let m = continue_pb(params, pb, pb.b + k * DB)?;
            out.push(pb.grid.nodes.iter().map(|&r| m.at(r)).collect());
        }
    }
    Ok(out)
}

fn centered(plus: &[f64], minus: &[f64]) -> Vec<f64> {
    plus.iter().zip(minus).map(|(a, b)| (a - b) / (2.0 * DB)).collect()
}

/// ∂_bP on the grid of `pb` by centered differences in b.
pub fn dp_db(pb: &PbSolution, params: &ModelParams) -> Result<Vec<f64>> {
    let m = continue_pb(params, pb, pb.b - DB)?;
    let p = continue_pb(params, pb, pb.b + DB)?;
    Ok(pb
        .grid
        .nodes
        .iter()
        .map(|&r| (p.at(r) - m.at(r)) / (2.0 * DB))
        .collect())
}

/// Upgrades a zeroth-order profile to first order: solves for T_b and β and
/// fills in ∂_bQ_b. ∂_bT comes from the same solve at b ± DB on the grid of
/// the central P_b.
pub fn solve_tb(profile: &SolitonProfile) -> Result<SolitonProfile> {
    let params = &profile.params;
    if profile.fidelity != Fidelity::ZerothOrder {
        return Err(Error::InvalidParameter("T_b expects a zeroth-order profile".into()));
    }
    if !(params.s_c > 0.0) {
        return Err(Error::InvalidParameter(format!("s_c = {} must be positive", params.s_c)));
    }
    let s_c = params.s_c;
    let pb = &profile.pb;
    let g = &pb.grid;
    let b = pb.b;
    let sigma = pb.sigma;
    let ps = ladder(pb, params)?;
    let dp = centered(&ps[3], &ps[1]);
    let pp = g.integrate_by(|i| pb.p[i] * pb.p[i]);
    let pdp = g.integrate_by(|i| pb.p[i] * dp[i]);
    if !(pdp.abs() > 1e-12 * pp) {
        return Err(Error::Solvability(format!(
            "(P, d_b P) = {pdp:.3e} vanishes; beta is undefined at b = {b}"
        )));
    }
    let beta_solvability = b * pp / pdp;

    let centre = linear_correction(g, &pb.p, &dp, b, sigma, true)?;
    let dp_m = centered(&ps[2], &ps[0]);
    let dp_p = centered(&ps[4], &ps[2]);
    let lo = linear_correction(g, &ps[1], &dp_m, b - DB, sigma, false)?;
    let hi = linear_correction(g, &ps[3], &dp_p, b + DB, sigma, false)?;
    let du_db: Vec<C64> = dp
        .iter()
        .zip(hi.t.iter().zip(&lo.t))
        .map(|(&d, (&tp, &tm))| C64::new(d, 0.0) + (tp - tm) * (s_c / (2.0 * DB)))
        .collect();

    let t_r = g.d_dr(&centre.t);
    let mut out = profile.clone();
    out.correction = Some(Correction {
        t: centre.t,
        t_r,
        beta: centre.beta,
        beta_solvability,
        sigma_min: centre.sigma_min,
        dp_db: dp,
        du_db,
    });
    out.fidelity = Fidelity::FirstOrder;
    let c = out.correction.as_ref().unwrap();
    let tb = out.grid.sample(|r| {
        if r < g.r_max {
            g.interpolate(&c.t, r)
        } else {
            C64::new(0.0, 0.0)
        }
    });
    out.tb = Some(ComplexField::new(out.grid.clone(), tb)?);
    out.dq_db = Some(dq_db(&out));
    Ok(out)
}

/// ∂_bQ_b = e^{−ibr²/4}[(−ir²/4)φU + (r/b)φ'U + φ∂_bU]. The radii scale like
/// 1/b, so φ_b(r) = φ_1(br) and ∂_bφ_b = rφ_b'/b.
pub fn dq_db(profile: &SolitonProfile) -> ComplexField {
    let b = profile.b;
    let pg = &profile.pb.grid;
    let s = profile.grid.sample(|r| {
        let (phi, phi_r, _) = profile.phi_at(r);
        let (u, _) = profile.core_at(r);
        let dbu = match (&profile.correction, profile.fidelity) {
            _ if r >= pg.r_max => C64::new(0.0, 0.0),
            (Some(c), Fidelity::FirstOrder) => pg.interpolate(&c.du_db, r),
            (Some(c), Fidelity::ZerothOrder) => C64::new(pg.interpolate(&c.dp_db, r), 0.0),
            (None, _) => C64::new(0.0, 0.0),
        };
        gauge(b, r) * (u * phi * (-I * (r * r / 4.0)) + u * (r / b * phi_r) + dbu * phi)
    });
    ComplexField::new(profile.grid.clone(), s).expect("finite profile samples")
}

/// Max-norm over r ≤ R_b⁻ (P_b grid) of the residual of the gauge-free profile
/// equation. Zeroth order: U = P without the drift term. First order:
/// U = P + s_cT with its β and ∂_bU = ∂_bP + s_c∂_bT.
pub fn interior_residual(profile: &SolitonProfile, fidelity: Fidelity) -> Result<f64> {
    let pb = &profile.pb;
    let g = &pb.grid;
    let b = pb.b;
    let s_c = profile.params.s_c;
    let zero = vec![C64::new(0.0, 0.0); g.len()];
    let (u, beta, v): (Vec<C64>, f64, &[C64]) = match fidelity {
        Fidelity::ZerothOrder => (pb.p.iter().map(|&p| C64::new(p, 0.0)).collect(), 0.0, &zero),
        Fidelity::FirstOrder => {
            let c = profile
                .correction
                .as_ref()
                .ok_or_else(|| Error::InvalidParameter("profile has no T_b correction".into()))?;
            let u = pb.p.iter().zip(&c.t).map(|(&p, &t)| t * s_c + p).collect();
            (u, c.beta, c.du_db.as_slice())
        }
    };
    let lap = g.laplacian(&u);
    let mut worst = 0.0_f64;
    for (i, &r) in g.nodes.iter().enumerate().take(g.len() - 1) {
        if r > profile.r_b_minus {
            break;
        }
        let uu = u[i];
        let res = lap[i] + uu * (-1.0 + b * b * r * r / 4.0) - I * (b * s_c) * uu
            + uu * uu.norm().powf(2.0 * pb.sigma)
            + I * (s_c * beta) * (v[i] - I * (r * r / 4.0) * uu);
        worst = worst.max(res.norm());
    }
    Ok(worst)
}
