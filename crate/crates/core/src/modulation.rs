//! Modulation decomposition ψ = λ^{−1/σ₁}(Q_b + ξ)(r/λ)e^{iγ}, tracking and
//! the runtime diagnostic ratios built on it.

use std::sync::Arc;

use nalgebra::{Matrix3, Vector3};
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{apply_lambda, real_pair, ComplexField, C64, I};
use crate::fit::fit_line;
use crate::functionals::{energy, grad_norm_sq};
use crate::grid::RadialGrid;
use crate::params::ModelParams;
use crate::profiles::ProfileFamily;

/// Orthogonality tolerance relative to ‖ξ‖‖w‖.
pub const ORTHO_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModulationState {
    pub b: f64,
    pub lambda: f64,
    pub gamma: f64,
    /// Always 0 in radial mode.
    pub x_center: f64,
    pub tau: f64,
}

impl ModulationState {
    pub fn new(b: f64, lambda: f64, gamma: f64) -> Self {
        Self {
            b,
            lambda,
            gamma,
            x_center: 0.0,
            tau: 0.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct DecompositionResult {
    pub state: ModulationState,
    pub xi: ComplexField,
    /// (ξ, |y|²Q_b), (ξ, iΛΛQ_b), (ξ, iΛQ_b), (ξ, yQ_b); the last is 0 for radial fields.
    pub residuals: [f64; 4],
    pub newton_iters: usize,
    pub converged: bool,
}

/// The three radial weights |y|²Q_b, iΛ(ΛQ_b), iΛQ_b.
pub fn orthogonality_weights(q_b: &ComplexField, sigma1: f64) -> [ComplexField; 3] {
    let lq = apply_lambda(q_b, sigma1);
    let llq = apply_lambda(&lq, sigma1);
    [q_b.map(|r, z| z * (r * r)), llq.scale(I), lq.scale(I)]
}

pub fn orthogonality_residuals(xi: &ComplexField, q_b: &ComplexField, sigma1: f64) -> Result<[f64; 4]> {
    let w = orthogonality_weights(q_b, sigma1);
    Ok([
        real_pair(xi, &w[0])?,
        real_pair(xi, &w[1])?,
        real_pair(xi, &w[2])?,
        0.0,
    ])
}

/// λ^{1/σ₁}ψ(λy)e^{−iγ} on `grid`.
pub fn rescale_to_profile(psi: &ComplexField, grid: &Arc<RadialGrid>, lambda: f64, gamma: f64, sigma1: f64) -> ComplexField {
    let amp = C64::from_polar(lambda.powf(1.0 / sigma1), -gamma);
    let same = grid.same_as(psi.grid()) && lambda == 1.0;
    let s = grid
        .nodes
        .iter()
        .enumerate()
        .map(|(j, &y)| amp * if same { psi.samples()[j] } else { psi.at(lambda * y) })
        .collect();
    ComplexField::from_parts(grid.clone(), s)
}

/// ψ = λ^{−1/σ₁}(Q_b + ξ)(r/λ)e^{iγ} on `grid`.
pub fn reconstruct(
    state: &ModulationState,
    xi: &ComplexField,
    family: &ProfileFamily,
    grid: &Arc<RadialGrid>,
) -> Result<ComplexField> {
    let q = family.q_b(state.b)?;
    let v = q.add(xi)?;
    let amp = C64::from_polar(state.lambda.powf(-1.0 / family.params.sigma1), state.gamma);
    let same = grid.same_as(&family.grid) && state.lambda == 1.0;
    let s = grid
        .nodes
        .iter()
        .enumerate()
        .map(|(j, &r)| amp * if same { v.samples()[j] } else { v.at(r / state.lambda) })
        .collect();
    ComplexField::new(grid.clone(), s)
}

struct Eval {
    f: Vector3<f64>,
    xi: ComplexField,
    w: [ComplexField; 3],
    wnorm: [f64; 3],
}

fn evaluate(psi: &ComplexField, family: &ProfileFamily, x: &Vector3<f64>) -> Result<Eval> {
    let sigma = family.params.sigma1;
    let q = family.q_b(x[0])?;
    let v = rescale_to_profile(psi, &family.grid, x[1].exp(), x[2], sigma);
    let xi = v.sub(&q)?;
    let w = orthogonality_weights(&q, sigma);
    let f = Vector3::new(real_pair(&xi, &w[0])?, real_pair(&xi, &w[1])?, real_pair(&xi, &w[2])?);
    let wnorm = [w[0].norm_l2(), w[1].norm_l2(), w[2].norm_l2()];
    Ok(Eval { f, xi, w, wnorm })
}

/// Newton on (b, ln λ, γ); the b column uses the ladder derivative ∂_bQ_b,
/// the others central differences. On divergence
/// the best iterate is returned with `converged = false`.
pub fn decompose(psi: &ComplexField, family: &ProfileFamily, guess: &ModulationState) -> Result<DecompositionResult> {
    if !(guess.lambda > 0.0) {
        return Err(Error::InvalidParameter("lambda guess must be positive".into()));
    }
    if psi.grid().d != family.params.d {
        return Err(Error::GridMismatch);
    }
    let (lo, hi) = family.b_range();
    if !family.contains(guess.b) {
        return Err(Error::OutsideLadder { b: guess.b, lo, hi });
    }
    let tau = guess.tau;
    let mut x = Vector3::new(guess.b, guess.lambda.ln(), guess.gamma);
    let mut cur = evaluate(psi, family, &x)?;
    let mut best = (x, cur.f.norm());
    let h = [0.0, 1e-6, 1e-6];
    let mut iters = 0;
    let mut converged = false;
    let mut prev_dx = 0.0_f64;
    for it in 1..=40 {
        iters = it;
        let mut jac = Matrix3::zeros();
        // b column from the derivative of the same ladder interpolant
        let dq = family.dq_db(x[0])?;
        let dw = orthogonality_weights(&dq, family.params.sigma1);
        for j in 0..3 {
            jac[(j, 0)] = -real_pair(&dq, &cur.w[j])? + real_pair(&cur.xi, &dw[j])?;
        }
        for k in 1..3 {
            let mut xp = x;
            let mut xm = x;
            xp[k] += h[k];
            xm[k] -= h[k];
            let fp = evaluate(psi, family, &xp)?.f;
            let fm = evaluate(psi, family, &xm)?.f;
            jac.set_column(k, &((fp - fm) / (xp[k] - xm[k])));
        }
        let Some(step) = jac.lu().solve(&(-cur.f)) else {
            break;
        };
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..8 {
            let mut xn = x + step * t;
            xn[0] = xn[0].clamp(lo, hi);
            if let Ok(e) = evaluate(psi, family, &xn) {
                if e.f.norm() <= cur.f.norm() * (1.0 - 1e-4 * t) || e.f.norm() < 1e-15 {
                    accepted = Some((xn, e));
                    break;
                }
            }
            t *= 0.5;
        }
        let Some((xn, e)) = accepted else {
            break;
        };
        let dx = (xn - x).abs().max();
        x = xn;
        cur = e;
        if cur.f.norm() < best.1 {
            best = (x, cur.f.norm());
        }
        let xin = cur.xi.norm_l2();
        let ortho = (0..3).all(|k| cur.f[k].abs() <= ORTHO_TOL * xin * cur.wnorm[k]);
        // quadratic-rate estimate of the error left after this step
        let predicted = if prev_dx > 0.0 && dx < 1e-3 && t == 1.0 { dx * dx * dx / (prev_dx * prev_dx) } else { f64::INFINITY };
        prev_dx = dx;
        if ortho || dx < 1e-14 || predicted < 1e-13 {
            converged = true;
            break;
        }
    }
    if !converged && best.0 != x {
        x = best.0;
        cur = evaluate(psi, family, &x)?;
    }
    Ok(DecompositionResult {
        state: ModulationState {
            b: x[0],
            lambda: x[1].exp(),
            gamma: x[2],
            x_center: 0.0,
            tau,
        },
        residuals: [cur.f[0], cur.f[1], cur.f[2], 0.0],
        xi: cur.xi,
        newton_iters: iters,
        converged,
    })
}

/// Exponent s at the midpoint of (s_c, min(dσ₁/(2σ₁+2), dσ₂/(2σ₂+2), ½)).
pub fn hs_exponent(params: &ModelParams) -> Option<f64> {
    let d = params.d as f64;
    let cap = |s: f64| if s > 0.0 { d * s / (2.0 * s + 2.0) } else { f64::INFINITY };
    let hi = cap(params.sigma1).min(cap(params.sigma2)).min(0.5);
    (hi > params.s_c).then(|| 0.5 * (params.s_c + hi))
}

/// ‖|∇|^s f‖² for radial f. d = 1 and 3 use an FFT of the even (d = 1) or
/// odd (r f, d = 3) extension on a uniform resampling; d = 2 returns the
/// interpolation bound ‖f‖^{2(1−s)}‖∇f‖^{2s}.
pub fn hs_norm(f: &ComplexField, s: f64) -> f64 {
    let grid = f.grid();
    match grid.d {
        2 => {
            let m = crate::functionals::mass(f);
            let g = grad_norm_sq(f);
            m.powf(1.0 - s) * g.powf(s)
        }
        d => {
            let n = 8192usize;
            let l = grid.r_max;
            let h = l / n as f64;
            let m = 2 * n;
            let mut buf = vec![C64::new(0.0, 0.0); m];
            for j in 0..n {
                let r = j as f64 * h;
                let v = f.at(r);
                if d == 1 {
                    buf[j] = v;
                    if j > 0 {
                        buf[m - j] = v;
                    }
                } else {
                    let g = v * r;
                    buf[j] = g;
                    if j > 0 {
                        buf[m - j] = -g;
                    }
                }
            }
            FftPlanner::new().plan_fft_forward(m).process(&mut buf);
            let dk = 2.0 * std::f64::consts::PI / (m as f64 * h);
            let mut acc = 0.0;
            for (k, z) in buf.iter().enumerate() {
                let kk = if k <= m / 2 { k as f64 } else { (m - k) as f64 } * dk;
                if kk > 0.0 || s == 0.0 {
                    acc += kk.powf(2.0 * s) * z.norm_sqr();
                }
            }
            let base = h / m as f64 * acc;
            if d == 3 {
                2.0 * std::f64::consts::PI * base
            } else {
                base
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct XiNorms {
    /// ‖∇ξ‖².
    pub grad_sq: f64,
    /// ∫|ξ|²e^{−|y|}.
    pub local: f64,
    pub hs: f64,
}

impl XiNorms {
    pub fn h1_local(&self) -> f64 {
        self.grad_sq + self.local
    }
}

pub fn xi_norms(xi: &ComplexField, s: Option<f64>) -> XiNorms {
    let samples = xi.samples();
    let local = xi.grid().integrate_by(|i| samples[i].norm_sqr() * (-xi.grid().nodes[i]).exp());
    XiNorms {
        grad_sq: grad_norm_sq(xi),
        local,
        hs: s.map(|s| hs_norm(xi, s)).unwrap_or(f64::NAN),
    }
}

/// Γ_b on a few ladder points, interpolated linearly in (1/b, ln Γ_b).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GammaTable {
    pub bs: Vec<f64>,
    pub gammas: Vec<f64>,
}

impl GammaTable {
    pub fn new(bs: Vec<f64>, gammas: Vec<f64>) -> Result<Self> {
        if bs.len() < 2 || bs.len() != gammas.len() || gammas.iter().any(|g| !(*g > 0.0)) {
            return Err(Error::InvalidParameter("gamma table needs ≥ 2 positive entries".into()));
        }
        if bs.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidParameter("gamma table b values must increase".into()));
        }
        Ok(Self { bs, gammas })
    }

    /// Γ_b; outside the table the end segments are extended.
    pub fn at(&self, b: f64) -> f64 {
        let n = self.bs.len();
        let k = self.bs.partition_point(|&x| x < b).clamp(1, n - 1);
        let (x0, x1) = (1.0 / self.bs[k - 1], 1.0 / self.bs[k]);
        let (y0, y1) = (self.gammas[k - 1].ln(), self.gammas[k].ln());
        let x = 1.0 / b;
        (y0 + (y1 - y0) * (x - x0) / (x1 - x0)).exp()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForcingRecord {
    pub lambda: f64,
    /// 2 − 2σ₂/σ₁.
    pub exponent: f64,
    /// ηλ^{2−2σ₂/σ₁}.
    pub eta_eff: f64,
    pub gamma_b: f64,
    /// ηλ^{2−2σ₂/σ₁}/Γ_b².
    pub ratio_gamma_sq: f64,
    /// η⁻¹Γ_b^{σ₁/(σ₁−σ₂)} when σ₂ < σ₁.
    pub threshold_lambda: Option<f64>,
    /// The threshold condition fails (σ₂ < σ₁) or the forcing exceeds Γ_b² (σ₂ = σ₁).
    pub flag: bool,
    /// σ₂ > σ₁: the forcing grows as λ → 0.
    pub diverging: bool,
}

pub fn forcing_monitor(lambda: f64, gamma_b: f64, params: &ModelParams) -> ForcingRecord {
    let (s1, s2, eta) = (params.sigma1, params.sigma2, params.eta);
    let exponent = 2.0 - 2.0 * s2 / s1;
    let eta_eff = eta * lambda.powf(exponent);
    let ratio = eta_eff / (gamma_b * gamma_b);
    let threshold = (s2 < s1 && eta > 0.0).then(|| gamma_b.powf(s1 / (s1 - s2)) / eta);
    let flag = match threshold {
        Some(th) => lambda >= th,
        None => ratio > 1.0,
    };
    ForcingRecord {
        lambda,
        exponent,
        eta_eff,
        gamma_b,
        ratio_gamma_sq: ratio,
        threshold_lambda: threshold,
        flag,
        diverging: s2 > s1,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModulationSample {
    pub t: f64,
    pub tau: f64,
    pub b: f64,
    pub lambda: f64,
    pub gamma: f64,
    pub xi_h1: f64,
    pub xi_local: f64,
    pub xi_hs: f64,
    pub residuals: [f64; 4],
    pub iterations: usize,
    pub converged: bool,
    /// E[ψ] in physical variables.
    pub energy: f64,
    pub forcing: Option<ForcingRecord>,
}

/// Finite-difference rates in the rescaled time s = ∫dt/λ² of the tracked λ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModulationRates {
    pub t: f64,
    pub s: f64,
    pub b_s: f64,
    /// λ_s/λ + b.
    pub lambda_law: f64,
    /// γ_s − 1.
    pub gamma_law: f64,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ModulationSeries {
    pub samples: Vec<ModulationSample>,
    /// Indices (into the input) where the decomposition failed.
    pub gaps: Vec<usize>,
}

impl ModulationSeries {
    pub fn rates(&self) -> Vec<ModulationRates> {
        let v = &self.samples;
        if v.len() < 3 {
            return Vec::new();
        }
        let mut s = vec![0.0; v.len()];
        for k in 1..v.len() {
            let dt = v[k].t - v[k - 1].t;
            s[k] = s[k - 1] + 0.5 * dt * (v[k].lambda.powi(-2) + v[k - 1].lambda.powi(-2));
        }
        (1..v.len() - 1)
            .map(|k| {
                let ds = s[k + 1] - s[k - 1];
                let b_s = (v[k + 1].b - v[k - 1].b) / ds;
                let l_s = (v[k + 1].lambda.ln() - v[k - 1].lambda.ln()) / ds;
                let g_s = (v[k + 1].gamma - v[k - 1].gamma) / ds;
                ModulationRates {
                    t: v[k].t,
                    s: s[k],
                    b_s,
                    lambda_law: l_s + v[k].b,
                    gamma_law: g_s - 1.0,
                }
            })
            .collect()
    }
}

/// Warm-started decomposition of successive states.
pub struct Tracker<'a> {
    pub family: &'a ProfileFamily,
    pub params: ModelParams,
    pub gamma_table: Option<&'a GammaTable>,
    pub hs_s: Option<f64>,
    pub series: ModulationSeries,
    seen: usize,
    last: Option<ModulationState>,
    /// λ/λ_hint at the last success.
    hint_ratio: f64,
}

impl<'a> Tracker<'a> {
    pub fn new(family: &'a ProfileFamily, params: &ModelParams, gamma_table: Option<&'a GammaTable>, start: ModulationState) -> Self {
        Self {
            family,
            params: *params,
            gamma_table,
            hs_s: hs_exponent(params),
            series: ModulationSeries::default(),
            seen: 0,
            last: Some(start),
            hint_ratio: f64::NAN,
        }
    }

    /// Decomposes one state; failures are recorded as gaps.
    pub fn push(&mut self, t: f64, tau: f64, psi: &ComplexField, lambda_hint: f64) -> Option<ModulationSample> {
        let idx = self.seen;
        self.seen += 1;
        let mut guess = self.last.unwrap_or(ModulationState::new(self.family.bs[0], lambda_hint, 0.0));
        if self.hint_ratio.is_finite() && lambda_hint > 0.0 {
            // scale follows the hint; the phase advances by about the rescaled time
            guess.lambda = lambda_hint * self.hint_ratio;
            guess.gamma += tau - guess.tau;
        }
        let (lo, hi) = self.family.b_range();
        guess.b = guess.b.clamp(lo, hi);
        guess.tau = tau;
        let res = match decompose(psi, self.family, &guess) {
            Ok(r) if r.converged => r,
            _ => {
                self.series.gaps.push(idx);
                return None;
            }
        };
        self.last = Some(res.state);
        if lambda_hint > 0.0 {
            self.hint_ratio = res.state.lambda / lambda_hint;
        }
        let norms = xi_norms(&res.xi, self.hs_s);
        let forcing = self
            .gamma_table
            .map(|g| forcing_monitor(res.state.lambda, g.at(res.state.b), &self.params));
        let sample = ModulationSample {
            t,
            tau,
            b: res.state.b,
            lambda: res.state.lambda,
            gamma: res.state.gamma,
            xi_h1: norms.grad_sq,
            xi_local: norms.local,
            xi_hs: norms.hs,
            residuals: res.residuals,
            iterations: res.newton_iters,
            converged: res.converged,
            energy: energy(psi, self.params.sigma1),
            forcing,
        };
        self.series.samples.push(sample);
        Some(sample)
    }
}

/// Tracks a list of (t, τ, ψ) states from an initial guess.
pub fn track(
    states: &[(f64, f64, ComplexField)],
    family: &ProfileFamily,
    params: &ModelParams,
    gamma_table: Option<&GammaTable>,
    start: ModulationState,
) -> ModulationSeries {
    let mut tr = Tracker::new(family, params, gamma_table, start);
    for (t, tau, psi) in states {
        tr.push(*t, *tau, psi, start.lambda);
    }
    tr.series
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LambdaLaw {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub n: usize,
    /// Mean tracked b over the fit window.
    pub b_obs: f64,
    /// slope/(−2b_obs).
    pub ratio_obs: f64,
    pub b_star: f64,
    /// slope/(−2b*).
    pub ratio_star: f64,
    /// slope/(−2), the normalization of λ₀² − 2(1 ± C)t.
    pub ratio_unit: f64,
}

/// λ² against t over the collapsing window λ ≤ λ(0)/10 (everything when the
/// window holds fewer than 20 samples).
pub fn lambda_law_fit(samples: &[ModulationSample], b_star: f64) -> Result<LambdaLaw> {
    if samples.len() < 20 {
        return Err(Error::InsufficientSamples { have: samples.len(), need: 20 });
    }
    let cut = samples[0].lambda / 10.0;
    let mut win: Vec<&ModulationSample> = samples.iter().filter(|s| s.lambda <= cut).collect();
    if win.len() < 20 {
        win = samples.iter().collect();
    }
    if win.windows(2).any(|w| w[1].lambda > w[0].lambda * (1.0 + 1e-9)) {
        return Err(Error::InvalidParameter("lambda is not monotone: left the self-similar regime".into()));
    }
    let x: Vec<f64> = win.iter().map(|s| s.t).collect();
    let y: Vec<f64> = win.iter().map(|s| s.lambda * s.lambda).collect();
    let fit = fit_line(&x, &y)?;
    let b_obs = win.iter().map(|s| s.b).sum::<f64>() / win.len() as f64;
    Ok(LambdaLaw {
        slope: fit.slope,
        intercept: fit.intercept,
        r_squared: fit.r_squared,
        n: fit.n,
        b_obs,
        ratio_obs: fit.slope / (-2.0 * b_obs),
        b_star,
        ratio_star: fit.slope / (-2.0 * b_star),
        ratio_unit: fit.slope / -2.0,
    })
}

/// log₁₀(value/bound) for each diagnostic line; positive means the bound is
/// exceeded. Reported only, never asserted.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapRow {
    pub t: f64,
    pub b: f64,
    pub gamma_b: f64,
    /// s_c against Γ_b^{1−ν⁴}.
    pub b_band_upper: f64,
    /// Γ_b^{1+ν⁴} against s_c.
    pub b_band_lower: f64,
    /// λ against Γ_b^{20}.
    pub lambda: f64,
    /// λ^{2−2s_c}|E| + λ^{1−2s_c}|P| against Γ_b^{3−10ν}.
    pub energy_momentum: f64,
    /// The momentum part alone (exactly 0 for radial data).
    pub momentum: f64,
    /// ‖|∇|^sξ‖² against Γ_b^{1−45ν}.
    pub hs: f64,
    /// ‖∇ξ‖² + ∫|ξ|²e^{−|y|} against Γ_b^{1−10ν}.
    pub h1: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BootstrapReport {
    pub nu: f64,
    pub asserting: bool,
    pub rows: Vec<BootstrapRow>,
    /// Largest log₁₀ ratio per line over the series.
    pub worst: BootstrapRow,
}

fn log10_ratio(value: f64, log10_bound: f64) -> f64 {
    if value == 0.0 {
        f64::NEG_INFINITY
    } else {
        value.abs().log10() - log10_bound
    }
}

pub fn bootstrap_report(series: &ModulationSeries, gamma: &GammaTable, params: &ModelParams, nu: f64) -> BootstrapReport {
    let s_c = params.s_c;
    let rows: Vec<BootstrapRow> = series
        .samples
        .iter()
        .map(|m| {
            let g = gamma.at(m.b);
            let lg = g.log10();
            let em = m.lambda.powf(2.0 - 2.0 * s_c) * m.energy.abs();
            BootstrapRow {
                t: m.t,
                b: m.b,
                gamma_b: g,
                b_band_upper: log10_ratio(s_c, (1.0 - nu.powi(4)) * lg),
                b_band_lower: (1.0 + nu.powi(4)) * lg - s_c.log10(),
                lambda: log10_ratio(m.lambda, 20.0 * lg),
                energy_momentum: log10_ratio(em, (3.0 - 10.0 * nu) * lg),
                momentum: 0.0,
                hs: log10_ratio(m.xi_hs, (1.0 - 45.0 * nu) * lg),
                h1: log10_ratio(m.xi_h1 + m.xi_local, (1.0 - 10.0 * nu) * lg),
            }
        })
        .collect();
    let mut worst = BootstrapRow {
        t: f64::NAN,
        b: f64::NAN,
        gamma_b: f64::NAN,
        b_band_upper: f64::NEG_INFINITY,
        b_band_lower: f64::NEG_INFINITY,
        lambda: f64::NEG_INFINITY,
        energy_momentum: f64::NEG_INFINITY,
        momentum: 0.0,
        hs: f64::NEG_INFINITY,
        h1: f64::NEG_INFINITY,
    };
    for r in &rows {
        worst.b_band_upper = worst.b_band_upper.max(r.b_band_upper);
        worst.b_band_lower = worst.b_band_lower.max(r.b_band_lower);
        worst.lambda = worst.lambda.max(r.lambda);
        worst.energy_momentum = worst.energy_momentum.max(r.energy_momentum);
        worst.hs = worst.hs.max(r.hs);
        worst.h1 = worst.h1.max(r.h1);
    }
    BootstrapReport {
        nu,
        asserting: false,
        rows,
        worst,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Spacing;
    use crate::profiles::{build_family, FamilySpec};

    fn family() -> ProfileFamily {
        let p = ModelParams::new(1, 2.2, 2.2, 0.0, 0.1).unwrap();
        let g = Arc::new(RadialGrid::new(1, 4096, 40.0, Spacing::Sinh { core: 4.0 }).unwrap());
        let spec = FamilySpec {
            b_lo: 0.25,
            b_hi: 0.35,
            ..Default::default()
        };
        build_family(&p, &spec, g).unwrap()
    }

    /// Rescaled member on the grid whose nodes are λ times the family nodes.
    fn scaled_member(f: &ProfileFamily, b: f64, lambda: f64, gamma: f64) -> ComplexField {
        let g = &f.grid;
        let sg = Arc::new(
            RadialGrid::new(
                1,
                g.len(),
                g.r_max * lambda,
                match g.spacing {
                    Spacing::Sinh { core } => Spacing::Sinh { core: core * lambda },
                    s => s,
                },
            )
            .unwrap(),
        );
        let q = f.q_b(b).unwrap();
        let amp = C64::from_polar(lambda.powf(-1.0 / f.params.sigma1), gamma);
        ComplexField::new(sg, q.samples().iter().map(|z| z * amp).collect()).unwrap()
    }

    #[test]
    fn exact_member_round_trip() {
        let f = family();
        let psi = scaled_member(&f, 0.3, 0.7, 1.2);
        let guess = ModulationState::new(0.3 * 1.1, 0.7 * 0.9, 1.2 + 0.1);
        let r = decompose(&psi, &f, &guess).unwrap();
        assert!(r.converged);
        assert!((r.state.b - 0.3).abs() < 1e-10, "{:?}", r.state);
        assert!((r.state.lambda - 0.7).abs() < 1e-10);
        assert!((r.state.gamma - 1.2).abs() < 1e-10);
        assert!(r.xi.norm_l2() < 1e-10, "{}", r.xi.norm_l2());
    }

    #[test]
    fn gauge_periodicity() {
        let f = family();
        let psi = scaled_member(&f, 0.3, 0.7, 1.2);
        let a = decompose(&psi, &f, &ModulationState::new(0.3, 0.7, 1.2)).unwrap();
        let b = decompose(&psi, &f, &ModulationState::new(0.3, 0.7, 1.2 + 2.0 * std::f64::consts::PI)).unwrap();
        assert!((a.state.b - b.state.b).abs() < 1e-12);
        assert!((a.state.lambda - b.state.lambda).abs() < 1e-12);
        let dg = (b.state.gamma - a.state.gamma) - 2.0 * std::f64::consts::PI;
        assert!(dg.abs() < 1e-10);
    }

    #[test]
    fn zero_remainder_has_zero_residuals() {
        let f = family();
        let q = f.q_b(0.3).unwrap();
        let r = orthogonality_residuals(&ComplexField::zeros(f.grid.clone()), &q, 2.2).unwrap();
        assert_eq!(r, [0.0; 4]);
    }

    #[test]
    fn hs_norm_endpoints() {
        for d in [1usize, 3] {
            let g = Arc::new(RadialGrid::new(d, 2048, 20.0, Spacing::Sinh { core: 2.0 }).unwrap());
            let f = ComplexField::from_fn(g, |r| C64::new((-r * r / 2.0).exp(), 0.0)).unwrap();
            let m = crate::functionals::mass(&f);
            let gsq = grad_norm_sq(&f);
            assert!((hs_norm(&f, 0.0) / m - 1.0).abs() < 1e-8, "d={d}");
            assert!((hs_norm(&f, 1.0) / gsq - 1.0).abs() < 1e-6, "d={d}");
            let mid = hs_norm(&f, 0.5);
            assert!(mid <= m.sqrt() * gsq.sqrt() * (1.0 + 1e-9));
        }
    }

    #[test]
    fn forcing_exponents() {
        let eq = ModelParams::new(1, 2.2, 2.2, 0.1, 0.1).unwrap();
        let a = forcing_monitor(1e-3, 1e-3, &eq);
        let b = forcing_monitor(1e-6, 1e-3, &eq);
        assert_eq!(a.exponent, 0.0);
        assert_eq!(a.eta_eff, b.eta_eff);
        let lt = ModelParams::new(1, 2.2, 1.8, 1.0, 0.1).unwrap();
        let c = forcing_monitor(1e-12, 1e-3, &lt);
        assert!(c.eta_eff < forcing_monitor(1e-6, 1e-3, &lt).eta_eff);
        assert!(c.threshold_lambda.is_some());
        let gt = ModelParams::new(1, 2.2, 2.6, 1.0, 0.1).unwrap();
        let d = forcing_monitor(1e-9, 1e-3, &gt);
        assert!(d.diverging && d.eta_eff > forcing_monitor(1e-3, 1e-3, &gt).eta_eff);
    }

    #[test]
    fn lambda_law_synthetic() {
        let samples: Vec<ModulationSample> = (0..50)
            .map(|k| {
                let t = k as f64 * 0.03;
                ModulationSample {
                    t,
                    tau: 0.0,
                    b: 0.3,
                    lambda: (1.0 - 0.6 * t).sqrt(),
                    gamma: 0.0,
                    xi_h1: 0.0,
                    xi_local: 0.0,
                    xi_hs: 0.0,
                    residuals: [0.0; 4],
                    iterations: 0,
                    converged: true,
                    energy: 0.0,
                    forcing: None,
                }
            })
            .collect();
        let law = lambda_law_fit(&samples, 1.0).unwrap();
        assert!((law.slope + 0.6).abs() < 1e-12);
        assert!((law.r_squared - 1.0).abs() < 1e-12);
        assert!((law.ratio_obs - 1.0).abs() < 1e-12);
    }
}
