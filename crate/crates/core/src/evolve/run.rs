//! Driver: adaptive steps, audit records and stop conditions.

use std::collections::VecDeque;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::scheme::{advance, FvOperator, Scheme, SolverTolerance};
use crate::error::{Error, Result};
use crate::field::{ComplexField, C64};
use crate::grid::RadialGrid;
use crate::params::ModelParams;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DtRule {
    Fixed { dt: f64 },
    /// dt = safety·dτ·λ², λ from the gradient proxy.
    LambdaSquared { dtau: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvolveConfig {
    pub scheme: Scheme,
    pub dt_rule: DtRule,
    pub safety: f64,
    pub max_steps: usize,
    pub t_end: Option<f64>,
    /// Blow-up needs ‖∇ψ‖ ≥ gradient_growth·‖∇ψ₀‖ ...
    pub gradient_growth: f64,
    /// ... and λ ≤ lambda_floor·λ(0).
    pub lambda_floor: f64,
    pub audit_stride: usize,
    /// Observer call cadence in steps, 0 disables.
    pub checkpoint_stride: usize,
    pub buffer_capacity: usize,
    pub solver_tol: f64,
    pub solver_max_iterations: usize,
    /// |ψ(r_max)|/max|ψ| above this marks the domain as too small.
    pub far_field_tol: f64,
}

impl Default for EvolveConfig {
    fn default() -> Self {
        Self {
            scheme: Scheme::Midpoint,
            dt_rule: DtRule::LambdaSquared { dtau: 2e-3 },
            safety: 1.0,
            max_steps: 2_000_000,
            t_end: None,
            gradient_growth: 1e3,
            lambda_floor: 1e-3,
            audit_stride: 10,
            checkpoint_stride: 0,
            buffer_capacity: 200_000,
            solver_tol: 1e-14,
            solver_max_iterations: 60,
            far_field_tol: 1e-8,
        }
    }
}

impl EvolveConfig {
    pub fn validate(&self) -> Result<()> {
        let dt_ok = match self.dt_rule {
            DtRule::Fixed { dt } => dt > 0.0 && dt.is_finite(),
            DtRule::LambdaSquared { dtau } => dtau > 0.0 && dtau.is_finite(),
        };
        if !dt_ok || !(self.safety > 0.0) {
            return Err(Error::InvalidParameter("time step must be positive".into()));
        }
        if self.audit_stride == 0 || self.buffer_capacity == 0 {
            return Err(Error::InvalidParameter("audit stride and buffer capacity must be positive".into()));
        }
        if !(self.gradient_growth > 1.0) || !(self.lambda_floor > 0.0 && self.lambda_floor < 1.0) {
            return Err(Error::InvalidParameter("blow-up thresholds out of range".into()));
        }
        if let Some(t) = self.t_end {
            if !(t > 0.0) {
                return Err(Error::InvalidParameter("t_end must be positive".into()));
            }
        }
        Ok(())
    }

    fn tolerance(&self) -> SolverTolerance {
        SolverTolerance {
            rel: self.solver_tol,
            max_iterations: self.solver_max_iterations,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SimState {
    pub t: f64,
    /// Rescaled time ∫dt/λ².
    pub tau: f64,
    pub psi: ComplexField,
    pub dt: f64,
    pub step_index: usize,
    pub lambda_proxy: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AuditRecord {
    pub step: usize,
    pub t: f64,
    pub tau: f64,
    pub dt: f64,
    pub mass: f64,
    pub energy: f64,
    /// Always zero for radial data.
    pub momentum: f64,
    pub grad_norm: f64,
    pub lambda_proxy: f64,
    pub mass_rate: f64,
    pub energy_rate: f64,
    /// ∫ rate dt since t = 0, trapezoid per step.
    pub mass_flux: f64,
    pub energy_flux: f64,
    /// |ΔM − ∫R_M dt| over the interval since the previous record.
    pub mass_residual: f64,
    pub energy_residual: f64,
    pub mass_residual_rel: f64,
    pub energy_residual_rel: f64,
    pub iterations: usize,
    pub far_field: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Outcome {
    Blowup { step: usize, t: f64 },
    Horizon { t: f64 },
    MaxSteps { step: usize },
    /// Non-finite values or a failed implicit solve; the last good state is kept.
    BlowupSuspected { step: usize, t: f64, detail: String },
}

impl Outcome {
    pub fn is_blowup(&self) -> bool {
        matches!(self, Outcome::Blowup { .. })
    }

    pub fn label(&self) -> &'static str {
        match self {
            Outcome::Blowup { .. } => "blowup",
            Outcome::Horizon { .. } => "horizon",
            Outcome::MaxSteps { .. } => "max-steps",
            Outcome::BlowupSuspected { .. } => "blowup-suspected",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Snapshot {
    pub step: usize,
    pub t: f64,
    pub lambda_proxy: f64,
    pub psi: ComplexField,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub params: ModelParams,
    pub config: EvolveConfig,
    pub records: Vec<AuditRecord>,
    /// Records lost to the ring buffer.
    pub dropped_records: u64,
    pub outcome: Outcome,
    pub final_state: SimState,
    pub grad0: f64,
    pub lambda0: f64,
    pub far_field_max: f64,
}

impl Trajectory {
    pub fn far_field_ok(&self) -> bool {
        self.far_field_max <= self.config.far_field_tol
    }

    pub fn series(&self) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let t = self.records.iter().map(|r| r.t).collect();
        let g = self.records.iter().map(|r| r.grad_norm).collect();
        let l = self.records.iter().map(|r| r.lambda_proxy).collect();
        (t, g, l)
    }

    pub fn focusing_decades(&self) -> f64 {
        self.records
            .last()
            .map(|r| (self.lambda0 / r.lambda_proxy).log10())
            .unwrap_or(0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AuditSummary {
    pub intervals: usize,
    pub max_mass_residual_rel: f64,
    pub max_energy_residual_rel: f64,
    pub max_momentum: f64,
    /// |M(T) − M(0) − ∫R_M| and the energy analogue over the whole run.
    pub total_mass_residual: f64,
    pub total_energy_residual: f64,
}

/// Per-interval and cumulative balance residuals of a trajectory.
pub fn balance_audit(traj: &Trajectory) -> Result<AuditSummary> {
    let recs = &traj.records;
    if recs.len() < 2 {
        return Err(Error::InsufficientSamples { have: recs.len(), need: 2 });
    }
    let skip = 1;
    let f = |g: fn(&AuditRecord) -> f64| recs[skip..].iter().map(g).fold(0.0, f64::max);
    let first = &recs[0];
    let last = recs.last().unwrap();
    Ok(AuditSummary {
        intervals: recs.len() - 1,
        max_mass_residual_rel: f(|r| r.mass_residual_rel),
        max_energy_residual_rel: f(|r| r.energy_residual_rel),
        max_momentum: recs.iter().map(|r| r.momentum.abs()).fold(0.0, f64::max),
        total_mass_residual: ((last.mass - first.mass) - (last.mass_flux - first.mass_flux)).abs(),
        total_energy_residual: ((last.energy - first.energy) - (last.energy_flux - first.energy_flux)).abs(),
    })
}

struct Probe {
    mass: f64,
    energy: f64,
    grad: f64,
    mass_rate: f64,
    energy_rate: f64,
    far: f64,
}

fn probe(op: &FvOperator, psi: &[C64], p: &ModelParams) -> Probe {
    let kin = op.kinetic(psi);
    let peak = psi.iter().map(|z| z.norm()).fold(0.0, f64::max);
    Probe {
        mass: op.mass(psi),
        energy: kin - op.potential(psi, p.sigma1),
        grad: (2.0 * kin).sqrt(),
        mass_rate: op.mass_rate(psi, p),
        energy_rate: op.energy_rate(psi, p),
        far: if peak > 0.0 { psi[psi.len() - 1].norm() / peak } else { 0.0 },
    }
}

/// Scale proxy (‖∇Q‖/‖∇ψ‖)^{1/(1−s_c)}.
pub fn lambda_proxy(grad_q: f64, grad: f64, s_c: f64) -> f64 {
    (grad_q / grad).powf(1.0 / (1.0 - s_c))
}

fn time_step(cfg: &EvolveConfig, lambda: f64) -> f64 {
    match cfg.dt_rule {
        DtRule::Fixed { dt } => cfg.safety * dt,
        DtRule::LambdaSquared { dtau } => cfg.safety * dtau * lambda * lambda,
    }
}

/// One step from `state`; retries with halved dt when the implicit solve stalls.
pub fn step(
    state: &SimState,
    op: &FvOperator,
    params: &ModelParams,
    config: &EvolveConfig,
    grad_q: f64,
) -> Result<(SimState, usize)> {
    let mut dt = time_step(config, state.lambda_proxy);
    if let Some(t_end) = config.t_end {
        dt = dt.min(t_end - state.t);
    }
    let mut last_err = None;
    for _ in 0..4 {
        match advance(config.scheme, op, state.psi.samples(), dt, params, config.tolerance()) {
            Ok((next, its)) => {
                if let Some(j) = next.iter().position(|z| !z.re.is_finite() || !z.im.is_finite()) {
                    return Err(Error::NonFinite {
                        index: j,
                        r: state.psi.grid().nodes[j],
                    });
                }
                let grad = op.grad_norm(&next);
                let lam = lambda_proxy(grad_q, grad, params.s_c);
                let psi = ComplexField::from_parts(state.psi.grid().clone(), next);
                return Ok((
                    SimState {
                        t: state.t + dt,
                        tau: state.tau + dt / (state.lambda_proxy * state.lambda_proxy),
                        psi,
                        dt,
                        step_index: state.step_index + 1,
                        lambda_proxy: lam,
                    },
                    its,
                ));
            }
            Err(e) => {
                last_err = Some(e);
                dt *= 0.5;
            }
        }
    }
    Err(last_err.unwrap())
}

pub fn run(initial: &ComplexField, params: &ModelParams, config: &EvolveConfig, grad_q: f64) -> Result<Trajectory> {
    run_with(initial, params, config, grad_q, |_| {})
}

/// Evolves `initial`; `observer` sees the state every `checkpoint_stride` steps
/// and at the end.
pub fn run_with<F: FnMut(&SimState)>(
    initial: &ComplexField,
    params: &ModelParams,
    config: &EvolveConfig,
    grad_q: f64,
    mut observer: F,
) -> Result<Trajectory> {
    config.validate()?;
    if initial.grid().d != params.d {
        return Err(Error::GridMismatch);
    }
    if let Some(j) = initial.samples().iter().position(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NonFinite {
            index: j,
            r: initial.grid().nodes[j],
        });
    }
    let grid: &Arc<RadialGrid> = initial.grid();
    let op = FvOperator::new(grid);
    let p0 = probe(&op, initial.samples(), params);
    if !(p0.grad > 0.0) || !(grad_q > 0.0) {
        return Err(Error::InvalidParameter("initial gradient must be positive".into()));
    }
    let lambda0 = lambda_proxy(grad_q, p0.grad, params.s_c);
    let mut state = SimState {
        t: 0.0,
        tau: 0.0,
        psi: initial.clone(),
        dt: 0.0,
        step_index: 0,
        lambda_proxy: lambda0,
    };
    let mut records: VecDeque<AuditRecord> = VecDeque::new();
    let mut dropped = 0u64;
    let mut push = |rec: AuditRecord, records: &mut VecDeque<AuditRecord>| {
        if records.len() == config.buffer_capacity {
            records.pop_front();
            dropped += 1;
        }
        records.push_back(rec);
    };
    let mut last = AuditRecord {
        step: 0,
        t: 0.0,
        tau: 0.0,
        dt: 0.0,
        mass: p0.mass,
        energy: p0.energy,
        momentum: 0.0,
        grad_norm: p0.grad,
        lambda_proxy: lambda0,
        mass_rate: p0.mass_rate,
        energy_rate: p0.energy_rate,
        mass_flux: 0.0,
        energy_flux: 0.0,
        mass_residual: 0.0,
        energy_residual: 0.0,
        mass_residual_rel: 0.0,
        energy_residual_rel: 0.0,
        iterations: 0,
        far_field: p0.far,
    };
    push(last, &mut records);
    let mut far_max = p0.far;
    let (mut mass_flux, mut energy_flux) = (0.0, 0.0);
    let (mut prev_mr, mut prev_er) = (p0.mass_rate, p0.energy_rate);
    let mut iterations = 0usize;
    let outcome = loop {
        if let Some(t_end) = config.t_end {
            if state.t >= t_end * (1.0 - 1e-14) {
                break Outcome::Horizon { t: state.t };
            }
        }
        if state.step_index >= config.max_steps {
            break Outcome::MaxSteps { step: state.step_index };
        }
        let (next, its) = match step(&state, &op, params, config, grad_q) {
            Ok(s) => s,
            Err(e) => {
                break Outcome::BlowupSuspected {
                    step: state.step_index,
                    t: state.t,
                    detail: e.to_string(),
                }
            }
        };
        iterations = iterations.max(its);
        let pr = probe(&op, next.psi.samples(), params);
        mass_flux += 0.5 * next.dt * (prev_mr + pr.mass_rate);
        energy_flux += 0.5 * next.dt * (prev_er + pr.energy_rate);
        prev_mr = pr.mass_rate;
        prev_er = pr.energy_rate;
        state = next;
        let fired = pr.grad >= config.gradient_growth * p0.grad && state.lambda_proxy <= config.lambda_floor * lambda0;
        let horizon = config.t_end.is_some_and(|t| state.t >= t * (1.0 - 1e-14));
        if state.step_index % config.audit_stride == 0 || fired || horizon || state.step_index >= config.max_steps {
            let dm = (pr.mass - last.mass) - (mass_flux - last.mass_flux);
            let de = (pr.energy - last.energy) - (energy_flux - last.energy_flux);
            let e_scale = pr.energy.abs().max(0.5 * pr.grad * pr.grad).max(last.energy.abs().max(0.5 * last.grad_norm * last.grad_norm));
            let rec = AuditRecord {
                step: state.step_index,
                t: state.t,
                tau: state.tau,
                dt: state.dt,
                mass: pr.mass,
                energy: pr.energy,
                momentum: 0.0,
                grad_norm: pr.grad,
                lambda_proxy: state.lambda_proxy,
                mass_rate: pr.mass_rate,
                energy_rate: pr.energy_rate,
                mass_flux,
                energy_flux,
                mass_residual: dm.abs(),
                energy_residual: de.abs(),
                mass_residual_rel: dm.abs() / last.mass.max(f64::MIN_POSITIVE),
                energy_residual_rel: de.abs() / e_scale,
                iterations,
                far_field: pr.far,
            };
            iterations = 0;
            far_max = far_max.max(pr.far);
            push(rec, &mut records);
            last = rec;
        }
        if config.checkpoint_stride > 0 && state.step_index % config.checkpoint_stride == 0 {
            observer(&state);
        }
        if fired {
            break Outcome::Blowup {
                step: state.step_index,
                t: state.t,
            };
        }
    };
    observer(&state);
    Ok(Trajectory {
        params: *params,
        config: config.clone(),
        records: records.into_iter().collect(),
        dropped_records: dropped,
        outcome,
        final_state: state,
        grad0: p0.grad,
        lambda0,
        far_field_max: far_max,
    })
}
