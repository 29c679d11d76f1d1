//! Experiment configuration, single runs and parameter sweeps, with every
//! artifact written under one run directory.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::evolve::{
    admissibility, balance_audit, detect_blowup, fit_blowup_rate, lambda_sq_linearity, make_initial_data, run_with,
    AdmissibilityReport, AuditRecord, AuditSummary, BlowupDetection, EvolveConfig, FvOperator, Outcome, RateFit,
};
use crate::field::ComplexField;
use crate::fit::LineFit;
use crate::grid::{RadialGrid, Spacing};
use crate::io::{write_field_pair, write_json, write_jsonl, write_records_csv, FieldHeader, FORMAT_VERSION};
use crate::modulation::{
    bootstrap_report, lambda_law_fit, BootstrapReport, GammaTable, LambdaLaw, ModulationRates, ModulationSample,
    ModulationState, Tracker,
};
use crate::params::{derive_params, ModelParams};
use crate::profiles::pb::ground_member;
use crate::profiles::{assemble_profile, build_family, solve_pb, solve_tb, FamilySpec, Fidelity, ProfileFamily, SolitonProfile};
use crate::radiation::solve_radiation;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelBlock {
    pub d: usize,
    pub sigma1: f64,
    pub sigma2: f64,
    pub eta: f64,
    pub delta: f64,
}

impl Default for ModelBlock {
    fn default() -> Self {
        Self { d: 1, sigma1: 2.2, sigma2: 2.2, eta: 0.0, delta: 0.1 }
    }
}

impl ModelBlock {
    pub fn params(&self) -> Result<ModelParams> {
        derive_params(self.d, self.sigma1, self.sigma2, self.eta, self.delta)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LadderBlock {
    pub lo: f64,
    pub hi: f64,
    pub step: f64,
}

impl Default for LadderBlock {
    fn default() -> Self {
        Self { lo: 0.1, hi: 1.2, step: 0.01 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProfileBlock {
    /// Deformation of the initial core.
    pub b0: f64,
    pub rho: f64,
    pub fidelity: Fidelity,
    pub pb_nodes: usize,
    /// Ladder used by the tracker.
    pub ladder: LadderBlock,
}

impl Default for ProfileBlock {
    fn default() -> Self {
        Self { b0: 0.3, rho: 0.02, fidelity: Fidelity::ZerothOrder, pb_nodes: 1024, ladder: LadderBlock::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridBlock {
    pub n: usize,
    pub r_max: f64,
    pub spacing: Spacing,
}

impl GridBlock {
    pub fn simulation() -> Self {
        Self { n: 6144, r_max: 150.0, spacing: Spacing::Sinh { core: 2e-3 } }
    }

    pub fn profile() -> Self {
        Self { n: 4096, r_max: 40.0, spacing: Spacing::Sinh { core: 4.0 } }
    }

    pub fn build(&self, d: usize) -> Result<Arc<RadialGrid>> {
        Ok(Arc::new(RadialGrid::new(d, self.n, self.r_max, self.spacing)?))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitialBlock {
    pub lambda0: f64,
    pub gamma0: f64,
}

impl Default for InitialBlock {
    fn default() -> Self {
        Self { lambda0: 0.5, gamma0: 0.0 }
    }
}

/// Thresholds for blowup / arrested / inconclusive. Gradient growth and the
/// λ floor live in the evolve block.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifyBlock {
    /// Horizon in units of λ₀² when evolve.t_end is unset.
    pub horizon_factor: f64,
    /// A horizon run is arrested if max ‖∇ψ‖/‖∇ψ₀‖ stays below this.
    pub arrest_gradient_bound: f64,
}

impl Default for ClassifyBlock {
    fn default() -> Self {
        Self { horizon_factor: 10.0, arrest_gradient_bound: 10.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrackingBlock {
    pub enabled: bool,
    /// Decompose every `stride` steps.
    pub stride: usize,
    /// b values at which Γ_b is solved for the bootstrap report.
    pub gamma_bs: Vec<f64>,
    pub nu: f64,
}

impl Default for TrackingBlock {
    fn default() -> Self {
        Self { enabled: true, stride: 50, gamma_bs: vec![0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9], nu: 0.1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepParameter {
    Eta,
    Lambda0,
    Sigma2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepBlock {
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
    #[serde(default = "one")]
    pub workers: usize,
    /// λ₀-sweeps only: run every cell at this λ with η rescaled by
    /// (λ₀/λ_ref)^{2−2σ₂/σ₁}, which is the exact scaling image of the cell.
    #[serde(default)]
    pub rescale_reference: Option<f64>,
    /// b at which Γ_b enters the threshold curve; defaults to profile.b0.
    #[serde(default)]
    pub curve_b: Option<f64>,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OutputFormat {
    Json,
    Jsonl,
    Csv,
    Bin,
    Text,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputBlock {
    pub dir: PathBuf,
    pub formats: Vec<OutputFormat>,
}

impl Default for OutputBlock {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("runs/default"),
            formats: vec![OutputFormat::Json, OutputFormat::Jsonl, OutputFormat::Csv, OutputFormat::Bin, OutputFormat::Text],
        }
    }
}

impl OutputBlock {
    pub fn wants(&self, f: OutputFormat) -> bool {
        self.formats.contains(&f)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelBlock,
    pub profile: ProfileBlock,
    /// Simulation grid.
    pub grid: GridBlock,
    pub profile_grid: GridBlock,
    pub initial: InitialBlock,
    pub evolve: EvolveConfig,
    pub classify: ClassifyBlock,
    pub tracking: TrackingBlock,
    pub sweep: Option<SweepBlock>,
    pub output: OutputBlock,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            model: ModelBlock::default(),
            profile: ProfileBlock::default(),
            grid: GridBlock::simulation(),
            profile_grid: GridBlock::profile(),
            initial: InitialBlock::default(),
            evolve: EvolveConfig::default(),
            classify: ClassifyBlock::default(),
            tracking: TrackingBlock::default(),
            sweep: None,
            output: OutputBlock::default(),
        }
    }
}

fn cfg_err<E: std::fmt::Display>(what: &str) -> impl FnOnce(E) -> Error + '_ {
    move |e| Error::Config(format!("{what}: {e}"))
}

impl ExperimentConfig {
    /// Checks every block; nothing runs before this passes.
    pub fn validate(&self) -> Result<()> {
        let params = self.model.params().map_err(cfg_err("model"))?;
        self.grid.build(params.d).map_err(cfg_err("grid"))?;
        self.profile_grid.build(params.d).map_err(cfg_err("profile_grid"))?;
        let p = &self.profile;
        if !(p.b0 >= 0.0 && p.b0.is_finite()) || !(p.rho > 0.0 && p.rho < 1.0) || p.pb_nodes < 64 {
            return Err(Error::Config(format!("profile: b0 = {}, rho = {}, pb_nodes = {}", p.b0, p.rho, p.pb_nodes)));
        }
        let l = &p.ladder;
        if !(l.lo > 0.0 && l.hi > l.lo && l.step > 0.0 && l.step.is_finite()) {
            return Err(Error::Config(format!("profile.ladder [{}, {}] step {}", l.lo, l.hi, l.step)));
        }
        if self.tracking.enabled && !(l.lo <= p.b0 && p.b0 <= l.hi) {
            return Err(Error::Config(format!("profile.b0 = {} outside the tracking ladder", p.b0)));
        }
        if p.fidelity == Fidelity::FirstOrder && p.b0 <= 0.0 {
            return Err(Error::Config("first-order fidelity needs b0 > 0".into()));
        }
        if !(self.initial.lambda0 > 0.0 && self.initial.lambda0.is_finite() && self.initial.gamma0.is_finite()) {
            return Err(Error::Config(format!("initial.lambda0 = {}", self.initial.lambda0)));
        }
        self.evolve.validate().map_err(cfg_err("evolve"))?;
        let c = &self.classify;
        if !(c.horizon_factor > 0.0 && c.arrest_gradient_bound > 1.0) {
            return Err(Error::Config("classify thresholds must be positive, bound > 1".into()));
        }
        let t = &self.tracking;
        if t.enabled && t.stride == 0 {
            return Err(Error::Config("tracking.stride must be ≥ 1".into()));
        }
        if t.gamma_bs.iter().any(|b| !(*b > 0.0 && b.is_finite())) || t.gamma_bs.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Config("tracking.gamma_bs must be positive and increasing".into()));
        }
        if !(t.nu > 0.0 && t.nu < 1.0) {
            return Err(Error::Config(format!("tracking.nu = {}", t.nu)));
        }
        if let Some(s) = &self.sweep {
            if s.values.iter().any(|v| !v.is_finite()) || s.values.windows(2).any(|w| w[1] <= w[0]) {
                return Err(Error::Config("sweep.values must be finite and strictly increasing".into()));
            }
            if s.workers == 0 {
                return Err(Error::Config("sweep.workers must be ≥ 1".into()));
            }
            let positive = match s.parameter {
                SweepParameter::Eta => s.values.iter().all(|v| *v >= 0.0),
                SweepParameter::Lambda0 | SweepParameter::Sigma2 => s.values.iter().all(|v| *v > 0.0),
            };
            if !positive {
                return Err(Error::Config("sweep.values out of range for the parameter".into()));
            }
            if let Some(r) = s.rescale_reference {
                if s.parameter != SweepParameter::Lambda0 || !(r > 0.0) {
                    return Err(Error::Config("sweep.rescale_reference needs a lambda0 sweep and a positive value".into()));
                }
            }
        }
        if self.output.formats.is_empty() {
            return Err(Error::Config("output.formats is empty".into()));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(cfg_err("parse"))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Effective evolve settings: horizon and checkpoint stride filled in.
    pub fn evolve_config(&self) -> EvolveConfig {
        let mut e = self.evolve.clone();
        if e.t_end.is_none() {
            e.t_end = Some(self.classify.horizon_factor * self.initial.lambda0 * self.initial.lambda0);
        }
        if self.tracking.enabled {
            e.checkpoint_stride = self.tracking.stride;
        }
        e
    }
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    if !path.is_file() {
        return Err(Error::ConfigNotFound(path.display().to_string()));
    }
    ExperimentConfig::from_json(&fs::read_to_string(path)?)
}

const DOCS: &[(&str, &str)] = &[
    ("model.d", "spatial dimension, 1 to 3"),
    ("model.sigma1", "focusing exponent, mass-supercritical: sigma1 > 2/d"),
    ("model.sigma2", "damping exponent"),
    ("model.eta", "damping strength, ≥ 0"),
    ("model.delta", "small parameter of the admissible exponent window"),
    ("profile.b0", "deformation of the initial core Q_b"),
    ("profile.rho", "cut-off margin; R_b = 2(1−rho)^{1/2}/b"),
    ("profile.fidelity", "zeroth-order or first-order profile"),
    ("profile.pb_nodes", "nodes of each P_b boundary-value grid"),
    ("profile.ladder.lo", "lowest b of the tracking ladder"),
    ("profile.ladder.hi", "highest b of the tracking ladder"),
    ("profile.ladder.step", "ladder spacing in b"),
    ("grid.n", "simulation grid nodes"),
    ("grid.r_max", "simulation grid radius"),
    ("grid.spacing.kind", "uniform or sinh"),
    ("grid.spacing.core", "sinh core width; node spacing near 0 is about core·asinh(r_max/core)/(n−1)"),
    ("profile_grid.n", "profile grid nodes"),
    ("profile_grid.r_max", "profile grid radius"),
    ("profile_grid.spacing.kind", "uniform or sinh"),
    ("profile_grid.spacing.core", "sinh core width"),
    ("initial.lambda0", "initial scale: psi0(r) = lambda0^{-1/sigma1} Q_b(r/lambda0) e^{i gamma0}"),
    ("initial.gamma0", "initial phase"),
    ("evolve.scheme", "midpoint (conservative implicit midpoint) or strang"),
    ("evolve.dt_rule.kind", "lambda-squared (dt = safety·dtau·lambda²) or fixed"),
    ("evolve.dt_rule.dtau", "rescaled step for the lambda-squared rule"),
    ("evolve.safety", "multiplier on the step"),
    ("evolve.max_steps", "step cap"),
    ("evolve.t_end", "horizon; null means classify.horizon_factor·lambda0²"),
    ("evolve.gradient_growth", "blow-up fires when |∇psi| ≥ this × its initial value"),
    ("evolve.lambda_floor", "... and lambda_proxy ≤ this × its initial value"),
    ("evolve.audit_stride", "steps per audit interval"),
    ("evolve.checkpoint_stride", "observer stride; overridden by tracking.stride when tracking"),
    ("evolve.buffer_capacity", "audit records kept in the ring buffer"),
    ("evolve.solver_tol", "relative tolerance of the implicit fixed point"),
    ("evolve.solver_max_iterations", "fixed-point iteration cap"),
    ("evolve.far_field_tol", "max |psi|² allowed in the outer 5% of the grid before flagging"),
    ("classify.horizon_factor", "horizon in units of lambda0²"),
    ("classify.arrest_gradient_bound", "arrested if |∇psi|/|∇psi0| stays below this up to the horizon"),
    ("tracking.enabled", "decompose along the run"),
    ("tracking.stride", "steps between decompositions"),
    ("tracking.gamma_bs", "b values where Gamma_b is solved for the bootstrap report"),
    ("tracking.nu", "bootstrap band parameter"),
    ("sweep", "null, or {parameter: eta | lambda0 | sigma2, values, workers, rescale_reference, curve_b}"),
    ("output.dir", "run directory"),
    ("output.formats", "subset of json, jsonl, csv, bin, text"),
];

/// Every config leaf with its default and a one-line description.
pub fn config_schema() -> Value {
    let defaults = serde_json::to_value(ExperimentConfig::default()).expect("config serializes");
    let mut fields = serde_json::Map::new();
    fn walk(prefix: &str, v: &Value, out: &mut Vec<(String, Value)>) {
        match v {
            Value::Object(m) => {
                for (k, x) in m {
                    let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                    walk(&key, x, out);
                }
            }
            x => out.push((prefix.to_string(), x.clone())),
        }
    }
    let mut leaves = Vec::new();
    walk("", &defaults, &mut leaves);
    for (k, v) in leaves {
        let doc = DOCS.iter().find(|(p, _)| *p == k).map(|(_, d)| *d).unwrap_or("");
        fields.insert(k, json!({ "default": v, "doc": doc }));
    }
    json!({ "format_version": FORMAT_VERSION, "fields": fields, "defaults": defaults })
}

/// Everything a run needs that does not depend on time stepping.
pub struct Prepared {
    pub params: ModelParams,
    pub grid: Arc<RadialGrid>,
    pub profile_grid: Arc<RadialGrid>,
    pub profile: SolitonProfile,
    pub grad_q: f64,
    pub psi0: ComplexField,
    pub family: Option<ProfileFamily>,
    pub gamma_table: Option<GammaTable>,
    pub gamma_b0: Option<f64>,
    pub admissibility: AdmissibilityReport,
}

pub fn build_profile(cfg: &ExperimentConfig, params: &ModelParams, grid: Arc<RadialGrid>) -> Result<SolitonProfile> {
    let p = &cfg.profile;
    let pb = if p.b0 == 0.0 {
        ground_member(params, p.rho, p.pb_nodes)?
    } else {
        solve_pb(params, p.b0, p.rho, p.pb_nodes)?
    };
    let prof = assemble_profile(params, pb, grid)?;
    match p.fidelity {
        Fidelity::ZerothOrder => Ok(prof),
        Fidelity::FirstOrder => solve_tb(&prof),
    }
}

/// Γ_b at each b; members whose radiation solve fails are skipped.
pub fn gamma_table(params: &ModelParams, bs: &[f64], rho: f64, pb_nodes: usize, grid: &Arc<RadialGrid>) -> Option<GammaTable> {
    let mut xs = Vec::new();
    let mut gs = Vec::new();
    for &b in bs {
        let g = solve_pb(params, b, rho, pb_nodes)
            .and_then(|pb| assemble_profile(params, pb, grid.clone()))
            .and_then(|prof| solve_radiation(&prof))
            .map(|r| r.gamma_b);
        if let Ok(g) = g {
            if g > 0.0 {
                xs.push(b);
                gs.push(g);
            }
        }
    }
    GammaTable::new(xs, gs).ok()
}

pub fn prepare(cfg: &ExperimentConfig) -> Result<Prepared> {
    let params = cfg.model.params()?;
    let grid = cfg.grid.build(params.d)?;
    let profile_grid = cfg.profile_grid.build(params.d)?;
    let profile = build_profile(cfg, &params, profile_grid.clone())?;
    let ground = assemble_profile(&params, ground_member(&params, cfg.profile.rho, cfg.profile.pb_nodes)?, profile_grid.clone())?;
    let op = FvOperator::new(&grid);
    let grad_q = op.grad_norm(make_initial_data(&ground, 1.0, 0.0, None, grid.clone())?.samples());
    let psi0 = make_initial_data(&profile, cfg.initial.lambda0, cfg.initial.gamma0, None, grid.clone())?;
    let family = if cfg.tracking.enabled {
        let l = cfg.profile.ladder;
        let spec = FamilySpec {
            b_lo: l.lo,
            b_hi: l.hi,
            step: l.step,
            rho: cfg.profile.rho,
            fidelity: cfg.profile.fidelity,
            pb_nodes: cfg.profile.pb_nodes,
        };
        Some(build_family(&params, &spec, profile_grid.clone())?)
    } else {
        None
    };
    let gamma_table = if cfg.tracking.enabled {
        gamma_table(&params, &cfg.tracking.gamma_bs, cfg.profile.rho, cfg.profile.pb_nodes, &profile_grid)
    } else {
        None
    };
    let gamma_b0 = if profile.b > 0.0 { solve_radiation(&profile).ok().map(|r| r.gamma_b) } else { None };
    let admissibility = admissibility(&profile, None, cfg.initial.lambda0, gamma_b0, cfg.tracking.nu)?;
    Ok(Prepared {
        params,
        grid,
        profile_grid,
        profile,
        grad_q,
        psi0,
        family,
        gamma_table,
        gamma_b0,
        admissibility,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Classification {
    Blowup,
    Arrested,
    Inconclusive,
}

pub fn classify(outcome: &Outcome, grad_ratio_max: f64, c: &ClassifyBlock) -> Classification {
    match outcome {
        Outcome::Blowup { .. } => Classification::Blowup,
        Outcome::Horizon { .. } if grad_ratio_max < c.arrest_gradient_bound => Classification::Arrested,
        _ => Classification::Inconclusive,
    }
}

/// Fits recomputed from an audit series alone.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticFits {
    pub detection: Option<BlowupDetection>,
    pub t_max: Option<f64>,
    pub rate: Option<RateFit>,
    pub lambda_sq: Option<LineFit>,
    pub grad_ratio_max: f64,
    pub focusing_decades: f64,
}

pub fn fit_diagnostics(records: &[AuditRecord], params: &ModelParams, growth: f64, floor: f64) -> DiagnosticFits {
    let t: Vec<f64> = records.iter().map(|r| r.t).collect();
    let g: Vec<f64> = records.iter().map(|r| r.grad_norm).collect();
    let l: Vec<f64> = records.iter().map(|r| r.lambda_proxy).collect();
    let detection = detect_blowup(&t, &g, &l, growth, floor).ok();
    let t_max = detection.and_then(|d| d.t_max);
    let rate = t_max.and_then(|tm| fit_blowup_rate(&t, &g, &l, tm, params.s_c).ok());
    let lambda_sq = if detection.is_some_and(|d| d.fired) { lambda_sq_linearity(&t, &l).ok() } else { None };
    let g0 = g.first().copied().unwrap_or(f64::NAN);
    let grad_ratio_max = g.iter().fold(0.0_f64, |m, x| m.max(*x)) / g0;
    let l0 = l.first().copied().unwrap_or(f64::NAN);
    let lmin = l.iter().fold(f64::INFINITY, |m, x| m.min(*x));
    DiagnosticFits {
        detection,
        t_max,
        rate,
        lambda_sq,
        grad_ratio_max,
        focusing_decades: (l0 / lmin).log10().max(0.0),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackingSummary {
    pub samples: usize,
    pub gaps: usize,
    pub b_first: Option<f64>,
    pub b_last: Option<f64>,
    pub b_min: Option<f64>,
    pub b_max: Option<f64>,
    pub t_last: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub format_version: u32,
    pub params: ModelParams,
    pub b0: f64,
    pub lambda0: f64,
    pub gamma_b0: Option<f64>,
    pub outcome: String,
    pub blowup: bool,
    pub classification: Classification,
    pub steps: usize,
    pub t_final: f64,
    pub t_end: Option<f64>,
    pub fits: DiagnosticFits,
    pub audit: Option<AuditSummary>,
    pub far_field_max: f64,
    pub far_field_ok: bool,
    pub dropped_records: u64,
    pub tracking: Option<TrackingSummary>,
    pub lambda_law: Option<LambdaLaw>,
    pub admissibility: AdmissibilityReport,
    pub notes: Vec<String>,
}

impl RunSummary {
    pub fn to_text(&self) -> String {
        let p = &self.params;
        let mut s = String::new();
        let _ = writeln!(s, "model d={} sigma1={} sigma2={} eta={:e} s_c={:.6}", p.d, p.sigma1, p.sigma2, p.eta, p.s_c);
        let _ = writeln!(s, "initial b0={} lambda0={}", self.b0, self.lambda0);
        let _ = writeln!(s, "outcome {} ({:?}) after {} steps, t = {:.8}", self.outcome, self.classification, self.steps, self.t_final);
        if let Some(tm) = self.fits.t_max {
            let _ = writeln!(s, "T_max estimate {tm:.8}");
        }
        if let Some(r) = &self.fits.rate {
            let _ = writeln!(
                s,
                "rate exponent {:.4} (expected {:.4}), R² {:.5}, {:.2} decades{}",
                r.exponent,
                r.expected,
                r.r_squared,
                r.decades,
                if r.low_confidence { ", low confidence" } else { "" }
            );
        }
        if let Some(l) = &self.fits.lambda_sq {
            let _ = writeln!(s, "lambda² fit slope {:.5}, R² {:.6}, n = {}", l.slope, l.r_squared, l.n);
        }
        let _ = writeln!(s, "max |∇psi|/|∇psi0| = {:.4}, focusing decades {:.2}", self.fits.grad_ratio_max, self.fits.focusing_decades);
        if let Some(a) = &self.audit {
            let _ = writeln!(
                s,
                "audit over {} intervals: mass residual {:.3e}, energy residual {:.3e} (relative, max), momentum {:.1e}",
                a.intervals, a.max_mass_residual_rel, a.max_energy_residual_rel, a.max_momentum
            );
        }
        let _ = writeln!(s, "far field max {:.3e} ({})", self.far_field_max, if self.far_field_ok { "ok" } else { "flagged" });
        if let Some(t) = &self.tracking {
            let _ = writeln!(s, "tracking: {} samples, {} gaps, b {:?} -> {:?}", t.samples, t.gaps, t.b_first, t.b_last);
        }
        if let Some(l) = &self.lambda_law {
            let _ = writeln!(
                s,
                "lambda law: slope {:.5}, R² {:.5}, b_obs {:.4}, slope/(-2b_obs) {:.4}, slope/(-2b*) {:.4}",
                l.slope, l.r_squared, l.b_obs, l.ratio_obs, l.ratio_star
            );
        }
        for n in &self.notes {
            let _ = writeln!(s, "note: {n}");
        }
        s
    }
}

fn sample_summary(samples: &[ModulationSample], gaps: usize) -> TrackingSummary {
    let bs = samples.iter().map(|m| m.b);
    TrackingSummary {
        samples: samples.len(),
        gaps,
        b_first: samples.first().map(|m| m.b),
        b_last: samples.last().map(|m| m.b),
        b_min: bs.clone().reduce(f64::min),
        b_max: bs.reduce(f64::max),
        t_last: samples.last().map(|m| m.t),
    }
}

fn write_modulation(dir: &Path, out: &OutputBlock, samples: &[ModulationSample], rates: &[ModulationRates]) -> Result<()> {
    if out.wants(OutputFormat::Jsonl) {
        write_jsonl(&dir.join("modulation.jsonl"), samples)?;
        write_jsonl(&dir.join("rates.jsonl"), rates)?;
    }
    if out.wants(OutputFormat::Csv) {
        write_records_csv(&dir.join("modulation.csv"), samples)?;
        write_records_csv(&dir.join("rates.csv"), rates)?;
    }
    Ok(())
}

/// Runs one experiment into `dir`: trajectory, tracking, fits, audit and the
/// summary. The config is written first and a failure leaves `error.json`.
pub fn run_experiment(cfg: &ExperimentConfig, dir: &Path) -> Result<RunSummary> {
    cfg.validate()?;
    fs::create_dir_all(dir)?;
    write_json(&dir.join("config.json"), cfg)?;
    let res = run_inner(cfg, dir);
    if let Err(e) = &res {
        write_json(&dir.join("error.json"), &error_object(e))?;
    }
    res
}

pub fn error_object(e: &Error) -> Value {
    json!({ "kind": e.kind(), "message": e.to_string() })
}

fn run_inner(cfg: &ExperimentConfig, dir: &Path) -> Result<RunSummary> {
    let prep = prepare(cfg)?;
    let params = prep.params;
    let ecfg = cfg.evolve_config();
    let start = ModulationState::new(prep.profile.b, cfg.initial.lambda0, cfg.initial.gamma0);
    let mut tracker = prep.family.as_ref().map(|f| Tracker::new(f, &params, prep.gamma_table.as_ref(), start));
    let traj = run_with(&prep.psi0, &params, &ecfg, prep.grad_q, |s| {
        if let Some(t) = tracker.as_mut() {
            t.push(s.t, s.tau, &s.psi, s.lambda_proxy);
        }
    });
    let series = tracker.map(|t| t.series).unwrap_or_default();
    write_modulation(dir, &cfg.output, &series.samples, &series.rates())?;
    let traj = traj?;
    let out = &cfg.output;
    if out.wants(OutputFormat::Jsonl) {
        write_jsonl(&dir.join("diagnostics.jsonl"), &traj.records)?;
    }
    if out.wants(OutputFormat::Csv) {
        write_records_csv(&dir.join("diagnostics.csv"), &traj.records)?;
    }
    let header = FieldHeader::new(
        "final-state",
        &prep.grid,
        json!({ "t": traj.final_state.t, "step": traj.final_state.step_index, "outcome": traj.outcome.label() }),
    );
    if out.wants(OutputFormat::Csv) && out.wants(OutputFormat::Bin) {
        write_field_pair(dir, "final", &header, &traj.final_state.psi)?;
    } else if out.wants(OutputFormat::Csv) {
        crate::io::write_field_csv(&dir.join("final.csv"), &header, &traj.final_state.psi)?;
    } else if out.wants(OutputFormat::Bin) {
        crate::io::write_field_bin(&dir.join("final.bin"), &header, &traj.final_state.psi)?;
    }

    let fits = fit_diagnostics(&traj.records, &params, ecfg.gradient_growth, ecfg.lambda_floor);
    let audit = balance_audit(&traj).ok();
    let classification = classify(&traj.outcome, fits.grad_ratio_max, &cfg.classify);
    let lambda_law = if traj.outcome.is_blowup() { lambda_law_fit(&series.samples, params.b_star).ok() } else { None };
    let mut notes = Vec::new();
    match &traj.outcome {
        Outcome::Horizon { t } => notes.push(format!(
            "no blow-up detected up to the horizon t = {t:.6}; max gradient ratio {:.3}",
            fits.grad_ratio_max
        )),
        Outcome::MaxSteps { step } => notes.push(format!("step cap reached at step {step}")),
        Outcome::BlowupSuspected { detail, .. } => notes.push(format!("stopped: {detail}")),
        Outcome::Blowup { .. } => {}
    }
    if !traj.far_field_ok() {
        notes.push(format!("far-field amplitude {:.3e} exceeds tolerance; enlarge r_max", traj.far_field_max));
    }
    if let Some(r) = fits.rate {
        if r.low_confidence {
            notes.push(format!("rate fit spans only {:.2} decades", r.decades));
        }
    }
    if !series.gaps.is_empty() {
        notes.push(format!("{} decompositions failed (gaps)", series.gaps.len()));
    }
    if let (Some(g), true) = (&prep.gamma_table, !series.samples.is_empty()) {
        let rep: BootstrapReport = bootstrap_report(&series, g, &params, cfg.tracking.nu);
        if out.wants(OutputFormat::Json) {
            write_json(&dir.join("bootstrap.json"), &rep)?;
        }
    }
    let summary = RunSummary {
        format_version: FORMAT_VERSION,
        params,
        b0: prep.profile.b,
        lambda0: cfg.initial.lambda0,
        gamma_b0: prep.gamma_b0,
        outcome: traj.outcome.label().to_string(),
        blowup: traj.outcome.is_blowup(),
        classification,
        steps: traj.final_state.step_index,
        t_final: traj.final_state.t,
        t_end: ecfg.t_end,
        fits,
        audit,
        far_field_max: traj.far_field_max,
        far_field_ok: traj.far_field_ok(),
        dropped_records: traj.dropped_records,
        tracking: prep.family.as_ref().map(|_| sample_summary(&series.samples, series.gaps.len())),
        lambda_law,
        admissibility: prep.admissibility,
        notes,
    };
    write_json(&dir.join("summary.json"), &summary)?;
    if out.wants(OutputFormat::Text) {
        fs::write(dir.join("summary.txt"), summary.to_text())?;
    }
    Ok(summary)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanCell {
    pub index: usize,
    pub value: f64,
    /// Parameters actually simulated.
    pub eta_sim: f64,
    pub lambda_sim: f64,
    pub sigma2: f64,
    pub below_curve: Option<bool>,
    pub classification: Option<Classification>,
    pub outcome: Option<String>,
    pub t_final: Option<f64>,
    pub grad_ratio_max: Option<f64>,
    pub rate_exponent: Option<f64>,
    pub error: Option<Value>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Threshold {
    pub blow_max: Option<f64>,
    pub arrest_min: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurveReport {
    pub b: f64,
    pub gamma_b: f64,
    /// λ_c = η^{−1}Γ_b^{σ₁/(σ₁−σ₂)}.
    pub lambda_c: f64,
    pub below: usize,
    /// Every cell with λ₀ < λ_c classified as blow-up (vacuous when `below` is 0).
    pub all_below_blow: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanReport {
    pub format_version: u32,
    pub parameter: Option<SweepParameter>,
    pub cells: Vec<ScanCell>,
    /// Conclusive cells read blow-up first, then arrest, in sweep order.
    pub monotone: bool,
    pub threshold: Option<Threshold>,
    pub curve: Option<CurveReport>,
}

pub fn is_monotone(classes: &[Classification]) -> bool {
    let mut seen_arrest = false;
    for c in classes {
        match c {
            Classification::Arrested => seen_arrest = true,
            Classification::Blowup if seen_arrest => return false,
            _ => {}
        }
    }
    true
}

/// Cell configs of a sweep, in sweep order.
pub fn sweep_cells(cfg: &ExperimentConfig, sweep: &SweepBlock) -> Vec<(f64, ExperimentConfig)> {
    sweep
        .values
        .iter()
        .map(|&v| {
            let mut c = cfg.clone();
            c.sweep = None;
            match sweep.parameter {
                SweepParameter::Eta => c.model.eta = v,
                SweepParameter::Sigma2 => c.model.sigma2 = v,
                SweepParameter::Lambda0 => match sweep.rescale_reference {
                    Some(lr) => {
                        let e = 2.0 - 2.0 * c.model.sigma2 / c.model.sigma1;
                        c.model.eta = cfg.model.eta * (v / lr).powf(e);
                        c.initial.lambda0 = lr;
                    }
                    None => c.initial.lambda0 = v,
                },
            }
            (v, c)
        })
        .collect()
}

/// Runs every cell of `cfg.sweep` with `workers` threads, each in its own
/// `cell_NNN` directory, and merges the results in sweep order.
pub fn run_scan(cfg: &ExperimentConfig, dir: &Path) -> Result<ScanReport> {
    cfg.validate()?;
    let sweep = cfg.sweep.as_ref().ok_or_else(|| Error::Config("scan needs a sweep block".into()))?;
    fs::create_dir_all(dir)?;
    write_json(&dir.join("config.json"), cfg)?;
    let cells = sweep_cells(cfg, sweep);
    let results: Mutex<Vec<Option<ScanCell>>> = Mutex::new(vec![None; cells.len()]);
    let next = AtomicUsize::new(0);
    let workers = sweep.workers.min(cells.len()).max(1);
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let k = next.fetch_add(1, Ordering::SeqCst);
                if k >= cells.len() {
                    break;
                }
                let (v, c) = &cells[k];
                let cell = run_cell(k, *v, c, &dir.join(format!("cell_{k:03}")));
                results.lock().expect("poisoned")[k] = Some(cell);
            });
        }
    });
    let mut cells_out: Vec<ScanCell> = results.into_inner().expect("poisoned").into_iter().flatten().collect();
    let classes: Vec<Classification> = cells_out.iter().filter_map(|c| c.classification).collect();
    let monotone = is_monotone(&classes);
    let threshold = (sweep.parameter == SweepParameter::Eta).then(|| {
        let of = |want: Classification| cells_out.iter().filter(move |c| c.classification == Some(want)).map(|c| c.value);
        Threshold {
            blow_max: of(Classification::Blowup).reduce(f64::max),
            arrest_min: of(Classification::Arrested).reduce(f64::min),
        }
    });
    let params = cfg.model.params()?;
    let curve = if sweep.parameter == SweepParameter::Lambda0 && params.sigma2 < params.sigma1 && params.eta > 0.0 && !cells_out.is_empty() {
        let b = sweep.curve_b.unwrap_or(cfg.profile.b0);
        let pg = cfg.profile_grid.build(params.d)?;
        let prof = assemble_profile(&params, solve_pb(&params, b, cfg.profile.rho, cfg.profile.pb_nodes)?, pg)?;
        let gamma_b = solve_radiation(&prof)?.gamma_b;
        let lambda_c = gamma_b.powf(params.sigma1 / (params.sigma1 - params.sigma2)) / params.eta;
        for c in cells_out.iter_mut() {
            c.below_curve = Some(c.value < lambda_c);
        }
        let below: Vec<&ScanCell> = cells_out.iter().filter(|c| c.below_curve == Some(true)).collect();
        Some(CurveReport {
            b,
            gamma_b,
            lambda_c,
            below: below.len(),
            all_below_blow: below.iter().all(|c| c.classification == Some(Classification::Blowup)),
        })
    } else {
        None
    };
    let report = ScanReport {
        format_version: FORMAT_VERSION,
        parameter: Some(sweep.parameter),
        cells: cells_out,
        monotone,
        threshold,
        curve,
    };
    write_json(&dir.join("scan.json"), &report)?;
    if cfg.output.wants(OutputFormat::Csv) {
        write_records_csv(&dir.join("scan.csv"), &report.cells)?;
    }
    Ok(report)
}

fn run_cell(index: usize, value: f64, cfg: &ExperimentConfig, dir: &Path) -> ScanCell {
    let mut cell = ScanCell {
        index,
        value,
        eta_sim: cfg.model.eta,
        lambda_sim: cfg.initial.lambda0,
        sigma2: cfg.model.sigma2,
        below_curve: None,
        classification: None,
        outcome: None,
        t_final: None,
        grad_ratio_max: None,
        rate_exponent: None,
        error: None,
    };
    match run_experiment(cfg, dir) {
        Ok(s) => {
            cell.classification = Some(s.classification);
            cell.outcome = Some(s.outcome);
            cell.t_final = Some(s.t_final);
            cell.grad_ratio_max = Some(s.fits.grad_ratio_max);
            cell.rate_exponent = s.fits.rate.map(|r| r.exponent);
        }
        Err(e) => cell.error = Some(error_object(&e)),
    }
    cell
}
