use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde_json::{json, Value};

use collapse_core::evolve::{lambda_proxy, make_initial_data, AuditRecord, FvOperator};
use collapse_core::fit::fit_line;
use collapse_core::harness::{
    build_profile, config_schema as schema, fit_diagnostics, run_experiment, run_scan, ExperimentConfig,
};
use collapse_core::io::{read_field, read_json, read_jsonl, write_field_pair, write_json, FieldHeader};
use collapse_core::modulation::{decompose as decompose_field, hs_exponent, lambda_law_fit, xi_norms, ModulationSample, ModulationState};
use collapse_core::profiles::pb::ground_member;
use collapse_core::profiles::{assemble_profile, build_family, pohozaev_report, solve_ground_state, FamilySpec};
use collapse_core::radiation::{extract_gamma, solve_radiation};
use collapse_core::{ComplexField, Error, ModelParams};

use crate::ModelOpts;

pub fn error_report(e: &anyhow::Error) -> (u8, Value) {
    match e.downcast_ref::<Error>() {
        Some(c) => (
            if c.is_config() { 2 } else { 1 },
            json!({ "error": { "kind": c.kind(), "message": format!("{e:#}") } }),
        ),
        None => (1, json!({ "error": { "kind": "runtime", "message": format!("{e:#}") } })),
    }
}

/// Parses a config without the evolution-level validation, so stationary
/// commands can use subcritical exponents.
fn read_config(path: &Path) -> Result<ExperimentConfig> {
    if !path.is_file() {
        return Err(Error::ConfigNotFound(path.display().to_string()).into());
    }
    let text = fs::read_to_string(path)?;
    let cfg = serde_json::from_str(&text).map_err(|e| Error::Config(format!("parse: {e}")))?;
    Ok(cfg)
}

fn load(path: &Path) -> Result<ExperimentConfig> {
    let cfg = read_config(path)?;
    cfg.validate()?;
    Ok(cfg)
}

fn stationary(opts: &ModelOpts) -> Result<(ExperimentConfig, ModelParams, PathBuf)> {
    let mut cfg = match &opts.config {
        Some(p) => read_config(p)?,
        None => ExperimentConfig::default(),
    };
    let m = &mut cfg.model;
    m.d = opts.d.unwrap_or(m.d);
    m.sigma1 = opts.sigma1.unwrap_or(m.sigma1);
    m.sigma2 = opts.sigma2.unwrap_or(m.sigma2);
    m.eta = opts.eta.unwrap_or(m.eta);
    cfg.profile.rho = opts.rho.unwrap_or(cfg.profile.rho);
    cfg.profile.fidelity = opts.fidelity.unwrap_or(cfg.profile.fidelity);
    let params = ModelParams::new(m.d, m.sigma1, m.sigma2, m.eta, m.delta).map_err(|e| Error::Config(e.to_string()))?;
    let out = opts.out.clone().unwrap_or_else(|| cfg.output.dir.clone());
    fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    Ok((cfg, params, out))
}

pub fn groundstate(opts: &ModelOpts) -> Result<Value> {
    let (cfg, params, out) = stationary(opts)?;
    let grid = cfg.profile_grid.build(params.d).map_err(|e| Error::Config(e.to_string()))?;
    let gs = solve_ground_state(&params, grid.clone())?;
    let field = ComplexField::from_real(grid.clone(), &gs.samples)?;
    let summary = json!({
        "d": params.d,
        "sigma1": params.sigma1,
        "s_c": params.s_c,
        "peak": gs.peak,
        "residual": gs.residual,
        "mass": gs.mass(),
        "grad_norm_sq": gs.grad_norm_sq(),
        "shape": gs.report,
    });
    let header = FieldHeader::new("ground-state", &grid, summary.clone());
    write_field_pair(&out, "groundstate", &header, &field)?;
    write_json(&out.join("groundstate.json"), &summary)?;
    Ok(summary)
}

pub fn profile(opts: &ModelOpts, b: Option<f64>) -> Result<Value> {
    let (mut cfg, params, out) = stationary(opts)?;
    cfg.profile.b0 = b.unwrap_or(cfg.profile.b0);
    let grid = cfg.profile_grid.build(params.d).map_err(|e| Error::Config(e.to_string()))?;
    let prof = build_profile(&cfg, &params, grid.clone())?;
    let q = prof.q_b();
    let poh = pohozaev_report(&prof)?;
    let summary = json!({
        "b": prof.b,
        "rho": prof.rho,
        "fidelity": prof.fidelity,
        "r_b": prof.r_b,
        "r_b_minus": prof.r_b_minus,
        "bvp_residual": prof.pb.residual,
        "continuation_steps": prof.pb.continuation_steps,
        "beta": prof.beta(),
        "pohozaev": poh,
    });
    write_field_pair(&out, "profile_q", &FieldHeader::new("q-b", &grid, summary.clone()), &q)?;
    write_field_pair(&out, "profile_psi", &FieldHeader::new("psi-b", &grid, json!({ "b": prof.b })), &prof.psi_b())?;
    write_json(&out.join("profile.json"), &summary)?;
    Ok(summary)
}

/// ln Γ_b band e^{−(1±0.2)π/b}.
fn gamma_band(b: f64) -> (f64, f64) {
    let c = std::f64::consts::PI / b;
    (-1.2 * c, -0.8 * c)
}

pub fn radiation(opts: &ModelOpts, b: Option<f64>) -> Result<Value> {
    let (mut cfg, params, out) = stationary(opts)?;
    cfg.profile.b0 = b.unwrap_or(cfg.profile.b0);
    let grid = cfg.profile_grid.build(params.d).map_err(|e| Error::Config(e.to_string()))?;
    let prof = build_profile(&cfg, &params, grid)?;
    let rad = solve_radiation(&prof)?;
    let gamma = extract_gamma(&rad)?;
    let (lo, hi) = gamma_band(prof.b);
    let summary = json!({
        "b": prof.b,
        "gamma_b": gamma,
        "ln_gamma_b": gamma.ln(),
        "band": [lo, hi],
        "in_band": (lo..=hi).contains(&gamma.ln()),
        "plateau_window": [rad.plateau_window.0, rad.plateau_window.1],
        "plateau_rel_std": rad.plateau_rel_std,
        "residual": rad.residual,
        "pivot_ratio": rad.pivot_ratio,
        "grad_norm_sq": rad.grad_norm_sq(),
    });
    let header = FieldHeader::new("zeta-b", rad.zeta.grid(), summary.clone());
    write_field_pair(&out, "radiation", &header, &rad.zeta)?;
    write_json(&out.join("radiation.json"), &summary)?;
    Ok(summary)
}

pub fn radiation_table(opts: &ModelOpts, bs: &[f64]) -> Result<Value> {
    let (mut cfg, params, out) = stationary(opts)?;
    if bs.is_empty() || bs.iter().any(|b| !(*b > 0.0)) {
        return Err(Error::Config("--bs needs positive values".into()).into());
    }
    let grid = cfg.profile_grid.build(params.d).map_err(|e| Error::Config(e.to_string()))?;
    let mut rows = Vec::new();
    for &b in bs {
        cfg.profile.b0 = b;
        let prof = build_profile(&cfg, &params, grid.clone())?;
        let rad = solve_radiation(&prof)?;
        rows.push((b, rad.gamma_b, rad.plateau_rel_std));
    }
    let x: Vec<f64> = rows.iter().map(|r| 1.0 / r.0).collect();
    let y: Vec<f64> = rows.iter().map(|r| r.1.ln()).collect();
    let fit = if rows.len() >= 2 { Some(fit_line(&x, &y)?) } else { None };
    let mut csv = String::from("b,gamma_b,ln_gamma_b,plateau_rel_std\n");
    for (b, g, s) in &rows {
        csv.push_str(&format!("{b},{g:e},{},{s:e}\n", g.ln()));
    }
    if let Some(f) = &fit {
        csv.push_str(&format!(
            "# fit ln_gamma_b = slope/b + intercept: slope={},intercept={},r_squared={},slope_over_minus_pi={}\n",
            f.slope,
            f.intercept,
            f.r_squared,
            -f.slope / std::f64::consts::PI
        ));
    }
    fs::write(out.join("radiation_table.csv"), csv)?;
    Ok(json!({
        "rows": rows.iter().map(|(b, g, s)| json!({ "b": b, "gamma_b": g, "plateau_rel_std": s })).collect::<Vec<_>>(),
        "fit": fit,
        "slope_over_minus_pi": fit.map(|f| -f.slope / std::f64::consts::PI),
    }))
}

pub fn evolve(config: &Path, out: Option<PathBuf>) -> Result<Value> {
    let cfg = load(config)?;
    let dir = out.unwrap_or_else(|| cfg.output.dir.clone());
    let s = run_experiment(&cfg, &dir)?;
    Ok(json!({
        "dir": dir,
        "outcome": s.outcome,
        "blowup": s.blowup,
        "classification": s.classification,
        "t_final": s.t_final,
        "t_max": s.fits.t_max,
        "rate_exponent": s.fits.rate.map(|r| r.exponent),
        "expected_exponent": -(1.0 - s.params.s_c),
        "lambda_sq_r_squared": s.fits.lambda_sq.map(|l| l.r_squared),
        "audit": s.audit,
        "notes": s.notes,
    }))
}

pub fn decompose(
    config: &Path,
    field: &Path,
    b: Option<f64>,
    lambda: Option<f64>,
    gamma: f64,
    out: Option<PathBuf>,
) -> Result<Value> {
    let cfg = load(config)?;
    let params = cfg.model.params()?;
    let (_, psi) = read_field(field)?;
    let pg = cfg.profile_grid.build(params.d)?;
    let l = cfg.profile.ladder;
    let spec = FamilySpec {
        b_lo: l.lo,
        b_hi: l.hi,
        step: l.step,
        rho: cfg.profile.rho,
        fidelity: cfg.profile.fidelity,
        pb_nodes: cfg.profile.pb_nodes,
    };
    let family = build_family(&params, &spec, pg.clone())?;
    let lambda = match lambda {
        Some(l) => l,
        None => {
            let ground = assemble_profile(&params, ground_member(&params, cfg.profile.rho, cfg.profile.pb_nodes)?, pg)?;
            let op = FvOperator::new(psi.grid());
            let grad_q = op.grad_norm(make_initial_data(&ground, 1.0, 0.0, None, psi.grid().clone())?.samples());
            lambda_proxy(grad_q, op.grad_norm(psi.samples()), params.s_c)
        }
    };
    let guess = ModulationState::new(b.unwrap_or(cfg.profile.b0), lambda, gamma);
    let res = decompose_field(&psi, &family, &guess)?;
    let norms = xi_norms(&res.xi, hs_exponent(&params));
    let summary = json!({
        "state": res.state,
        "residuals": res.residuals,
        "newton_iters": res.newton_iters,
        "converged": res.converged,
        "xi_norm_l2": res.xi.norm_l2(),
        "xi": norms,
        "guess": guess,
    });
    let dir = out.unwrap_or_else(|| cfg.output.dir.clone());
    fs::create_dir_all(&dir)?;
    write_field_pair(&dir, "xi", &FieldHeader::new("xi", res.xi.grid(), summary.clone()), &res.xi)?;
    write_json(&dir.join("decomposition.json"), &summary)?;
    Ok(summary)
}

pub fn scan(config: &Path, out: Option<PathBuf>, workers: Option<usize>) -> Result<Value> {
    let mut cfg = load(config)?;
    if let (Some(w), Some(s)) = (workers, cfg.sweep.as_mut()) {
        s.workers = w;
    }
    cfg.validate()?;
    let dir = out.unwrap_or_else(|| cfg.output.dir.clone());
    let report = run_scan(&cfg, &dir)?;
    Ok(serde_json::to_value(report)?)
}

pub fn fit(run: &Path) -> Result<Value> {
    let cfg: ExperimentConfig = read_json(&run.join("config.json")).map_err(|e| Error::Config(format!("{}: {e}", run.display())))?;
    let params = cfg.model.params()?;
    let records: Vec<AuditRecord> = read_jsonl(&run.join("diagnostics.jsonl"))?;
    let e = cfg.evolve_config();
    let fits = fit_diagnostics(&records, &params, e.gradient_growth, e.lambda_floor);
    let modulation = run.join("modulation.jsonl");
    let law = if modulation.is_file() {
        let samples: Vec<ModulationSample> = read_jsonl(&modulation)?;
        lambda_law_fit(&samples, params.b_star).ok()
    } else {
        None
    };
    let v = json!({ "fits": fits, "lambda_law": law, "expected_exponent": -(1.0 - params.s_c) });
    write_json(&run.join("fits.json"), &v)?;
    Ok(v)
}

pub fn config_schema(out: Option<PathBuf>) -> Result<Value> {
    let s = schema();
    if let Some(p) = out {
        write_json(&p, &s)?;
    }
    Ok(s)
}
