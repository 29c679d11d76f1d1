//! Blow-up detection, T_max extrapolation and the rate fit.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fit::{fit_line, LineFit};

const MIN_SAMPLES: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlowupDetection {
    pub fired: bool,
    pub t_max: Option<f64>,
    /// R² of the λ² extrapolation, 0 when nothing fired.
    pub confidence: f64,
    pub gradient_growth: f64,
    pub lambda_ratio: f64,
}

/// Indices of the last decade of λ (λ ≤ 10·λ_min), or everything when that
/// leaves too few points.
fn last_decade(lambda: &[f64]) -> Vec<usize> {
    let lmin = lambda.iter().cloned().fold(f64::INFINITY, f64::min);
    let idx: Vec<usize> = (0..lambda.len()).filter(|&k| lambda[k] <= 10.0 * lmin).collect();
    if idx.len() >= MIN_SAMPLES {
        idx
    } else {
        (0..lambda.len()).collect()
    }
}

/// T_max from a straight-line fit of λ² against t over the last decade of λ.
pub fn estimate_t_max(t: &[f64], lambda: &[f64]) -> Result<(f64, LineFit)> {
    let n = t.len().min(lambda.len());
    if n < MIN_SAMPLES {
        return Err(Error::InsufficientSamples { have: n, need: MIN_SAMPLES });
    }
    let idx = last_decade(&lambda[..n]);
    let x: Vec<f64> = idx.iter().map(|&k| t[k]).collect();
    let y: Vec<f64> = idx.iter().map(|&k| lambda[k] * lambda[k]).collect();
    let fit = fit_line(&x, &y)?;
    if !(fit.slope < 0.0) {
        return Err(Error::InvalidParameter("λ² is not decreasing".into()));
    }
    Ok((-fit.intercept / fit.slope, fit))
}

/// Fires when ‖∇ψ‖ ≥ growth·‖∇ψ(0)‖ and λ ≤ floor·λ(0) at the last sample.
pub fn detect_blowup(t: &[f64], grad: &[f64], lambda: &[f64], growth: f64, floor: f64) -> Result<BlowupDetection> {
    let n = t.len().min(grad.len()).min(lambda.len());
    if n < MIN_SAMPLES {
        return Err(Error::InsufficientSamples { have: n, need: MIN_SAMPLES });
    }
    let g = grad[n - 1] / grad[0];
    let l = lambda[n - 1] / lambda[0];
    let fired = g >= growth && l <= floor;
    let (t_max, confidence) = if fired {
        match estimate_t_max(&t[..n], &lambda[..n]) {
            Ok((tm, fit)) => (Some(tm), fit.r_squared.max(0.0)),
            Err(_) => (None, 0.0),
        }
    } else {
        (None, 0.0)
    };
    Ok(BlowupDetection {
        fired,
        t_max,
        confidence,
        gradient_growth: g,
        lambda_ratio: l,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    /// Slope of ln‖∇ψ‖² against ln(T_max − t).
    pub exponent: f64,
    /// −(1 − s_c).
    pub expected: f64,
    pub r_squared: f64,
    pub n: usize,
    /// Decades of λ spanned by the fit window.
    pub decades: f64,
    pub low_confidence: bool,
}

/// Power-law fit of ‖∇ψ‖² against T_max − t over the last decade of λ.
pub fn fit_blowup_rate(t: &[f64], grad: &[f64], lambda: &[f64], t_max: f64, s_c: f64) -> Result<RateFit> {
    let n = t.len().min(grad.len()).min(lambda.len());
    let idx: Vec<usize> = last_decade(&lambda[..n])
        .into_iter()
        .filter(|&k| t[k] < t_max && grad[k] > 0.0)
        .collect();
    if idx.len() < MIN_SAMPLES {
        return Err(Error::InsufficientSamples { have: idx.len(), need: MIN_SAMPLES });
    }
    let x: Vec<f64> = idx.iter().map(|&k| (t_max - t[k]).ln()).collect();
    let y: Vec<f64> = idx.iter().map(|&k| 2.0 * grad[k].ln()).collect();
    let fit = fit_line(&x, &y)?;
    let lo = idx.iter().map(|&k| lambda[k]).fold(f64::INFINITY, f64::min);
    let hi = idx.iter().map(|&k| lambda[k]).fold(0.0, f64::max);
    let decades = (hi / lo).log10();
    Ok(RateFit {
        exponent: fit.slope,
        expected: -(1.0 - s_c),
        r_squared: fit.r_squared,
        n: fit.n,
        decades,
        low_confidence: decades < 0.99,
    })
}

/// λ² against t over the window λ ≤ λ(0)/10.
pub fn lambda_sq_linearity(t: &[f64], lambda: &[f64]) -> Result<LineFit> {
    let n = t.len().min(lambda.len());
    if n < MIN_SAMPLES {
        return Err(Error::InsufficientSamples { have: n, need: MIN_SAMPLES });
    }
    let cut = lambda[0] / 10.0;
    let idx: Vec<usize> = (0..n).filter(|&k| lambda[k] <= cut).collect();
    if idx.len() < MIN_SAMPLES {
        return Err(Error::InsufficientSamples { have: idx.len(), need: MIN_SAMPLES });
    }
    let x: Vec<f64> = idx.iter().map(|&k| t[k]).collect();
    let y: Vec<f64> = idx.iter().map(|&k| lambda[k] * lambda[k]).collect();
    fit_line(&x, &y)
}
