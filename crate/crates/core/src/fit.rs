use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub n: usize,
}

/// Ordinary least squares y ≈ slope·x + intercept.
pub fn fit_line(x: &[f64], y: &[f64]) -> Result<LineFit> {
    let n = x.len().min(y.len());
    if n < 2 {
        return Err(Error::InsufficientSamples { have: n, need: 2 });
    }
    let nf = n as f64;
    let mx = x[..n].iter().sum::<f64>() / nf;
    let my = y[..n].iter().sum::<f64>() / nf;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for i in 0..n {
        let dx = x[i] - mx;
        let dy = y[i] - my;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if sxx == 0.0 {
        return Err(Error::InvalidParameter("degenerate abscissae in line fit".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok(LineFit {
        slope,
        intercept,
        r_squared,
        n,
    })
}

/// Least-squares κ in y ≈ κ·x (no intercept).
pub fn fit_proportional(x: &[f64], y: &[f64]) -> Result<f64> {
    let n = x.len().min(y.len());
    if n < 1 {
        return Err(Error::InsufficientSamples { have: n, need: 1 });
    }
    let sxx: f64 = x[..n].iter().map(|v| v * v).sum();
    let sxy: f64 = x[..n].iter().zip(y).map(|(a, b)| a * b).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidParameter("degenerate abscissae".into()));
    }
    Ok(sxy / sxx)
}

/// Least-squares quadratic y ≈ c0 + c1 x + c2 x², with R².
pub fn fit_quadratic(x: &[f64], y: &[f64]) -> Result<([f64; 3], f64)> {
    let n = x.len().min(y.len());
    if n < 3 {
        return Err(Error::InsufficientSamples { have: n, need: 3 });
    }
    let a = nalgebra::DMatrix::from_fn(n, 3, |i, j| x[i].powi(j as i32));
    let b = nalgebra::DVector::from_column_slice(&y[..n]);
    let svd = a.clone().svd(true, true);
    let c = svd
        .solve(&b, 1e-14)
        .map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let pred = &a * &c;
    let my = y[..n].iter().sum::<f64>() / n as f64;
    let ss_res: f64 = (0..n).map(|i| (y[i] - pred[i]).powi(2)).sum();
    let ss_tot: f64 = (0..n).map(|i| (y[i] - my).powi(2)).sum();
    let r2 = if ss_tot == 0.0 { 1.0 } else { 1.0 - ss_res / ss_tot };
    Ok(([c[0], c[1], c[2]], r2))
}

pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let m = v.len() / 2;
    Some(if v.len() % 2 == 0 {
        0.5 * (v[m - 1] + v[m])
    } else {
        v[m]
    })
}

/// Mean and relative standard deviation.
pub fn mean_and_rel_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt() / mean.abs())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_line() {
        let x: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let y: Vec<f64> = x.iter().map(|v| 1.0 - 0.6 * v).collect();
        let f = fit_line(&x, &y).unwrap();
        assert!((f.slope + 0.6).abs() < 1e-14);
        assert!((f.r_squared - 1.0).abs() < 1e-14);
    }

    #[test]
    fn quadratic_recovered() {
        let x: Vec<f64> = (0..8).map(|i| i as f64 * 0.1).collect();
        let y: Vec<f64> = x.iter().map(|v| 2.0 - v + 3.0 * v * v).collect();
        let (c, r2) = fit_quadratic(&x, &y).unwrap();
        assert!((c[2] - 3.0).abs() < 1e-10 && r2 > 0.999_999);
    }

    #[test]
    fn median_even_and_odd() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), Some(2.5));
        assert_eq!(median(&[]), None);
    }
}
