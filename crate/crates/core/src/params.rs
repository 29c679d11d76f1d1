use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Model exponents and damping for iψ_t + Δψ + |ψ|^{2σ₁}ψ + iη|ψ|^{2σ₂}ψ = 0,
/// together with the quantities derived from them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub d: usize,
    pub sigma1: f64,
    pub sigma2: f64,
    pub eta: f64,
    pub delta: f64,
    pub s_c: f64,
    pub sigma_star: f64,
    /// 2/(d−2) − σ₁ for d ≥ 3, +∞ otherwise (null in JSON).
    #[serde(serialize_with = "finite_or_null", deserialize_with = "null_is_infinite")]
    pub sigma_sup: f64,
    pub sigma2_max: f64,
    /// NaN when s_c ∉ (0, 1) (null in JSON).
    #[serde(serialize_with = "finite_or_null", deserialize_with = "null_is_nan")]
    pub b_star: f64,
}

impl ModelParams {
    /// Computes every derived field without judging the regime. Subcritical and
    /// critical exponents are allowed here so ground states and mass-critical
    /// references can be built; `derive_params` is the strict entry point.
    pub fn new(d: usize, sigma1: f64, sigma2: f64, eta: f64, delta: f64) -> Result<Self> {
        if !(1..=3).contains(&d) {
            return Err(Error::InvalidParameter(format!("d = {d} not in {{1, 2, 3}}")));
        }
        if !(sigma1.is_finite() && sigma1 > 0.0) {
            return Err(Error::InvalidParameter(format!("sigma1 = {sigma1} must be positive")));
        }
        if !(sigma2.is_finite() && sigma2 >= 0.0) {
            return Err(Error::InvalidParameter(format!("sigma2 = {sigma2} must be >= 0")));
        }
        if !(eta.is_finite() && eta >= 0.0) {
            return Err(Error::InvalidParameter(format!("eta = {eta} must be >= 0")));
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::InvalidParameter(format!("delta = {delta} not in (0, 1)")));
        }
        let df = d as f64;
        let s_c = df / 2.0 - 1.0 / sigma1;
        let sigma_star = s_c * sigma1;
        let sigma_sup = if d >= 3 {
            2.0 / (df - 2.0) - sigma1
        } else {
            f64::INFINITY
        };
        // d ≤ 3 throughout, so the d ≥ 4 branch (σ₂,max = σ^*) never applies.
        let sigma2_max = sigma1;
        let b_star = if s_c > 0.0 && s_c < 1.0 {
            -std::f64::consts::PI * (1.0 + delta) / s_c.ln()
        } else {
            f64::NAN
        };
        Ok(Self {
            d,
            sigma1,
            sigma2,
            eta,
            delta,
            s_c,
            sigma_star,
            sigma_sup,
            sigma2_max,
            b_star,
        })
    }

    /// Same model with different damping.
    pub fn with_damping(&self, sigma2: f64, eta: f64) -> Result<Self> {
        Self::new(self.d, self.sigma1, sigma2, eta, self.delta)
    }

    pub fn mass_critical_exponent(&self) -> f64 {
        2.0 / self.d as f64
    }

    pub fn admissible(&self) -> bool {
        self.mass_critical_exponent() < self.sigma1
            && self.sigma_star < self.sigma2
            && self.sigma2 <= self.sigma2_max
    }

    /// The damping smallness requirement η ≤ s_c³.
    pub fn eta_small(&self) -> bool {
        self.s_c > 0.0 && self.eta <= self.s_c.powi(3)
    }

    /// Measure of the unit sphere, with the full-line convention 2 for d = 1.
    pub fn sphere_area(&self) -> f64 {
        sphere_area(self.d)
    }
}

pub fn sphere_area(d: usize) -> f64 {
    match d {
        1 => 2.0,
        2 => 2.0 * std::f64::consts::PI,
        3 => 4.0 * std::f64::consts::PI,
        _ => f64::NAN,
    }
}

/// Strict constructor for the supercritical regime.
pub fn derive_params(d: usize, sigma1: f64, sigma2: f64, eta: f64, delta: f64) -> Result<ModelParams> {
    let p = ModelParams::new(d, sigma1, sigma2, eta, delta)?;
    if sigma1 <= p.mass_critical_exponent() {
        return Err(Error::NotSupercritical {
            d,
            sigma1,
            critical: p.mass_critical_exponent(),
            s_c: p.s_c,
        });
    }
    Ok(p)
}

fn finite_or_null<S: serde::Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    v.is_finite().then_some(*v).serialize(s)
}

fn null_is_infinite<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
}

fn null_is_nan<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn s_c_for_d1_sigma_2_2() {
        let p = derive_params(1, 2.2, 2.2, 0.0, 0.1).unwrap();
        assert!((p.s_c - 0.045_454_545_454_545_4).abs() < 1e-15);
        assert!((p.b_star - 1.117_989_148_028_107).abs() < 1e-12, "{}", p.b_star);
        assert!((p.sigma_star - 0.1).abs() < 1e-14);
        assert!(p.admissible());
        assert!(p.sigma_sup.is_infinite());
    }

    #[test]
    fn mass_critical_is_inadmissible_and_rejected() {
        let p = ModelParams::new(2, 1.0, 0.5, 0.0, 0.1).unwrap();
        assert_eq!(p.s_c, 0.0);
        assert!(!p.admissible());
        let err = derive_params(2, 1.0, 0.5, 0.0, 0.1).unwrap_err();
        assert_eq!(err.kind(), "not-supercritical");
    }

    #[test]
    fn sigma_star_closed_forms_agree() {
        for &(d, s1) in &[(1usize, 2.5), (2, 1.3), (3, 0.9)] {
            let p = derive_params(d, s1, s1, 0.0, 0.2).unwrap();
            let alt = 2.0 * p.s_c / (d as f64 - 2.0 * p.s_c);
            assert!((p.sigma_star - alt).abs() < 1e-13);
        }
        let p3 = derive_params(3, 0.9, 0.5, 0.0, 0.2).unwrap();
        assert!((p3.sigma_sup - 1.1).abs() < 1e-14);
    }

    #[test]
    fn damping_bounds_drive_admissibility() {
        let p = derive_params(1, 2.2, 0.05, 0.0, 0.1).unwrap();
        assert!(!p.admissible());
        let p = derive_params(1, 2.2, 2.3, 0.0, 0.1).unwrap();
        assert!(!p.admissible());
        let p = derive_params(1, 2.2, 1.8, 1e-5, 0.1).unwrap();
        assert!(p.admissible());
        assert!(p.eta_small());
    }

    #[test]
    fn bad_inputs_rejected() {
        assert!(ModelParams::new(4, 1.0, 1.0, 0.0, 0.1).is_err());
        assert!(ModelParams::new(1, 3.0, -1.0, 0.0, 0.1).is_err());
        assert!(ModelParams::new(1, 3.0, 1.0, -1.0, 0.1).is_err());
        assert!(ModelParams::new(1, 3.0, 1.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn json_round_trip_keeps_nonfinite() {
        let p = ModelParams::new(1, 1.0, 1.0, 0.0, 0.1).unwrap();
        let v = serde_json::to_value(p).unwrap();
        assert!(v["sigma_sup"].is_null() && v["b_star"].is_null());
        let back: ModelParams = serde_json::from_value(v).unwrap();
        assert!(back.sigma_sup.is_infinite() && back.b_star.is_nan());
        let q = derive_params(3, 0.9, 0.5, 0.0, 0.2).unwrap();
        assert_eq!(serde_json::from_str::<ModelParams>(&serde_json::to_string(&q).unwrap()).unwrap(), q);
    }
}
