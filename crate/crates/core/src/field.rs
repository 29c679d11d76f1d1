use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::RadialGrid;

pub type C64 = Complex64;

pub const I: C64 = C64 { re: 0.0, im: 1.0 };

/// Complex samples of a radial function, one per grid node.
#[derive(Debug, Clone)]
pub struct ComplexField {
    grid: Arc<RadialGrid>,
    samples: Vec<C64>,
}

impl ComplexField {
    pub fn new(grid: Arc<RadialGrid>, samples: Vec<C64>) -> Result<Self> {
        if samples.len() != grid.len() {
            return Err(Error::InvalidParameter(format!(
                "{} samples for a grid of {} nodes",
                samples.len(),
                grid.len()
            )));
        }
        if let Some(index) = samples.iter().position(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::NonFinite {
                index,
                r: grid.nodes[index],
            });
        }
        Ok(Self { grid, samples })
    }

    /// Builds a field without the finiteness scan; callers guarantee it.
    pub(crate) fn from_parts(grid: Arc<RadialGrid>, samples: Vec<C64>) -> Self {
        debug_assert_eq!(samples.len(), grid.len());
        Self { grid, samples }
    }

    pub fn zeros(grid: Arc<RadialGrid>) -> Self {
        let n = grid.len();
        Self::from_parts(grid, vec![C64::new(0.0, 0.0); n])
    }

    pub fn from_fn<F: Fn(f64) -> C64>(grid: Arc<RadialGrid>, f: F) -> Result<Self> {
        let samples = grid.sample(f);
        Self::new(grid, samples)
    }

    pub fn from_real(grid: Arc<RadialGrid>, values: &[f64]) -> Result<Self> {
        Self::new(grid, values.iter().map(|&v| C64::new(v, 0.0)).collect())
    }

    pub fn grid(&self) -> &Arc<RadialGrid> {
        &self.grid
    }

    pub fn samples(&self) -> &[C64] {
        &self.samples
    }

    pub fn samples_mut(&mut self) -> &mut [C64] {
        &mut self.samples
    }

    pub fn into_samples(self) -> Vec<C64> {
        self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn check_same_grid(&self, other: &ComplexField) -> Result<()> {
        if self.grid.same_as(&other.grid) {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    pub fn map<F: Fn(f64, C64) -> C64>(&self, f: F) -> ComplexField {
        let samples = self
            .grid
            .nodes
            .iter()
            .zip(&self.samples)
            .map(|(&r, &z)| f(r, z))
            .collect();
        Self::from_parts(self.grid.clone(), samples)
    }

    pub fn zip_map<F: Fn(f64, C64, C64) -> C64>(&self, other: &ComplexField, f: F) -> Result<ComplexField> {
        self.check_same_grid(other)?;
        let samples = self
            .grid
            .nodes
            .iter()
            .zip(self.samples.iter().zip(&other.samples))
            .map(|(&r, (&a, &b))| f(r, a, b))
            .collect();
        Ok(Self::from_parts(self.grid.clone(), samples))
    }

    pub fn scale(&self, s: C64) -> ComplexField {
        self.map(|_, z| z * s)
    }

    pub fn add(&self, other: &ComplexField) -> Result<ComplexField> {
        self.zip_map(other, |_, a, b| a + b)
    }

    pub fn sub(&self, other: &ComplexField) -> Result<ComplexField> {
        self.zip_map(other, |_, a, b| a - b)
    }

    pub fn max_abs(&self) -> f64 {
        self.samples.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn norm_l2(&self) -> f64 {
        self.grid.integrate_by(|i| self.samples[i].norm_sqr()).max(0.0).sqrt()
    }

    pub fn d_dr(&self) -> ComplexField {
        Self::from_parts(self.grid.clone(), self.grid.d_dr(&self.samples))
    }

    pub fn laplacian(&self) -> ComplexField {
        laplacian(self)
    }

    pub fn all_finite(&self) -> bool {
        self.samples.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// Interpolated value at an arbitrary radius.
    pub fn at(&self, r: f64) -> C64 {
        self.grid.interpolate(&self.samples, r)
    }
}

/// Re ∫ f ḡ dx with the radial measure.
pub fn real_pair(f: &ComplexField, g: &ComplexField) -> Result<f64> {
    f.check_same_grid(g)?;
    Ok(f.grid.integrate_by(|i| {
        let a = f.samples[i];
        let b = g.samples[i];
        a.re * b.re + a.im * b.im
    }))
}

pub fn laplacian(f: &ComplexField) -> ComplexField {
    ComplexField::from_parts(f.grid.clone(), f.grid.laplacian(&f.samples))
}

/// Λf = f/σ₁ + r f_r.
pub fn apply_lambda(f: &ComplexField, sigma1: f64) -> ComplexField {
    let fr = f.grid.d_dr(&f.samples);
    let samples = f
        .samples
        .iter()
        .zip(&fr)
        .zip(&f.grid.nodes)
        .map(|((&v, &dv), &r)| v / sigma1 + dv * r)
        .collect();
    ComplexField::from_parts(f.grid.clone(), samples)
}

/// Df = (d/2) f + r f_r.
pub fn apply_d(f: &ComplexField) -> ComplexField {
    let half_d = f.grid.d as f64 / 2.0;
    let fr = f.grid.d_dr(&f.samples);
    let samples = f
        .samples
        .iter()
        .zip(&fr)
        .zip(&f.grid.nodes)
        .map(|((&v, &dv), &r)| v * half_d + dv * r)
        .collect();
    ComplexField::from_parts(f.grid.clone(), samples)
}

/// The vector momentum (∇ψ, iψ) of a radial field, which vanishes identically
/// by symmetry. Exposed as a diagnostic.
pub fn vector_momentum(_psi: &ComplexField) -> f64 {
    0.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Spacing;

    fn grid(d: usize) -> Arc<RadialGrid> {
        Arc::new(RadialGrid::new(d, 2048, 14.0, Spacing::Sinh { core: 3.0 }).unwrap())
    }

    #[test]
    fn gaussian_pairing_d1() {
        let g = grid(1);
        let f = ComplexField::from_fn(g, |r| C64::new((-r * r / 2.0).exp(), 0.0)).unwrap();
        let v = real_pair(&f, &f).unwrap();
        assert!((v - std::f64::consts::PI.sqrt()).abs() < 1e-9);
        let jf = f.scale(I);
        assert!(real_pair(&f, &jf).unwrap().abs() < 1e-15);
    }

    #[test]
    fn lambda_of_gaussian() {
        let g = grid(1);
        let f = ComplexField::from_fn(g, |r| C64::new((-r * r / 2.0).exp(), 0.0)).unwrap();
        let lf = apply_lambda(&f, 1.0);
        for (i, &r) in f.grid().nodes.iter().enumerate() {
            let e = (1.0 - r * r) * (-r * r / 2.0).exp();
            assert!((lf.samples()[i].re - e).abs() < 1e-7);
        }
    }

    #[test]
    fn lambda_equals_d_minus_s_c() {
        let g = grid(3);
        let sigma1 = 1.2;
        let s_c = 1.5 - 1.0 / sigma1;
        let f = ComplexField::from_fn(g, |r| C64::new((-r * r).exp(), r * (-r).exp() * 0.3)).unwrap();
        let a = apply_lambda(&f, sigma1);
        let b = apply_d(&f);
        let mut worst: f64 = 0.0;
        for i in 0..f.len() {
            worst = worst.max((a.samples()[i] - (b.samples()[i] - f.samples()[i] * s_c)).norm());
        }
        assert!(worst <= 1e-10, "{worst}");
    }

    #[test]
    fn grid_mismatch_detected() {
        let f = ComplexField::zeros(grid(1));
        let g = ComplexField::zeros(grid(2));
        assert!(matches!(real_pair(&f, &g), Err(Error::GridMismatch)));
    }

    #[test]
    fn non_finite_rejected() {
        let g = grid(1);
        let mut s = vec![C64::new(0.0, 0.0); g.len()];
        s[7] = C64::new(f64::NAN, 0.0);
        assert!(matches!(ComplexField::new(g, s), Err(Error::NonFinite { index: 7, .. })));
    }
}
