//! Radial node sets on a smooth map r = r(ξ), ξ ∈ [0, 1].
//!
//! Derivatives use fourth-order differences in ξ and the chain rule. Fields are
//! even in r, and every supported map is odd in ξ, so ghost values across r = 0
//! are mirror images. The last two rows use one-sided stencils.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::sphere_area;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Spacing {
    Uniform,
    /// r = a·sinh(κξ); spacing near the origin is roughly a·κ/(n−1).
    Sinh { core: f64 },
}

/// Up to six contiguous coefficients acting on f[start..start+len].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StencilRow {
    pub start: usize,
    pub len: usize,
    pub c: [f64; 6],
}

impl StencilRow {
    fn from_pairs(pairs: &[(isize, f64)]) -> Self {
        // Negative indices fold back onto their mirror images.
        let mut folded: Vec<(usize, f64)> = Vec::with_capacity(pairs.len());
        for &(j, v) in pairs {
            let j = j.unsigned_abs();
            match folded.iter_mut().find(|(k, _)| *k == j) {
                Some(slot) => slot.1 += v,
                None => folded.push((j, v)),
            }
        }
        let start = folded.iter().map(|p| p.0).min().unwrap_or(0);
        let end = folded.iter().map(|p| p.0).max().unwrap_or(0);
        let len = end - start + 1;
        assert!(len <= 6, "stencil wider than 6");
        let mut c = [0.0; 6];
        for (j, v) in folded {
            c[j - start] += v;
        }
        Self { start, len, c }
    }

    fn scaled(mut self, s: f64) -> Self {
        for v in &mut self.c[..self.len] {
            *v *= s;
        }
        self
    }

    fn combine(a: &StencilRow, wa: f64, b: &StencilRow, wb: f64) -> Self {
        let mut pairs = Vec::with_capacity(12);
        for k in 0..a.len {
            pairs.push(((a.start + k) as isize, a.c[k] * wa));
        }
        for k in 0..b.len {
            pairs.push(((b.start + k) as isize, b.c[k] * wb));
        }
        Self::from_pairs(&pairs)
    }

    #[inline]
    pub fn apply<T: Scalar>(&self, f: &[T]) -> T {
        let mut acc = T::zero();
        for k in 0..self.len {
            acc += f[self.start + k] * self.c[k];
        }
        acc
    }
}

#[derive(Debug, Clone)]
pub struct RadialGrid {
    pub d: usize,
    pub spacing: Spacing,
    pub r_max: f64,
    /// Step in the mapped coordinate, 1/(n−1).
    pub h: f64,
    pub nodes: Vec<f64>,
    /// dr/dξ at the nodes.
    pub dr: Vec<f64>,
    /// d²r/dξ² at the nodes.
    pub d2r: Vec<f64>,
    pub weights: Vec<f64>,
    d1_rows: Vec<StencilRow>,
    lap_rows: Vec<StencilRow>,
    kappa: f64,
}

const CENTER_D1: [(isize, f64); 4] = [(-2, 1.0), (-1, -8.0), (1, 8.0), (2, -1.0)];
const CENTER_D2: [(isize, f64); 5] = [(-2, -1.0), (-1, 16.0), (0, -30.0), (1, 16.0), (2, -1.0)];
// One-sided rows, offsets relative to the last node N (0, −1, −2, ...).
const END_D1: [f64; 5] = [25.0, -48.0, 36.0, -16.0, 3.0];
const PENULT_D1: [f64; 5] = [3.0, 10.0, -18.0, 6.0, -1.0];
const END_D2: [f64; 6] = [45.0, -154.0, 214.0, -156.0, 61.0, -10.0];
const PENULT_D2: [f64; 6] = [10.0, -15.0, -4.0, 14.0, -6.0, 1.0];

const GREGORY: [f64; 5] = [
    1.0 / 12.0,
    1.0 / 24.0,
    19.0 / 720.0,
    3.0 / 160.0,
    863.0 / 60480.0,
];

fn binom(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, j| acc * (n - j) as f64 / (j + 1) as f64)
}

impl RadialGrid {
    pub fn new(d: usize, n: usize, r_max: f64, spacing: Spacing) -> Result<Self> {
        if !(1..=3).contains(&d) {
            return Err(Error::InvalidParameter(format!("grid dimension {d} not in 1..=3")));
        }
        if n < 16 {
            return Err(Error::InvalidParameter(format!("grid needs at least 16 nodes, got {n}")));
        }
        if !(r_max.is_finite() && r_max > 0.0) {
            return Err(Error::InvalidParameter(format!("r_max = {r_max} must be positive")));
        }
        let kappa = match spacing {
            Spacing::Uniform => r_max,
            Spacing::Sinh { core } => {
                if !(core.is_finite() && core > 0.0) {
                    return Err(Error::InvalidParameter(format!("sinh core {core} must be positive")));
                }
                (r_max / core).asinh()
            }
        };
        let h = 1.0 / (n - 1) as f64;
        let mut nodes = Vec::with_capacity(n);
        let mut dr = Vec::with_capacity(n);
        let mut d2r = Vec::with_capacity(n);
        for i in 0..n {
            let xi = i as f64 * h;
            let (r, r1, r2) = match spacing {
                Spacing::Uniform => (r_max * xi, r_max, 0.0),
                Spacing::Sinh { core } => {
                    let s = (kappa * xi).sinh();
                    let c = (kappa * xi).cosh();
                    (core * s, core * kappa * c, core * kappa * kappa * s)
                }
            };
            nodes.push(r);
            dr.push(r1);
            d2r.push(r2);
        }
        nodes[n - 1] = r_max;

        let last = n - 1;
        let mut d1_xi = Vec::with_capacity(n);
        let mut d2_xi = Vec::with_capacity(n);
        for i in 0..n {
            let (a, b) = if i + 2 <= last {
                let shift = |p: &[(isize, f64)]| {
                    StencilRow::from_pairs(
                        &p.iter().map(|&(k, v)| (i as isize + k, v)).collect::<Vec<_>>(),
                    )
                };
                (shift(&CENTER_D1), shift(&CENTER_D2))
            } else {
                let (c1, c2) = if i == last {
                    (&END_D1[..], &END_D2[..])
                } else {
                    (&PENULT_D1[..], &PENULT_D2[..])
                };
                let back = |c: &[f64]| {
                    StencilRow::from_pairs(
                        &c.iter()
                            .enumerate()
                            .map(|(k, &v)| ((last - k) as isize, v))
                            .collect::<Vec<_>>(),
                    )
                };
                (back(c1), back(c2))
            };
            d1_xi.push(a.scaled(1.0 / (12.0 * h)));
            d2_xi.push(b.scaled(1.0 / (12.0 * h * h)));
        }

        let dm1 = (d - 1) as f64;
        let mut d1_rows = Vec::with_capacity(n);
        let mut lap_rows = Vec::with_capacity(n);
        for i in 0..n {
            let r1 = dr[i];
            let r2 = d2r[i];
            if i == 0 {
                d1_rows.push(StencilRow {
                    start: 0,
                    len: 1,
                    c: [0.0; 6],
                });
                lap_rows.push(d2_xi[0].scaled(d as f64 / (r1 * r1)));
            } else {
                let fr = d1_xi[i].scaled(1.0 / r1);
                // f_rr = (f_ξξ − r'' f_r)/r'²,  Δf = f_rr + (d−1)/r f_r
                let lap = StencilRow::combine(
                    &d2_xi[i],
                    1.0 / (r1 * r1),
                    &fr,
                    dm1 / nodes[i] - r2 / (r1 * r1),
                );
                d1_rows.push(fr);
                lap_rows.push(lap);
            }
        }

        // Trapezoid in ξ plus Gregory end corrections through fifth differences.
        let mut c = vec![1.0; n];
        c[0] = 0.5;
        c[last] = 0.5;
        for (k0, &g) in GREGORY.iter().enumerate() {
            let k = k0 + 1;
            let sign_left = if k % 2 == 1 { 1.0 } else { -1.0 };
            for j in 0..=k {
                let dcoef = if (k - j) % 2 == 0 { 1.0 } else { -1.0 } * binom(k, j);
                c[j] += sign_left * g * dcoef;
                let ncoef = if j % 2 == 0 { 1.0 } else { -1.0 } * binom(k, j);
                c[last - j] -= g * ncoef;
            }
        }
        let omega = sphere_area(d);
        let weights = (0..n)
            .map(|i| omega * nodes[i].powi(d as i32 - 1) * dr[i] * h * c[i])
            .collect();

        Ok(Self {
            d,
            spacing,
            r_max,
            h,
            nodes,
            dr,
            d2r,
            weights,
            d1_rows,
            lap_rows,
            kappa,
        })
    }

    pub fn uniform(d: usize, n: usize, r_max: f64) -> Result<Self> {
        Self::new(d, n, r_max, Spacing::Uniform)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Two grids are interchangeable when their descriptors agree.
    pub fn same_as(&self, other: &RadialGrid) -> bool {
        std::ptr::eq(self, other)
            || (self.d == other.d
                && self.spacing == other.spacing
                && self.r_max == other.r_max
                && self.nodes.len() == other.nodes.len())
    }

    pub fn xi_of(&self, r: f64) -> f64 {
        match self.spacing {
            Spacing::Uniform => r / self.r_max,
            Spacing::Sinh { core } => (r / core).asinh() / self.kappa,
        }
    }

    pub fn r_of(&self, xi: f64) -> f64 {
        match self.spacing {
            Spacing::Uniform => self.r_max * xi,
            Spacing::Sinh { core } => core * (self.kappa * xi).sinh(),
        }
    }

    pub fn d1_row(&self, i: usize) -> &StencilRow {
        &self.d1_rows[i]
    }

    pub fn lap_row(&self, i: usize) -> &StencilRow {
        &self.lap_rows[i]
    }

    pub fn integrate(&self, f: &[f64]) -> f64 {
        debug_assert_eq!(f.len(), self.len());
        self.weights.iter().zip(f).map(|(w, v)| w * v).sum()
    }

    pub fn integrate_by<F: Fn(usize) -> f64>(&self, f: F) -> f64 {
        self.weights.iter().enumerate().map(|(i, w)| w * f(i)).sum()
    }

    pub fn d_dr<T: Scalar>(&self, f: &[T]) -> Vec<T> {
        self.d1_rows.iter().map(|row| row.apply(f)).collect()
    }

    pub fn laplacian<T: Scalar>(&self, f: &[T]) -> Vec<T> {
        self.lap_rows.iter().map(|row| row.apply(f)).collect()
    }

    /// Index of the first node with r ≥ `r`.
    pub fn index_at_or_above(&self, r: f64) -> usize {
        self.nodes.partition_point(|&x| x < r)
    }

    /// Six-point Lagrange interpolation in ξ, even across r = 0 and zero
    /// beyond r_max.
    pub fn interpolate<T: Scalar>(&self, f: &[T], r: f64) -> T {
        let r = r.abs();
        if r > self.r_max * (1.0 + 1e-14) {
            return T::zero();
        }
        let n = self.len() as isize;
        let p = (self.xi_of(r) / self.h).min((n - 1) as f64);
        let base = p.floor() as isize;
        let s = (base - 2).min(n - 6);
        let mut acc = T::zero();
        for a in 0..6 {
            let ja = s + a;
            let mut w = 1.0;
            for b in 0..6 {
                if a != b {
                    let jb = s + b;
                    w *= (p - jb as f64) / ((ja - jb) as f64);
                }
            }
            acc += f[ja.unsigned_abs()] * w;
        }
        acc
    }

    /// Derivative of the six-point interpolant with respect to r.
    pub fn interpolate_dr<T: Scalar>(&self, f: &[T], r: f64) -> T {
        let neg = r < 0.0;
        let r = r.abs();
        if r > self.r_max * (1.0 + 1e-14) {
            return T::zero();
        }
        let n = self.len() as isize;
        let xi = self.xi_of(r);
        let p = (xi / self.h).min((n - 1) as f64);
        let base = p.floor() as isize;
        let s = (base - 2).min(n - 6);
        let mut acc = T::zero();
        for a in 0..6 {
            let ja = s + a;
            let mut dw = 0.0;
            for skip in 0..6 {
                if skip == a {
                    continue;
                }
                let mut term = 1.0 / ((ja - (s + skip)) as f64);
                for b in 0..6 {
                    if b != a && b != skip {
                        let jb = s + b;
                        term *= (p - jb as f64) / ((ja - jb) as f64);
                    }
                }
                dw += term;
            }
            acc += f[ja.unsigned_abs()] * dw;
        }
        let drdxi = match self.spacing {
            Spacing::Uniform => self.r_max,
            Spacing::Sinh { core } => core * self.kappa * (self.kappa * xi).cosh(),
        };
        let v = acc * (1.0 / (self.h * drdxi));
        if neg {
            -v
        } else {
            v
        }
    }

    pub fn sample<T: Scalar, F: Fn(f64) -> T>(&self, f: F) -> Vec<T> {
        self.nodes.iter().map(|&r| f(r)).collect()
    }
}
