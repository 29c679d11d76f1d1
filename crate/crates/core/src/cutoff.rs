//! Smooth cut-off functions.

/// Order-7 smoothstep S(s) = 35s⁴ − 84s⁵ + 70s⁶ − 20s⁷, clamped to [0, 1].
/// Returns (S, S', S'').
pub fn smoothstep7(s: f64) -> (f64, f64, f64) {
    if s <= 0.0 {
        return (0.0, 0.0, 0.0);
    }
    if s >= 1.0 {
        return (1.0, 0.0, 0.0);
    }
    let s2 = s * s;
    let s3 = s2 * s;
    let s4 = s3 * s;
    let v = s4 * (35.0 - 84.0 * s + 70.0 * s2 - 20.0 * s3);
    let dv = 140.0 * s3 * (1.0 - s).powi(3);
    let ddv = 420.0 * s2 * (1.0 - s).powi(2) * (1.0 - 2.0 * s);
    (v, dv, ddv)
}

/// Radial cut-off equal to 1 on [0, inner] and 0 beyond `outer`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Plateau {
    pub inner: f64,
    pub outer: f64,
}

impl Plateau {
    pub fn new(inner: f64, outer: f64) -> Self {
        assert!(outer > inner && inner >= 0.0, "bad plateau [{inner}, {outer}]");
        Self { inner, outer }
    }

    /// (φ, φ', φ'') at radius r.
    pub fn eval(&self, r: f64) -> (f64, f64, f64) {
        let w = self.outer - self.inner;
        let (s, ds, dds) = smoothstep7((r - self.inner) / w);
        (1.0 - s, -ds / w, -dds / (w * w))
    }

    /// Δφ for the radial Laplacian in dimension d.
    pub fn laplacian(&self, r: f64, d: usize) -> f64 {
        let (_, p1, p2) = self.eval(r);
        if r == 0.0 {
            return d as f64 * p2;
        }
        p2 + (d as f64 - 1.0) / r * p1
    }
}

/// The second cut-off χ: 0 on [0, ½], 1 on [3, ∞), nondecreasing, C¹,
/// with χ' = 1/3 on [1, 2].
pub fn chi(r: f64) -> (f64, f64) {
    // Cubic Hermite pieces joined to a linear middle section.
    fn hermite(t: f64, w: f64, y0: f64, y1: f64, m0: f64, m1: f64) -> (f64, f64) {
        let t2 = t * t;
        let t3 = t2 * t;
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        let v = h00 * y0 + h10 * w * m0 + h01 * y1 + h11 * w * m1;
        let dh00 = 6.0 * t2 - 6.0 * t;
        let dh10 = 3.0 * t2 - 4.0 * t + 1.0;
        let dh01 = -6.0 * t2 + 6.0 * t;
        let dh11 = 3.0 * t2 - 2.0 * t;
        let dv = (dh00 * y0 + dh01 * y1) / w + dh10 * m0 + dh11 * m1;
        (v, dv)
    }
    const SLOPE: f64 = 1.0 / 3.0;
    if r <= 0.5 {
        (0.0, 0.0)
    } else if r < 1.0 {
        hermite((r - 0.5) / 0.5, 0.5, 0.0, 1.0 / 6.0, 0.0, SLOPE)
    } else if r <= 2.0 {
        (1.0 / 6.0 + SLOPE * (r - 1.0), SLOPE)
    } else if r < 3.0 {
        hermite(r - 2.0, 1.0, 0.5, 1.0, SLOPE, 0.0)
    } else {
        (1.0, 0.0)
    }
}

/// χ_A(r) = χ(r/A).
pub fn chi_a(r: f64, a: f64) -> f64 {
    chi(r / a).0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smoothstep_endpoints_and_derivatives() {
        let (v0, d0, _) = smoothstep7(0.0);
        let (v1, d1, _) = smoothstep7(1.0);
        assert_eq!((v0, d0, v1, d1), (0.0, 0.0, 1.0, 0.0));
        let h = 1e-6;
        for &s in &[0.1, 0.37, 0.5, 0.81] {
            let (v, dv, ddv) = smoothstep7(s);
            let fd = (smoothstep7(s + h).0 - smoothstep7(s - h).0) / (2.0 * h);
            let fdd = (smoothstep7(s + h).1 - smoothstep7(s - h).1) / (2.0 * h);
            assert!((fd - dv).abs() < 1e-8);
            assert!((fdd - ddv).abs() < 1e-6);
            assert!((0.0..=1.0).contains(&v));
        }
    }

    #[test]
    fn chi_shape() {
        let mut prev = 0.0;
        for k in 0..=400 {
            let r = k as f64 * 0.01;
            let (v, dv) = chi(r);
            assert!(v >= prev - 1e-15 && dv >= -1e-15, "r={r}");
            if (1.0..=2.0).contains(&r) {
                assert!((0.25..=0.5).contains(&dv));
            }
            prev = v;
        }
        assert_eq!(chi(0.5).0, 0.0);
        assert_eq!(chi(3.0).0, 1.0);
        for &knot in &[0.5, 1.0, 2.0, 3.0] {
            let a = chi(knot - 1e-9);
            let b = chi(knot + 1e-9);
            assert!((a.0 - b.0).abs() < 1e-8 && (a.1 - b.1).abs() < 1e-6, "knot {knot}");
        }
    }
}
