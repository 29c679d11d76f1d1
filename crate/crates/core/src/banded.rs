//! Banded and tridiagonal linear solvers.
//!
//! `BandMatrix` stores an n×n matrix with `kl` sub- and `ku` super-diagonals and
//! factorizes it with row partial pivoting (fill-in widens the upper band to
//! `ku + kl`, exactly as in LAPACK's `gbtrf`).

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone)]
pub struct BandMatrix<T> {
    n: usize,
    kl: usize,
    ku: usize,
    /// Row-major storage, row i holds columns i-kl ..= i+ku+kl.
    data: Vec<T>,
}

impl<T: Scalar> BandMatrix<T> {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let width = 2 * kl + ku + 1;
        Self {
            n,
            kl,
            ku,
            data: vec![T::zero(); n * width],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    fn width(&self) -> usize {
        2 * self.kl + self.ku + 1
    }

    fn slot(&self, i: usize, j: usize) -> Option<usize> {
        let off = j as isize - i as isize + self.kl as isize;
        if off < 0 || off as usize >= self.width() || j >= self.n {
            None
        } else {
            Some(i * self.width() + off as usize)
        }
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.slot(i, j).map_or(T::zero(), |s| self.data[s])
    }

    /// Adds `v` at (i, j). Panics when (i, j) falls outside the declared band.
    pub fn add(&mut self, i: usize, j: usize, v: T) {
        let lo = i.saturating_sub(self.kl);
        assert!(
            j >= lo && j <= i + self.ku,
            "entry ({i}, {j}) outside band kl={} ku={}",
            self.kl,
            self.ku
        );
        let s = self.slot(i, j).expect("slot in band");
        self.data[s] += v;
    }

    pub fn set(&mut self, i: usize, j: usize, v: T) {
        let s = self.slot(i, j).expect("slot in band");
        self.data[s] = v;
    }

    pub fn clear_row(&mut self, i: usize) {
        let w = self.width();
        for k in 0..w {
            self.data[i * w + k] = T::zero();
        }
    }

    pub fn matvec(&self, x: &[T]) -> Vec<T> {
        let mut y = vec![T::zero(); self.n];
        for (i, yi) in y.iter_mut().enumerate() {
            let lo = i.saturating_sub(self.kl);
            let hi = (i + self.ku + self.kl).min(self.n - 1);
            let mut acc = T::zero();
            for j in lo..=hi {
                acc += self.get(i, j) * x[j];
            }
            *yi = acc;
        }
        y
    }

    pub fn transpose(&self) -> BandMatrix<T> {
        let mut t = BandMatrix::zeros(self.n, self.ku, self.kl);
        for i in 0..self.n {
            let lo = i.saturating_sub(self.kl);
            let hi = (i + self.ku).min(self.n - 1);
            for j in lo..=hi {
                let v = self.get(i, j);
                if v != T::zero() {
                    t.set(j, i, v);
                }
            }
        }
        t
    }

    pub fn factor(mut self) -> Result<BandLu<T>> {
        let n = self.n;
        let kl = self.kl;
        let reach = self.ku + self.kl;
        let mut piv = vec![0usize; n];
        let scale = self
            .data
            .iter()
            .map(|v| v.modulus())
            .fold(0.0_f64, f64::max)
            .max(f64::MIN_POSITIVE);
        for k in 0..n {
            let last = (k + kl).min(n - 1);
            let mut p = k;
            let mut best = self.get(k, k).modulus();
            for i in k + 1..=last {
                let m = self.get(i, k).modulus();
                if m > best {
                    best = m;
                    p = i;
                }
            }
            if best <= scale * 1e-300 || !best.is_finite() {
                return Err(Error::Singular {
                    context: format!("zero pivot in column {k} of banded factorization"),
                });
            }
            piv[k] = p;
            let jmax = (k + reach).min(n - 1);
            if p != k {
                for j in k..=jmax {
                    let a = self.get(k, j);
                    let b = self.get(p, j);
                    if let Some(s) = self.slot(k, j) {
                        self.data[s] = b;
                    }
                    if let Some(s) = self.slot(p, j) {
                        self.data[s] = a;
                    }
                }
            }
            let pivot = self.get(k, k);
            for i in k + 1..=last {
                let f = self.get(i, k) / pivot;
                if f == T::zero() {
                    continue;
                }
                let s = self.slot(i, k).expect("band");
                self.data[s] = f;
                for j in k + 1..=jmax {
                    let u = self.get(k, j);
                    if u != T::zero() {
                        let s = self.slot(i, j).expect("band");
                        self.data[s] -= f * u;
                    }
                }
            }
        }
        Ok(BandLu { m: self, piv })
    }
}

#[derive(Debug, Clone)]
pub struct BandLu<T> {
    m: BandMatrix<T>,
    piv: Vec<usize>,
}

impl<T: Scalar> BandLu<T> {
    pub fn solve_in_place(&self, b: &mut [T]) {
        let n = self.m.n;
        let kl = self.m.kl;
        let reach = self.m.ku + self.m.kl;
        for k in 0..n {
            let p = self.piv[k];
            if p != k {
                b.swap(k, p);
            }
            let bk = b[k];
            let last = (k + kl).min(n - 1);
            for i in k + 1..=last {
                let f = self.m.get(i, k);
                if f != T::zero() {
                    b[i] -= f * bk;
                }
            }
        }
        for k in (0..n).rev() {
            let jmax = (k + reach).min(n - 1);
            let mut acc = b[k];
            for j in k + 1..=jmax {
                acc -= self.m.get(k, j) * b[j];
            }
            b[k] = acc / self.m.get(k, k);
        }
    }

    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }

    /// max|u_kk| / min|u_kk|, a cheap lower bound on the condition number.
    pub fn pivot_ratio(&self) -> f64 {
        let (lo, hi) = (0..self.m.n).fold((f64::INFINITY, 0.0_f64), |(lo, hi), k| {
            let v = self.m.get(k, k).modulus();
            (lo.min(v), hi.max(v))
        });
        hi / lo
    }
}

/// Thomas algorithm for a tridiagonal system without pivoting; callers must
/// supply a diagonally dominant matrix.
pub fn solve_tridiagonal<T: Scalar>(lower: &[T], diag: &[T], upper: &[T], rhs: &mut [T]) {
    let n = diag.len();
    let mut c = vec![T::zero(); n];
    let mut beta = diag[0];
    c[0] = if n > 1 { upper[0] / beta } else { T::zero() };
    rhs[0] = rhs[0] / beta;
    for i in 1..n {
        beta = diag[i] - lower[i] * c[i - 1];
        if i + 1 < n {
            c[i] = upper[i] / beta;
        }
        rhs[i] = (rhs[i] - lower[i] * rhs[i - 1]) / beta;
    }
    for i in (0..n - 1).rev() {
        let next = rhs[i + 1];
        rhs[i] -= c[i] * next;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    #[test]
    fn banded_lu_matches_dense_solution() {
        let n = 12;
        let mut m = BandMatrix::<f64>::zeros(n, 3, 2);
        for i in 0..n {
            for j in i.saturating_sub(3)..=(i + 2).min(n - 1) {
                let v = ((i * 7 + j * 3) % 5) as f64 - 2.0 + if i == j { 0.5 } else { 0.0 };
                m.set(i, j, v);
            }
        }
        let x: Vec<f64> = (0..n).map(|i| (i as f64).sin() + 0.3).collect();
        let b = m.matvec(&x);
        let lu = m.clone().factor().unwrap();
        let y = lu.solve(&b);
        for (a, e) in y.iter().zip(&x) {
            assert!((a - e).abs() < 1e-10, "{a} vs {e}");
        }
    }

    #[test]
    fn complex_band_and_transpose() {
        let n = 9;
        let mut m = BandMatrix::<Complex64>::zeros(n, 1, 2);
        for i in 0..n {
            m.set(i, i, Complex64::new(4.0, 1.0));
            if i > 0 {
                m.set(i, i - 1, Complex64::new(0.5, -1.0));
            }
            if i + 1 < n {
                m.set(i, i + 1, Complex64::new(-1.0, 0.2));
            }
            if i + 2 < n {
                m.set(i, i + 2, Complex64::new(0.1, 0.0));
            }
        }
        let x: Vec<Complex64> = (0..n).map(|i| Complex64::new(i as f64, 1.0)).collect();
        let t = m.transpose();
        let b = t.matvec(&x);
        let y = t.factor().unwrap().solve(&b);
        for (a, e) in y.iter().zip(&x) {
            assert!((a - e).norm() < 1e-12);
        }
    }

    #[test]
    fn singular_matrix_is_reported() {
        let m = BandMatrix::<f64>::zeros(4, 1, 1);
        assert!(matches!(m.factor(), Err(Error::Singular { .. })));
    }

    #[test]
    fn thomas_solves_dominant_system() {
        let n = 6;
        let lower = vec![-1.0; n];
        let upper = vec![-1.0; n];
        let diag = vec![4.0; n];
        let x: Vec<f64> = (0..n).map(|i| i as f64 * 0.5 - 1.0).collect();
        let mut rhs: Vec<f64> = (0..n)
            .map(|i| {
                let mut v = diag[i] * x[i];
                if i > 0 {
                    v += lower[i] * x[i - 1];
                }
                if i + 1 < n {
                    v += upper[i] * x[i + 1];
                }
                v
            })
            .collect();
        solve_tridiagonal(&lower, &diag, &upper, &mut rhs);
        for (a, e) in rhs.iter().zip(&x) {
            assert!((a - e).abs() < 1e-13);
        }
    }
}
