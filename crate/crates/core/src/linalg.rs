//! Dense Cholesky factorization for symmetric positive definite matrices.
//!
//! Matrices are row-major `n x n` slices. Only the lower triangle of the input
//! is read.

use crate::error::{Error, Result};

/// Lower-triangular factor `L` with `A = L L^T`.
#[derive(Debug, Clone, PartialEq)]
pub struct Cholesky {
    n: usize,
    l: Vec<f64>,
}

impl Cholesky {
    /// Factors `a`, returning `None` when a pivot is not strictly positive.
    pub fn factor(a: &[f64], n: usize) -> Option<Cholesky> {
        assert_eq!(a.len(), n * n, "matrix must be n x n");
        let mut l = vec![0.0; n * n];
        for j in 0..n {
            let row_j = j * n;
            let mut d = a[row_j + j];
            for k in 0..j {
                d -= l[row_j + k] * l[row_j + k];
            }
            if !(d > 0.0) || !d.is_finite() {
                return None;
            }
            let d = d.sqrt();
            l[row_j + j] = d;
            for i in j + 1..n {
                let row_i = i * n;
                let mut s = a[row_i + j];
                for k in 0..j {
                    s -= l[row_i + k] * l[row_j + k];
                }
                l[row_i + j] = s / d;
            }
        }
        Some(Cholesky { n, l })
    }

    /// Factors `a + jitter I`, starting at `jitter_lo` and multiplying by ten
    /// until the factorization succeeds or `jitter_hi` is exceeded.
    pub fn factor_with_jitter(a: &[f64], n: usize, jitter_lo: f64, jitter_hi: f64) -> Result<(Cholesky, f64)> {
        let mut jitter = jitter_lo;
        let mut work = a.to_vec();
        loop {
            for i in 0..n {
                work[i * n + i] = a[i * n + i] + jitter;
            }
            if let Some(c) = Cholesky::factor(&work, n) {
                return Ok((c, jitter));
            }
            // tolerate rounding in the last multiplication
            if jitter * 10.0 > jitter_hi * (1.0 + 1e-9) {
                return Err(Error::NotPositiveDefinite { jitter });
            }
            jitter *= 10.0;
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Entry `L[i][j]`.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.l[i * self.n + j]
    }

    /// Solves `L x = b` in place.
    pub fn solve_lower_in_place(&self, b: &mut [f64]) {
        let n = self.n;
        for i in 0..n {
            let row = &self.l[i * n..i * n + i];
            let mut s = b[i];
            for (lij, bj) in row.iter().zip(&b[..i]) {
                s -= lij * bj;
            }
            b[i] = s / self.l[i * n + i];
        }
    }

    /// Solves `L^T x = b` in place.
    pub fn solve_upper_in_place(&self, b: &mut [f64]) {
        let n = self.n;
        for i in (0..n).rev() {
            let mut s = b[i];
            for (j, bj) in b.iter().enumerate().skip(i + 1) {
                s -= self.l[j * n + i] * bj;
            }
            b[i] = s / self.l[i * n + i];
        }
    }

    /// Solves `A x = b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_lower_in_place(&mut x);
        self.solve_upper_in_place(&mut x);
        x
    }

    /// `log det A = 2 sum log L_ii`.
    pub fn log_det(&self) -> f64 {
        (0..self.n).map(|i| self.l[i * self.n + i].ln()).sum::<f64>() * 2.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::DMatrix;
    use proptest::prelude::*;

    fn spd(n: usize, seed: &[f64]) -> Vec<f64> {
        // B B^T + n I is well conditioned and SPD
        let b: Vec<f64> = (0..n * n)
            .map(|k| seed[k % seed.len()] * ((k as f64) * 0.7).sin())
            .collect();
        let mut a = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                a[i * n + j] = (0..n).map(|k| b[i * n + k] * b[j * n + k]).sum::<f64>();
            }
            a[i * n + i] += n as f64;
        }
        a
    }

    #[test]
    fn small_known_factor() {
        let a = [4.0, 2.0, 2.0, 5.0];
        let c = Cholesky::factor(&a, 2).unwrap();
        assert_eq!(c.get(0, 0), 2.0);
        assert_eq!(c.get(1, 0), 1.0);
        assert_eq!(c.get(1, 1), 2.0);
        assert_relative_eq!(c.log_det(), 16f64.ln(), max_relative = 1e-15);
        let x = c.solve(&[2.0, 1.0]);
        assert_relative_eq!(4.0 * x[0] + 2.0 * x[1], 2.0, max_relative = 1e-14);
        assert_relative_eq!(2.0 * x[0] + 5.0 * x[1], 1.0, max_relative = 1e-14);
    }

    #[test]
    fn indefinite_rejected() {
        assert!(Cholesky::factor(&[1.0, 2.0, 2.0, 1.0], 2).is_none());
        assert!(Cholesky::factor(&[0.0], 1).is_none());
    }

    #[test]
    fn jitter_escalates_on_singular_matrix() {
        let a = [1.0, 1.0, 1.0, 1.0];
        let (c, jitter) = Cholesky::factor_with_jitter(&a, 2, 1e-10, 1e-4).unwrap();
        assert!((1e-10..=1e-4).contains(&jitter));
        assert!(c.get(1, 1) > 0.0);
        let err = Cholesky::factor_with_jitter(&[-1.0], 1, 1e-10, 1e-4).unwrap_err();
        assert!(matches!(err, Error::NotPositiveDefinite { .. }));
    }

    proptest! {
        #[test]
        fn matches_dense_oracle(n in 1usize..12, seed in prop::collection::vec(-1.0f64..1.0, 1..20)) {
            let a = spd(n, &seed);
            let c = Cholesky::factor(&a, n).unwrap();
            let dense = DMatrix::from_row_slice(n, n, &a);
            let oracle = dense.clone().cholesky().unwrap();
            let b: Vec<f64> = (0..n).map(|i| (i as f64 + 1.0).cos()).collect();
            let x = c.solve(&b);
            let xo = oracle.solve(&nalgebra::DVector::from_column_slice(&b));
            for i in 0..n {
                prop_assert!((x[i] - xo[i]).abs() <= 1e-10 * (1.0 + xo[i].abs()));
            }
            let ld = dense.determinant().ln();
            prop_assert!((c.log_det() - ld).abs() <= 1e-9 * (1.0 + ld.abs()));
            // L L^T reproduces A
            for i in 0..n {
                for j in 0..=i {
                    let s: f64 = (0..=j).map(|k| c.get(i, k) * c.get(j, k)).sum();
                    prop_assert!((s - a[i * n + j]).abs() <= 1e-12 * a[i * n + i].abs().max(1.0));
                }
            }
        }
    }
}
