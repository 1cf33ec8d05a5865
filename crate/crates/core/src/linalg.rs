//! Small dense kernels: Cholesky for the reconstructor's normal equations and
//! Householder least squares for the active-set NNLS solver.
//!
//! Matrices are row-major `&[T]` with explicit dimensions. Sizes here never
//! exceed 49×49, so there is no blocking.

use crate::error::{Error, Result};
use crate::Scalar;

/// Lower-triangular Cholesky factor of a symmetric positive definite matrix.
#[derive(Debug, Clone)]
pub struct Cholesky<T> {
    n: usize,
    l: Vec<T>,
}

impl<T: Scalar> Cholesky<T> {
    /// Factors `a` (n×n, row-major). A pivot at or below `rel_tol` times the
    /// largest diagonal entry is reported as a rank error.
    pub fn new(a: &[T], n: usize, rel_tol: T) -> Result<Self> {
        assert_eq!(a.len(), n * n, "cholesky: matrix is not n×n");
        let scale = (0..n)
            .map(|i| a[i * n + i].abs())
            .fold(T::zero(), T::max)
            .max(T::min_positive_value());
        let mut l = vec![T::zero(); n * n];
        for j in 0..n {
            let mut d = a[j * n + j];
            for k in 0..j {
                d = d - l[j * n + k] * l[j * n + k];
            }
            if !(d > rel_tol * scale) {
                return Err(Error::Rank {
                    column: j,
                    pivot: d.to_f64_lossy(),
                });
            }
            let d = d.sqrt();
            l[j * n + j] = d;
            for i in (j + 1)..n {
                let mut s = a[i * n + j];
                for k in 0..j {
                    s = s - l[i * n + k] * l[j * n + k];
                }
                l[i * n + j] = s / d;
            }
        }
        Ok(Self { n, l })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Solves `A x = b` in place.
    pub fn solve_in_place(&self, b: &mut [T]) {
        let n = self.n;
        for i in 0..n {
            let mut s = b[i];
            for k in 0..i {
                s = s - self.l[i * n + k] * b[k];
            }
            b[i] = s / self.l[i * n + i];
        }
        for i in (0..n).rev() {
            let mut s = b[i];
            for k in (i + 1)..n {
                s = s - self.l[k * n + i] * b[k];
            }
            b[i] = s / self.l[i * n + i];
        }
    }

    /// Dense inverse, row-major.
    pub fn inverse(&self) -> Vec<T> {
        let n = self.n;
        let mut inv = vec![T::zero(); n * n];
        let mut col = vec![T::zero(); n];
        for j in 0..n {
            col.iter_mut().for_each(|c| *c = T::zero());
            col[j] = T::one();
            self.solve_in_place(&mut col);
            for i in 0..n {
                inv[i * n + j] = col[i];
            }
        }
        inv
    }
}

/// Least-squares solution of `min ‖A x − b‖₂` for a tall `m×n` matrix given as
/// columns (`cols[k]` has length `m`), via Householder QR.
///
/// Returns `None` when a column is (numerically) dependent on earlier ones.
pub fn lstsq_columns<T: Scalar>(cols: &[&[T]], b: &[T]) -> Option<Vec<T>> {
    let n = cols.len();
    if n == 0 {
        return Some(Vec::new());
    }
    let m = b.len();
    if m < n || cols.iter().any(|c| c.len() != m) {
        return None;
    }
    // Column-major working copy.
    let mut a: Vec<Vec<T>> = cols.iter().map(|c| c.to_vec()).collect();
    let mut rhs = b.to_vec();
    let norm0 = a
        .iter()
        .map(|c| c.iter().map(|&v| v * v).sum::<T>().sqrt())
        .fold(T::zero(), T::max);
    let tol = norm0 * T::epsilon() * T::lit(64.0) * T::from_usize(m).unwrap_or_else(T::one);

    for k in 0..n {
        let alpha = a[k][k..].iter().map(|&v| v * v).sum::<T>().sqrt();
        if !(alpha > tol) {
            return None;
        }
        let alpha = if a[k][k] > T::zero() { -alpha } else { alpha };
        let mut v: Vec<T> = a[k][k..].to_vec();
        v[0] = v[0] - alpha;
        let vnorm2: T = v.iter().map(|&x| x * x).sum();
        if vnorm2 > T::zero() {
            for col in a.iter_mut().skip(k) {
                let dot: T = v.iter().zip(&col[k..]).map(|(&x, &y)| x * y).sum();
                let f = dot * T::lit(2.0) / vnorm2;
                for (c, &vi) in col[k..].iter_mut().zip(&v) {
                    *c = *c - f * vi;
                }
            }
            let dot: T = v.iter().zip(&rhs[k..]).map(|(&x, &y)| x * y).sum();
            let f = dot * T::lit(2.0) / vnorm2;
            for (r, &vi) in rhs[k..].iter_mut().zip(&v) {
                *r = *r - f * vi;
            }
        }
    }

    let mut x = vec![T::zero(); n];
    for i in (0..n).rev() {
        let mut s = rhs[i];
        for j in (i + 1)..n {
            s = s - a[j][i] * x[j];
        }
        x[i] = s / a[i][i];
    }
    Some(x)
}
