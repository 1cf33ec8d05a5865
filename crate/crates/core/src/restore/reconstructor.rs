//! Per-pixel affine map from the VIS and full-band images to RGB, fitted in
//! closed form by ridge-regularised least squares.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::RgbImage;
use crate::linalg::Cholesky;
use crate::Scalar;

/// Inputs per pixel: VIS R, G, B, full-band R, G, B, and a constant 1.
pub const N_FEATURES: usize = 7;

/// Default ridge weight.
pub const DEFAULT_RIDGE: f64 = 1e-6;

/// `X = M · [vis; nir; 1]` per pixel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearReconstructor<T = f64> {
    pub matrix: [[T; N_FEATURES]; 3],
    pub ridge: T,
}

/// Running sums `Σ a aᵀ`, `Σ y aᵀ` and `Σ ‖y‖²` over pixels.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalEquations<T = f64> {
    pub gram: [[T; N_FEATURES]; N_FEATURES],
    pub cross: [[T; N_FEATURES]; 3],
    pub target_energy: T,
    pub count: usize,
}

impl<T: Scalar> Default for NormalEquations<T> {
    fn default() -> Self {
        Self {
            gram: [[T::zero(); N_FEATURES]; N_FEATURES],
            cross: [[T::zero(); N_FEATURES]; 3],
            target_energy: T::zero(),
            count: 0,
        }
    }
}

pub(crate) fn features<T: Scalar>(
    vis: &RgbImage<T>,
    nir: &RgbImage<T>,
    p: usize,
) -> [T; N_FEATURES] {
    let n = vis.pixels();
    let (v, r) = (vis.data(), nir.data());
    [
        v[p],
        v[n + p],
        v[2 * n + p],
        r[p],
        r[n + p],
        r[2 * n + p],
        T::one(),
    ]
}

impl<T: Scalar> NormalEquations<T> {
    pub fn from_images(vis: &RgbImage<T>, nir: &RgbImage<T>, target: &RgbImage<T>) -> Result<Self> {
        vis.same_size(nir)?;
        vis.same_size(target)?;
        let mut eq = Self::default();
        let n = vis.pixels();
        let y = target.data();
        for p in 0..n {
            let a = features(vis, nir, p);
            for i in 0..N_FEATURES {
                for j in i..N_FEATURES {
                    eq.gram[i][j] = eq.gram[i][j] + a[i] * a[j];
                }
            }
            for c in 0..3 {
                let yc = y[c * n + p];
                for j in 0..N_FEATURES {
                    eq.cross[c][j] = eq.cross[c][j] + yc * a[j];
                }
                eq.target_energy = eq.target_energy + yc * yc;
            }
        }
        for i in 0..N_FEATURES {
            for j in 0..i {
                eq.gram[i][j] = eq.gram[j][i];
            }
        }
        eq.count = n;
        Ok(eq)
    }

    /// Adds another set of sums (e.g. another image of the batch).
    pub fn merge(&mut self, other: &Self) {
        for i in 0..N_FEATURES {
            for j in 0..N_FEATURES {
                self.gram[i][j] = self.gram[i][j] + other.gram[i][j];
            }
        }
        for c in 0..3 {
            for j in 0..N_FEATURES {
                self.cross[c][j] = self.cross[c][j] + other.cross[c][j];
            }
        }
        self.target_energy = self.target_energy + other.target_energy;
        self.count += other.count;
    }

    /// Solves `M (G + λI) = C`.
    pub fn solve(&self, ridge: T) -> Result<LinearReconstructor<T>> {
        if !(ridge >= T::zero()) || !ridge.is_finite() {
            return Err(Error::domain(format!(
                "ridge {ridge} must be finite and ≥ 0"
            )));
        }
        let mut g = vec![T::zero(); N_FEATURES * N_FEATURES];
        for i in 0..N_FEATURES {
            for j in 0..N_FEATURES {
                g[i * N_FEATURES + j] = self.gram[i][j];
            }
            g[i * N_FEATURES + i] = g[i * N_FEATURES + i] + ridge;
        }
        let tol = T::epsilon() * T::lit(1e3);
        let chol = Cholesky::new(&g, N_FEATURES, tol)?;
        let mut matrix = [[T::zero(); N_FEATURES]; 3];
        for (c, row) in matrix.iter_mut().enumerate() {
            let mut rhs = self.cross[c];
            chol.solve_in_place(&mut rhs);
            if rhs.iter().any(|v| !v.is_finite()) {
                return Err(Error::Numerical(
                    "non-finite reconstructor coefficient".into(),
                ));
            }
            *row = rhs;
        }
        Ok(LinearReconstructor { matrix, ridge })
    }
}

/// Minimises `Σ_p ‖M a_p − y_p‖² + ridge·‖M‖²_F` over one image triple.
pub fn fit_reconstructor<T: Scalar>(
    vis: &RgbImage<T>,
    nir: &RgbImage<T>,
    target: &RgbImage<T>,
    ridge: T,
) -> Result<LinearReconstructor<T>> {
    NormalEquations::from_images(vis, nir, target)?.solve(ridge)
}

/// Same objective pooled over several image triples.
pub fn fit_reconstructor_pooled<T: Scalar>(
    samples: &[(&RgbImage<T>, &RgbImage<T>, &RgbImage<T>)],
    ridge: T,
) -> Result<LinearReconstructor<T>> {
    let mut eq = NormalEquations::default();
    for (v, n, t) in samples {
        eq.merge(&NormalEquations::from_images(v, n, t)?);
    }
    eq.solve(ridge)
}

pub fn apply_reconstructor<T: Scalar>(
    model: &LinearReconstructor<T>,
    vis: &RgbImage<T>,
    nir: &RgbImage<T>,
) -> Result<RgbImage<T>> {
    vis.same_size(nir)?;
    let n = vis.pixels();
    let mut out = RgbImage::zeros(vis.width(), vis.height());
    let data: &mut [T] = out.data_mut();
    for p in 0..n {
        let a = features(vis, nir, p);
        for c in 0..3 {
            data[c * n + p] = model.matrix[c].iter().zip(&a).map(|(&m, &x)| m * x).sum();
        }
    }
    if data.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical(
            "reconstruction produced a non-finite value".into(),
        ));
    }
    Ok(out)
}
