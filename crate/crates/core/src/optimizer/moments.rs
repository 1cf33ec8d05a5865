//! Closed-form objective and gradient from per-scene second moments.
//!
//! Every reconstructor feature and target is a linear functional of the pixel
//! reflectance, so a batch enters the objective only through
//! `S = Σ_p t̃_p t̃_pᵀ` with `t̃_p = [T_p(0..48), 1]`. With `F` (7×49) the
//! feature filters and `W` (3×49) the ground-truth filters:
//!
//! ```text
//! G = F S Fᵀ + D,  C = W S Fᵀ,  q = tr(W S Wᵀ),  M = C (G + λI)⁻¹
//! L = [tr(M G Mᵀ) − 2 tr(M Cᵀ) + q] / (3P)
//! ```
//!
//! `D` is zero for the noise-free objective. Under the expected-noise
//! variant it holds the per-feature noise energy `κ·Σ_p a_j(p) + P·s²`, and
//! the features are scaled by `ξ_vis`, `ξ_nir` as in the noisy pipeline.

use super::config::{DesignConfig, GradMode};
use super::objective::DesignProblem;
use crate::error::{Error, Result};
use crate::imaging::{band_scale_factors, HyperCube};
use crate::linalg::Cholesky;
use crate::spectra::{WavelengthGrid, N_BANDS};
use crate::visibility::{logistic, project_sigma};

const D: usize = N_BANDS + 1;
const NF: usize = 7;

/// `Σ_p t̃ t̃ᵀ` (49×49, row-major) and the pixel count.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct SceneMoments {
    s: Vec<f64>,
    pixels: usize,
}

impl SceneMoments {
    pub(crate) fn zeros() -> Self {
        Self {
            s: vec![0.0; D * D],
            pixels: 0,
        }
    }

    pub(crate) fn from_cube(cube: &HyperCube<f64>) -> Self {
        let mut s = vec![0.0; D * D];
        for i in 0..N_BANDS {
            let bi = cube.band(i);
            for j in i..N_BANDS {
                let v: f64 = bi.iter().zip(cube.band(j)).map(|(a, b)| a * b).sum();
                s[i * D + j] = v;
                s[j * D + i] = v;
            }
            let t: f64 = bi.iter().sum();
            s[i * D + N_BANDS] = t;
            s[N_BANDS * D + i] = t;
        }
        s[D * D - 1] = cube.pixels() as f64;
        Self {
            s,
            pixels: cube.pixels(),
        }
    }

    pub(crate) fn merge(&mut self, other: &Self) {
        for (a, b) in self.s.iter_mut().zip(&other.s) {
            *a += b;
        }
        self.pixels += other.pixels;
    }
}

/// Loss and its gradient with respect to the logits.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalyticEval {
    pub loss: f64,
    pub grad: Vec<f64>,
}

fn matmul(a: &[f64], b: &[f64], n: usize, k: usize, m: usize) -> Vec<f64> {
    let mut out = vec![0.0; n * m];
    for i in 0..n {
        for l in 0..k {
            let x = a[i * k + l];
            if x == 0.0 {
                continue;
            }
            for j in 0..m {
                out[i * m + j] += x * b[l * m + j];
            }
        }
    }
    out
}

fn transpose(a: &[f64], n: usize, m: usize) -> Vec<f64> {
    let mut t = vec![0.0; n * m];
    for i in 0..n {
        for j in 0..m {
            t[j * n + i] = a[i * m + j];
        }
    }
    t
}

impl DesignProblem {
    /// Closed-form loss and gradient over `batch`.
    ///
    /// With `GradMode::AnalyticExpectedNoise` and noise enabled, this is the
    /// expected-noise surrogate; otherwise it is the noise-free objective,
    /// equal to [`DesignProblem::objective`] with noise disabled.
    pub fn analytic(
        &self,
        logits: &[f64],
        batch: &[usize],
        config: &DesignConfig,
    ) -> Result<AnalyticEval> {
        if batch.is_empty() {
            return Err(Error::domain("empty batch"));
        }
        let mut mom = SceneMoments::zeros();
        for &i in batch {
            let m = self
                .moments()
                .get(i)
                .ok_or_else(|| Error::domain(format!("scene index {i} out of range")))?;
            mom.merge(m);
        }
        let expected = config.grad_mode == GradMode::AnalyticExpectedNoise && config.noise.enabled;
        self.analytic_from_moments(logits, &mom, config, expected)
    }

    fn analytic_from_moments(
        &self,
        logits: &[f64],
        mom: &SceneMoments,
        config: &DesignConfig,
        expected: bool,
    ) -> Result<AnalyticEval> {
        let bank = &self.bank;
        let k_bases = bank.len();
        let eps = config.epsilon;
        let lambda = config.ridge;
        let nv = WavelengthGrid::N_VIS;
        let s = &mom.s;
        let p = mom.pixels as f64;
        let n_elems = 3.0 * p;

        let sigma: Vec<f64> = logits.iter().map(|&z| logistic(z)).collect();
        let proj = project_sigma(bank, &sigma, &self.scotopic, config.psi_hat, eps)?;
        let phi = bank.multiplex(&sigma)?;
        let phi_hat = bank.multiplex(&proj.sigma_hat)?;
        let (xi_v, xi_n) = if expected {
            band_scale_factors(&phi, &phi_hat, eps)
        } else {
            (1.0, 1.0)
        };
        let (kappa, pattern_var) = if expected {
            (
                config.noise.kappa,
                config.noise.pattern_std * config.noise.pattern_std,
            )
        } else {
            (0.0, 0.0)
        };

        let cam: Vec<&[f64]> = (0..3).map(|c| self.camera.channel(c).as_slice()).collect();
        // Feature filters F (7×49) and ground-truth filters W (3×49).
        let mut f = vec![0.0; NF * D];
        let mut w = vec![0.0; 3 * D];
        for c in 0..3 {
            for n in 0..N_BANDS {
                if n < nv {
                    f[c * D + n] = xi_v * phi_hat[n] * cam[c][n];
                }
                f[(3 + c) * D + n] = xi_n * phi_hat[n] * cam[c][n];
                w[c * D + n] = self.white_led[n] * cam[c][n];
            }
        }
        f[6 * D + N_BANDS] = 1.0;

        let fs = matmul(&f, s, NF, D, D);
        let ft = transpose(&f, NF, D);
        let mut g = matmul(&fs, &ft, NF, D, NF);
        let z = matmul(&w, s, 3, D, D);
        let cmat = matmul(&z, &ft, 3, D, NF);
        let q: f64 = w.iter().zip(&z).map(|(a, b)| a * b).sum();
        for j in 0..6 {
            g[j * NF + j] += kappa * fs[j * D + N_BANDS] + p * pattern_var;
        }
        let mut g_lambda = g.clone();
        for j in 0..NF {
            g_lambda[j * NF + j] += lambda;
        }
        let chol = Cholesky::new(&g_lambda, NF, f64::EPSILON * 1e3)?;
        let ginv = chol.inverse();
        let m = matmul(&cmat, &ginv, 3, NF, NF);

        let mgm = matmul(&matmul(&m, &g, 3, NF, NF), &transpose(&m, 3, NF), 3, NF, 3);
        let tr_mgm = (0..3).map(|c| mgm[c * 3 + c]).sum::<f64>();
        let tr_mc: f64 = m.iter().zip(&cmat).map(|(a, b)| a * b).sum();
        let loss = (tr_mgm - 2.0 * tr_mc + q) / n_elems;

        // dL/dC and dL/dG (symmetric).
        let kmat = matmul(&m, &ginv, 3, NF, NF);
        let gamma_c: Vec<f64> = m
            .iter()
            .zip(&kmat)
            .map(|(a, b)| (-2.0 * a - 2.0 * lambda * b) / n_elems)
            .collect();
        let mt = transpose(&m, 3, NF);
        let mtm = matmul(&mt, &m, NF, 3, NF);
        let mtk = matmul(&mt, &kmat, NF, 3, NF);
        let mut gamma_g = vec![0.0; NF * NF];
        for i in 0..NF {
            for j in 0..NF {
                gamma_g[i * NF + j] =
                    (mtm[i * NF + j] + lambda * (mtk[i * NF + j] + mtk[j * NF + i])) / n_elems;
            }
        }

        // dL/dF = 2 Γ_G F S + Γ_Cᵀ W S, plus the noise-energy diagonal.
        let mut gf = matmul(&gamma_g, &fs, NF, NF, D);
        gf.iter_mut().for_each(|v| *v *= 2.0);
        let gct_z = matmul(&transpose(&gamma_c, 3, NF), &z, NF, 3, D);
        for (a, b) in gf.iter_mut().zip(&gct_z) {
            *a += b;
        }
        if kappa > 0.0 {
            for j in 0..6 {
                for mm in 0..D {
                    gf[j * D + mm] += gamma_g[j * NF + j] * kappa * s[mm * D + N_BANDS];
                }
            }
        }

        // Back to the VIS-light and full-light spectra.
        let mut g_u = [0.0; N_BANDS];
        let mut g_t = [0.0; N_BANDS];
        for n in 0..N_BANDS {
            for c in 0..3 {
                g_u[n] += gf[c * D + n] * cam[c][n];
                g_t[n] += gf[(3 + c) * D + n] * cam[c][n];
            }
        }
        let mut g_phi_hat = [0.0; N_BANDS];
        let mut g_phi = [0.0; N_BANDS];
        for n in 0..N_BANDS {
            let vis = if n < nv { 1.0 } else { 0.0 };
            g_phi_hat[n] = vis * xi_v * g_u[n] + xi_n * g_t[n];
        }
        if expected {
            let a: f64 = (0..nv).map(|n| phi_hat[n]).sum();
            let b: f64 = (0..nv).map(|n| phi[n]).sum();
            let a_all = phi_hat.sum();
            let b_all = phi.sum();
            let g_xv: f64 = (0..nv).map(|n| g_u[n] * phi_hat[n]).sum();
            let g_xn: f64 = (0..N_BANDS).map(|n| g_t[n] * phi_hat[n]).sum();
            for n in 0..N_BANDS {
                let vis = if n < nv { 1.0 } else { 0.0 };
                g_phi_hat[n] += vis * g_xv / (b + eps) + g_xn / (b_all + eps);
                g_phi[n] -= vis * g_xv * a / ((b + eps) * (b + eps))
                    + g_xn * a_all / ((b_all + eps) * (b_all + eps));
            }
        }

        // Through multiplexing and the projection.
        let xi = proj.xi;
        let mut g_sigma = vec![0.0; k_bases];
        let mut g_xi = 0.0;
        for k in 0..k_bases {
            let base = bank.base(k);
            let g_hat: f64 = (0..N_BANDS).map(|n| base[n] * g_phi_hat[n]).sum();
            let g_raw: f64 = (0..N_BANDS).map(|n| base[n] * g_phi[n]).sum();
            let active = bank.vis_active()[k];
            g_sigma[k] = g_raw + if active { xi * g_hat } else { g_hat };
            if active {
                g_xi += sigma[k] * g_hat;
            }
        }
        if xi < 1.0 {
            let denom = proj.psi_before + eps;
            let dxi_dpsi = -config.psi_hat / (denom * denom);
            for k in 0..k_bases {
                g_sigma[k] += g_xi * dxi_dpsi * bank.base_power()[k];
            }
        }
        let grad = g_sigma
            .iter()
            .zip(&sigma)
            .map(|(g, s)| g * s * (1.0 - s))
            .collect();
        Ok(AnalyticEval { loss, grad })
    }
}
