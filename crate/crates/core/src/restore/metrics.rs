use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::imaging::RgbImage;
use crate::Scalar;

/// PSNR reported for identical images.
pub const PSNR_CAP_DB: f64 = 99.0;

const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;
const SSIM_K1: f64 = 0.01;
const SSIM_K2: f64 = 0.03;

/// One line of an evaluation report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub scene_id: String,
    pub ssim: f64,
    pub psnr: f64,
    pub mse: f64,
}

/// Mean squared error over all `3·W·H` elements.
pub fn mse_loss<T: Scalar>(x: &RgbImage<T>, y: &RgbImage<T>) -> Result<T> {
    x.same_size(y)?;
    let n = T::from_usize(x.data().len()).unwrap();
    Ok(x.data()
        .iter()
        .zip(y.data())
        .map(|(&a, &b)| (a - b) * (a - b))
        .sum::<T>()
        / n)
}

/// `10·log10(peak² / MSE)`, capped at [`PSNR_CAP_DB`].
pub fn psnr<T: Scalar>(x: &RgbImage<T>, y: &RgbImage<T>, peak: T) -> Result<T> {
    let mse = mse_loss(x, y)?;
    let cap = T::lit(PSNR_CAP_DB);
    if mse == T::zero() {
        return Ok(cap);
    }
    Ok((T::lit(10.0) * (peak * peak / mse).log10()).min(cap))
}

fn gaussian_window(size: usize) -> Vec<f64> {
    let r = (size / 2) as f64;
    let w: Vec<f64> = (0..size)
        .map(|i| (-0.5 * ((i as f64 - r) / SSIM_SIGMA).powi(2)).exp())
        .collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|v| v / s).collect()
}

/// Separable "valid" filtering of a `w × h` plane.
fn filter_valid(plane: &[f64], w: usize, h: usize, win: &[f64]) -> (Vec<f64>, usize, usize) {
    let k = win.len();
    let (ow, oh) = (w - k + 1, h - k + 1);
    let mut tmp = vec![0.0; ow * h];
    for y in 0..h {
        for x in 0..ow {
            tmp[y * ow + x] = (0..k).map(|i| win[i] * plane[y * w + x + i]).sum();
        }
    }
    let mut out = vec![0.0; ow * oh];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = (0..k).map(|i| win[i] * tmp[(y + i) * ow + x]).sum();
        }
    }
    (out, ow, oh)
}

/// Mean SSIM over the three channels with an 11×11 Gaussian window (σ = 1.5),
/// K1 = 0.01, K2 = 0.03 and dynamic range 1. Only windows that fit inside the
/// image are used; images smaller than 11 pixels on a side use the largest odd
/// window that fits.
pub fn ssim<T: Scalar>(x: &RgbImage<T>, y: &RgbImage<T>) -> Result<T> {
    x.same_size(y)?;
    let (w, h) = (x.width(), x.height());
    let mut size = SSIM_WINDOW.min(w).min(h);
    if size % 2 == 0 {
        size -= 1;
    }
    let win = gaussian_window(size.max(1));
    let c1 = SSIM_K1 * SSIM_K1;
    let c2 = SSIM_K2 * SSIM_K2;
    let mut total = 0.0;
    for c in 0..3 {
        let a: Vec<f64> = x.channel(c).iter().map(|v| v.to_f64_lossy()).collect();
        let b: Vec<f64> = y.channel(c).iter().map(|v| v.to_f64_lossy()).collect();
        let aa: Vec<f64> = a.iter().map(|v| v * v).collect();
        let bb: Vec<f64> = b.iter().map(|v| v * v).collect();
        let ab: Vec<f64> = a.iter().zip(&b).map(|(u, v)| u * v).collect();
        let (mu_a, ..) = filter_valid(&a, w, h, &win);
        let (mu_b, ..) = filter_valid(&b, w, h, &win);
        let (e_aa, ..) = filter_valid(&aa, w, h, &win);
        let (e_bb, ..) = filter_valid(&bb, w, h, &win);
        let (e_ab, ..) = filter_valid(&ab, w, h, &win);
        let mut sum = 0.0;
        for i in 0..mu_a.len() {
            let (ma, mb) = (mu_a[i], mu_b[i]);
            let va = e_aa[i] - ma * ma;
            let vb = e_bb[i] - mb * mb;
            let cov = e_ab[i] - ma * mb;
            sum += ((2.0 * ma * mb + c1) * (2.0 * cov + c2))
                / ((ma * ma + mb * mb + c1) * (va + vb + c2));
        }
        total += sum / mu_a.len() as f64;
    }
    Ok(T::lit(total / 3.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pattern(w: usize, h: usize, f: impl Fn(usize, usize, usize) -> f64) -> RgbImage<f64> {
        let mut d = Vec::with_capacity(3 * w * h);
        for c in 0..3 {
            for y in 0..h {
                for x in 0..w {
                    d.push(f(c, x, y));
                }
            }
        }
        RgbImage::new(w, h, d).unwrap()
    }

    fn base(c: usize, x: usize, y: usize) -> f64 {
        0.5 + 0.4 * (0.3 * x as f64 + 0.2 * y as f64 + c as f64).sin()
    }

    #[test]
    fn mse_examples() {
        let x = pattern(6, 5, base);
        assert_eq!(mse_loss(&x, &x).unwrap(), 0.0);
        let y = x.map(|v| v + 0.1);
        assert!((mse_loss(&y, &x).unwrap() - 0.01).abs() < 1e-15);
    }

    #[test]
    fn mse_matches_brute_force() {
        let x = pattern(7, 3, base);
        let y = pattern(7, 3, |c, x, y| {
            ((c * 31 + x * 7 + y * 13) % 17) as f64 / 16.0
        });
        let mut s = 0.0;
        for c in 0..3 {
            for yy in 0..3 {
                for xx in 0..7 {
                    s += (x.get(c, xx, yy) - y.get(c, xx, yy)).powi(2);
                }
            }
        }
        assert!((mse_loss(&x, &y).unwrap() - s / 63.0).abs() < 1e-15);
    }

    #[test]
    fn psnr_examples() {
        let x = pattern(4, 4, base);
        assert_eq!(psnr(&x, &x, 1.0).unwrap(), PSNR_CAP_DB);
        assert!((psnr(&x.map(|v| v + 0.1), &x, 1.0).unwrap() - 20.0).abs() < 1e-9);
        assert!((psnr(&x.map(|v| v + 0.01), &x, 1.0).unwrap() - 40.0).abs() < 1e-9);
        let p1 = psnr(&x.map(|v| v + 0.02), &x, 1.0).unwrap();
        let p2 = psnr(&x.map(|v| v + 0.03), &x, 1.0).unwrap();
        assert!(p1 > p2);
    }

    #[test]
    fn ssim_identity_and_inversion() {
        let x = pattern(32, 24, base);
        assert!((ssim(&x, &x).unwrap() - 1.0).abs() < 1e-12);
        let inv = x.map(|v| 1.0 - v);
        assert!(ssim(&x, &inv).unwrap() < 1.0);
        let small = pattern(5, 4, base);
        assert!((ssim(&small, &small).unwrap() - 1.0).abs() < 1e-12);
    }

    /// Brute-force SSIM: explicit 11×11 windows, no separability.
    fn ssim_oracle(x: &RgbImage<f64>, y: &RgbImage<f64>) -> f64 {
        let win1 = gaussian_window(11);
        let (w, h) = (x.width(), x.height());
        let mut total = 0.0;
        for c in 0..3 {
            let mut s = 0.0;
            let mut n = 0;
            for oy in 0..=h - 11 {
                for ox in 0..=w - 11 {
                    let (mut ma, mut mb, mut eaa, mut ebb, mut eab) = (0.0, 0.0, 0.0, 0.0, 0.0);
                    for j in 0..11 {
                        for i in 0..11 {
                            let wt = win1[i] * win1[j];
                            let a = x.get(c, ox + i, oy + j);
                            let b = y.get(c, ox + i, oy + j);
                            ma += wt * a;
                            mb += wt * b;
                            eaa += wt * a * a;
                            ebb += wt * b * b;
                            eab += wt * a * b;
                        }
                    }
                    let (c1, c2) = (1e-4, 9e-4);
                    s += ((2.0 * ma * mb + c1) * (2.0 * (eab - ma * mb) + c2))
                        / ((ma * ma + mb * mb + c1) * (eaa - ma * ma + ebb - mb * mb + c2));
                    n += 1;
                }
            }
            total += s / n as f64;
        }
        total / 3.0
    }

    #[test]
    fn ssim_matches_brute_force_and_reference() {
        let x = pattern(24, 20, base);
        let y = pattern(24, 20, |c, x, y| {
            base(c, x, y) + 0.05 * (0.7 * x as f64 * y as f64 + c as f64).cos()
        });
        let got = ssim(&x, &y).unwrap();
        assert!((got - ssim_oracle(&x, &y)).abs() < 1e-12);
        // scikit-image structural_similarity(gaussian_weights=True, sigma=1.5,
        // use_sample_covariance=False, data_range=1.0) on the same pair.
        assert!((got - REFERENCE_SSIM).abs() < 1e-6, "{got}");
    }

    #[test]
    fn ssim_tiny_noise_is_near_one() {
        let x = pattern(32, 32, base);
        let y = pattern(32, 32, |c, x, y| {
            base(c, x, y) + 1e-4 * (((c * 7 + x * 13 + y * 29) % 11) as f64 / 5.0 - 1.0)
        });
        let got = ssim(&x, &y).unwrap();
        assert!(got >= 0.99);
        assert!((got - ssim_oracle(&x, &y)).abs() < 1e-12);
    }

    const REFERENCE_SSIM: f64 = 0.959_536_794_675_938_2;
}
