//! Drive-level fitting: approximate a target spectrum by a non-negative
//! combination of LED bases.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::linalg::lstsq_columns;
use crate::spectra::{LedBank, SpectralCurve, N_BANDS};
use crate::Scalar;

/// Weights at or below this count as zero.
pub const ZERO_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RealizationFit<T = f64> {
    pub weights: Vec<T>,
    /// `‖Σ w_k Φ^k − target‖₂`.
    pub residual_l2: T,
    pub active_count: usize,
}

impl<T: Scalar> RealizationFit<T> {
    pub fn active_indices(&self) -> Vec<usize> {
        self.weights
            .iter()
            .enumerate()
            .filter(|(_, &w)| w > T::lit(ZERO_TOLERANCE))
            .map(|(k, _)| k)
            .collect()
    }

    pub fn fitted_curve(&self, bank: &LedBank<T>) -> Result<SpectralCurve<T>> {
        bank.multiplex(&self.weights)
    }
}

fn residual<T: Scalar>(cols: &[&[T]], x: &[T], b: &[T]) -> Vec<T> {
    let mut r = b.to_vec();
    for (col, &xk) in cols.iter().zip(x) {
        if xk != T::zero() {
            for (ri, &a) in r.iter_mut().zip(col.iter()) {
                *ri = *ri - xk * a;
            }
        }
    }
    r
}

fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

/// Lawson–Hanson active-set solver for `min_{x ≥ 0} ‖A x − b‖₂`, `A` given by
/// columns.
pub fn nnls<T: Scalar>(cols: &[&[T]], b: &[T]) -> Result<Vec<T>> {
    let k = cols.len();
    for c in cols {
        check_len("NNLS column", b.len(), c.len())?;
    }
    let tol = T::lit(ZERO_TOLERANCE);
    let mut x = vec![T::zero(); k];
    let mut passive = vec![false; k];
    // Columns that could not join the passive set since it last changed.
    let mut blocked = vec![false; k];
    let max_outer = 3 * k.max(1) + 10;

    for _ in 0..max_outer {
        let r = residual(cols, &x, b);
        let w: Vec<T> = cols.iter().map(|c| dot(c, &r)).collect();
        let candidate = (0..k)
            .filter(|&j| !passive[j] && !blocked[j] && w[j] > tol)
            .max_by(|&a, &b| w[a].partial_cmp(&w[b]).unwrap());
        let Some(j) = candidate else {
            return Ok(x);
        };
        passive[j] = true;

        loop {
            let idx: Vec<usize> = (0..k).filter(|&i| passive[i]).collect();
            let sub: Vec<&[T]> = idx.iter().map(|&i| cols[i]).collect();
            let Some(z) = lstsq_columns(&sub, b) else {
                // j is dependent on the passive set: keep x, try another column.
                passive[j] = false;
                blocked[j] = true;
                break;
            };
            if z.iter().all(|&v| v > tol) {
                for (&i, &v) in idx.iter().zip(&z) {
                    x[i] = v;
                }
                blocked.iter_mut().for_each(|b| *b = false);
                break;
            }
            // Step toward z until the first passive weight hits zero.
            let mut alpha = T::one();
            for (&i, &zi) in idx.iter().zip(&z) {
                if zi <= tol {
                    let denom = x[i] - zi;
                    if denom > T::zero() {
                        alpha = alpha.min(x[i] / denom);
                    } else {
                        alpha = T::zero();
                    }
                }
            }
            for (&i, &zi) in idx.iter().zip(&z) {
                x[i] = x[i] + alpha * (zi - x[i]);
                if x[i] <= tol {
                    x[i] = T::zero();
                    passive[i] = false;
                }
            }
            if !passive.iter().any(|&p| p) {
                break;
            }
        }
    }
    Err(Error::Numerical("NNLS did not terminate".into()))
}

/// Non-negative drive levels reproducing `target` with `bank`. With
/// `max_active = Some(m)`, the `m` largest weights of the full fit are kept
/// and re-fitted alone.
pub fn fit_nnls<T: Scalar>(
    target: &SpectralCurve<T>,
    bank: &LedBank<T>,
    max_active: Option<usize>,
) -> Result<RealizationFit<T>> {
    if bank.is_empty() {
        return Err(Error::domain("LED bank is empty"));
    }
    if max_active == Some(0) {
        return Err(Error::domain("max_active must be ≥ 1"));
    }
    let cols: Vec<&[T]> = bank.bases().iter().map(|c| c.as_slice()).collect();
    let b = target.as_slice();
    let mut weights = nnls(&cols, b)?;

    if let Some(m) = max_active {
        let mut order: Vec<usize> = (0..weights.len())
            .filter(|&i| weights[i] > T::lit(ZERO_TOLERANCE))
            .collect();
        if order.len() > m {
            order.sort_by(|&a, &c| weights[c].partial_cmp(&weights[a]).unwrap().then(a.cmp(&c)));
            order.truncate(m);
            order.sort_unstable();
            let sub: Vec<&[T]> = order.iter().map(|&i| cols[i]).collect();
            let refit = nnls(&sub, b)?;
            weights = vec![T::zero(); weights.len()];
            for (&i, v) in order.iter().zip(refit) {
                weights[i] = v;
            }
        }
    }

    let r = residual(&cols, &weights, b);
    debug_assert_eq!(r.len(), N_BANDS);
    let residual_l2 = dot(&r, &r).sqrt();
    let active_count = weights
        .iter()
        .filter(|&&w| w > T::lit(ZERO_TOLERANCE))
        .count();
    Ok(RealizationFit {
        weights,
        residual_l2,
        active_count,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectra::LuminosityTables;
    use proptest::prelude::*;

    fn bank() -> LedBank<f64> {
        LedBank::default_bank(&LuminosityTables::cie().scotopic)
    }

    fn assert_kkt(bank: &LedBank<f64>, target: &SpectralCurve<f64>, fit: &RealizationFit<f64>) {
        let fitted = fit.fitted_curve(bank).unwrap();
        let r: Vec<f64> = (0..N_BANDS).map(|n| target[n] - fitted[n]).collect();
        for (k, &w) in fit.weights.iter().enumerate() {
            assert!(w >= 0.0);
            // Gradient of ½‖Aw − b‖² along base k.
            let g = -dot(bank.base(k).as_slice(), &r);
            if w > 0.0 {
                assert!(g.abs() <= 1e-6, "base {k}: gradient {g} at w = {w}");
            } else {
                assert!(g >= -1e-6, "base {k}: gradient {g} at zero weight");
            }
        }
    }

    #[test]
    fn exact_combination_is_recovered() {
        let bank = bank();
        let mut w = vec![0.0; bank.len()];
        w[3] = 0.7;
        w[11] = 1.3;
        w[20] = 0.25;
        let target = bank.multiplex(&w).unwrap();
        let fit = fit_nnls(&target, &bank, None).unwrap();
        for (a, b) in fit.weights.iter().zip(&w) {
            assert!((a - b).abs() <= 1e-8);
        }
        assert!(fit.residual_l2 <= 1e-8);
        assert_eq!(fit.active_indices(), vec![3, 11, 20]);
        assert_kkt(&bank, &target, &fit);
    }

    #[test]
    fn zero_target_gives_zero_weights() {
        let fit = fit_nnls(&SpectralCurve::zeros(), &bank(), None).unwrap();
        assert!(fit.weights.iter().all(|&w| w == 0.0));
        assert_eq!(fit.residual_l2, 0.0);
        assert_eq!(fit.active_count, 0);
    }

    #[test]
    fn single_base_is_one_hot() {
        let bank = bank();
        for j in [0, 9, 25] {
            let fit = fit_nnls(bank.base(j), &bank, None).unwrap();
            for (k, &w) in fit.weights.iter().enumerate() {
                let expect = if k == j { 1.0 } else { 0.0 };
                assert!((w - expect).abs() < 1e-10, "base {j}: w[{k}] = {w}");
            }
            assert!(fit.residual_l2 <= 1e-10);
        }
    }

    #[test]
    fn negative_target_parts_are_not_matched() {
        let bank = bank();
        let target = SpectralCurve::gaussian(600.0, 150.0);
        let fit = fit_nnls(&target, &bank, None).unwrap();
        assert_kkt(&bank, &target, &fit);
        assert!(fit.residual_l2 < 0.5);
    }

    #[test]
    fn max_active_limits_support() {
        let bank = bank();
        let target = SpectralCurve::from_fn(|nm| 0.5 + 0.4 * (nm / 60.0).sin()).unwrap();
        let full = fit_nnls(&target, &bank, None).unwrap();
        for m in 1..=8 {
            let fit = fit_nnls(&target, &bank, Some(m)).unwrap();
            assert!(fit.active_count <= m);
            assert!(fit.residual_l2 + 1e-12 >= full.residual_l2);
        }
        let all = fit_nnls(&target, &bank, Some(bank.len())).unwrap();
        assert_eq!(all, full);
        assert!(fit_nnls(&target, &bank, Some(0)).is_err());
    }

    #[test]
    fn dependent_columns_are_handled() {
        let base = SpectralCurve::gaussian(550.0, 40.0);
        let bank: LedBank<f64> = LedBank::new(
            vec![base, base, SpectralCurve::gaussian(700.0, 40.0)],
            &LuminosityTables::cie().scotopic,
        )
        .unwrap();
        let target = base.scaled(2.0).unwrap();
        let fit = fit_nnls(&target, &bank, None).unwrap();
        assert!(fit.residual_l2 < 1e-10);
        assert!((fit.weights[0] + fit.weights[1] - 2.0f64).abs() < 1e-10);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        #[test]
        fn kkt_holds_for_random_targets(vals in proptest::collection::vec(0.0f64..1.0, N_BANDS)) {
            let bank = bank();
            let target = SpectralCurve::from_slice(&vals).unwrap();
            let fit = fit_nnls(&target, &bank, None).unwrap();
            assert_kkt(&bank, &target, &fit);
        }

        #[test]
        fn restricted_fit_never_beats_full_fit(vals in proptest::collection::vec(0.0f64..1.0, N_BANDS), m in 1usize..26) {
            let bank = bank();
            let target = SpectralCurve::from_slice(&vals).unwrap();
            let full = fit_nnls(&target, &bank, None).unwrap();
            let part = fit_nnls(&target, &bank, Some(m)).unwrap();
            prop_assert!(part.active_count <= m);
            prop_assert!(part.residual_l2 + 1e-12 >= full.residual_l2);
        }
    }
}
