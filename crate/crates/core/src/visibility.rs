//! Visibility-constrained projection of LED weights.
//!
//! A multiplexed spectrum whose scotopic perceived power Ψ exceeds the
//! threshold Ψ̂ has every scotopically visible LED coefficient multiplied by
//! `ξ = min(Ψ̂ / (Ψ + ε), 1)`. LEDs the scotopic function cannot see keep their
//! coefficient; they contribute nothing to Ψ, so scaling them would only throw
//! away signal.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::spectra::{perceived_power, LedBank, SpectralCurve};
use crate::Scalar;

/// Default ε, in Ψ units.
pub const DEFAULT_EPSILON: f64 = 1e-9;

/// Logistic function, kept strictly inside (0, 1) even where the exact value
/// rounds to an endpoint.
pub fn logistic<T: Scalar>(z: T) -> T {
    let s = if z >= T::zero() {
        T::one() / (T::one() + (-z).exp())
    } else {
        let e = z.exp();
        e / (T::one() + e)
    };
    if s >= T::one() {
        T::one() - T::epsilon() / T::lit(2.0)
    } else if s <= T::zero() {
        T::min_positive_value()
    } else {
        s
    }
}

/// Inverse of [`logistic`] on (0, 1).
pub fn logit<T: Scalar>(s: T) -> Result<T> {
    if !(s > T::zero() && s < T::one()) {
        return Err(Error::domain(format!("logit of {s} outside (0, 1)")));
    }
    Ok((s / (T::one() - s)).ln())
}

/// LED weights `σ = logistic(logits)`, each strictly inside (0, 1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(
    serialize = "T: Serialize",
    deserialize = "T: Deserialize<'de> + Scalar"
))]
#[serde(try_from = "Vec<T>", into = "Vec<T>")]
pub struct DesignWeights<T: Scalar = f64> {
    logits: Vec<T>,
    sigma: Vec<T>,
}

impl<T: Scalar> DesignWeights<T> {
    pub fn from_logits(logits: Vec<T>) -> Result<Self> {
        if let Some(z) = logits.iter().find(|z| z.is_nan()) {
            return Err(Error::domain(format!("logit {z} is NaN")));
        }
        let sigma = logits.iter().map(|&z| logistic(z)).collect();
        Ok(Self { logits, sigma })
    }

    pub fn from_sigma(sigma: &[T]) -> Result<Self> {
        let logits = sigma
            .iter()
            .map(|&s| logit(s))
            .collect::<Result<Vec<_>>>()?;
        Self::from_logits(logits)
    }

    /// All weights equal to `σ`.
    pub fn uniform(k: usize, sigma: T) -> Result<Self> {
        Self::from_logits(vec![logit(sigma)?; k])
    }

    pub fn len(&self) -> usize {
        self.logits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.logits.is_empty()
    }

    pub fn logits(&self) -> &[T] {
        &self.logits
    }

    pub fn sigma(&self) -> &[T] {
        &self.sigma
    }
}

impl<T: Scalar> TryFrom<Vec<T>> for DesignWeights<T> {
    type Error = Error;

    fn try_from(logits: Vec<T>) -> Result<Self> {
        Self::from_logits(logits)
    }
}

impl<T: Scalar> From<DesignWeights<T>> for Vec<T> {
    fn from(w: DesignWeights<T>) -> Self {
        w.logits
    }
}

/// Outcome of [`project`].
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionResult<T = f64> {
    /// Projected coefficients σ̂.
    pub sigma_hat: Vec<T>,
    /// Scale factor ξ ∈ (0, 1].
    pub xi: T,
    /// Ψ of the unprojected spectrum.
    pub psi_before: T,
    /// Ψ of the projected spectrum.
    pub psi_after: T,
}

/// `min(Ψ̂ / (Ψ + ε), 1)`.
pub fn scale_factor<T: Scalar>(psi: T, psi_hat: T, epsilon: T) -> Result<T> {
    if !(psi_hat > T::zero()) {
        return Err(Error::domain(format!(
            "visibility threshold {psi_hat} must be > 0"
        )));
    }
    if !(epsilon > T::zero()) || !epsilon.is_finite() {
        return Err(Error::domain(format!(
            "epsilon {epsilon} must be finite and > 0"
        )));
    }
    if !(psi >= T::zero()) || !psi.is_finite() {
        return Err(Error::domain(format!(
            "perceived power {psi} must be finite and ≥ 0"
        )));
    }
    Ok((psi_hat / (psi + epsilon)).min(T::one()))
}

/// Projects raw coefficients onto the visibility constraint.
pub fn project_sigma<T: Scalar>(
    bank: &LedBank<T>,
    sigma: &[T],
    scotopic: &SpectralCurve<T>,
    psi_hat: T,
    epsilon: T,
) -> Result<ProjectionResult<T>> {
    check_len("LED weights", bank.len(), sigma.len())?;
    let psi_before = perceived_power(scotopic, &bank.multiplex(sigma)?);
    let xi = scale_factor(psi_before, psi_hat, epsilon)?;
    let sigma_hat: Vec<T> = sigma
        .iter()
        .zip(bank.vis_active())
        .map(|(&s, &active)| if active { xi * s } else { s })
        .collect();
    let psi_after = perceived_power(scotopic, &bank.multiplex(&sigma_hat)?);
    Ok(ProjectionResult {
        sigma_hat,
        xi,
        psi_before,
        psi_after,
    })
}

pub fn project<T: Scalar>(
    bank: &LedBank<T>,
    weights: &DesignWeights<T>,
    scotopic: &SpectralCurve<T>,
    psi_hat: T,
    epsilon: T,
) -> Result<ProjectionResult<T>> {
    project_sigma(bank, weights.sigma(), scotopic, psi_hat, epsilon)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectra::{LuminosityTables, WavelengthGrid};
    use proptest::prelude::*;

    fn scot() -> SpectralCurve<f64> {
        LuminosityTables::cie().scotopic
    }

    /// Independent Ψ oracle: explicit band loop.
    fn psi_oracle(bank: &LedBank<f64>, sigma: &[f64], lum: &SpectralCurve<f64>) -> f64 {
        let mut total = 0.0;
        for n in 0..48 {
            let mut phi = 0.0;
            for (k, b) in bank.bases().iter().enumerate() {
                phi += sigma[k] * b[n];
            }
            total += lum[n] * phi;
        }
        total
    }

    #[test]
    fn scale_factor_examples() {
        assert!((scale_factor(20.0f64, 10.0, 1e-9).unwrap() - 0.5).abs() < 1e-9);
        assert_eq!(scale_factor(5.0, 10.0, 1e-9).unwrap(), 1.0);
        assert_eq!(scale_factor(0.0, 10.0, 1e-9).unwrap(), 1.0);
        assert_eq!(scale_factor(1e6, f64::INFINITY, 1e-9).unwrap(), 1.0);
        assert!(scale_factor(1.0, 0.0, 1e-9).is_err());
        assert!(scale_factor(1.0, -1.0, 1e-9).is_err());
        assert!(scale_factor(1.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn logistic_stays_open() {
        assert!(logistic(800.0_f64) < 1.0);
        assert!(logistic(-800.0_f64) > 0.0);
        assert!((logistic(0.0_f64) - 0.5).abs() < 1e-15);
        assert!((logit(logistic(1.25_f64)).unwrap() - 1.25).abs() < 1e-12);
        assert!(logit(1.0_f64).is_err());
    }

    #[test]
    fn weights_serde_round_trip() {
        let w = DesignWeights::from_logits(vec![0.1, -2.0, 3.5]).unwrap();
        let s = serde_json::to_string(&w).unwrap();
        let back: DesignWeights<f64> = serde_json::from_str(&s).unwrap();
        assert_eq!(back, w);
    }

    #[test]
    fn nir_only_bank_is_left_alone() {
        let s = scot();
        let bank = LedBank::new(
            vec![
                SpectralCurve::gaussian(800.0, 20.0),
                SpectralCurve::gaussian(860.0, 20.0),
            ],
            &s,
        )
        .unwrap();
        let w = DesignWeights::from_sigma(&[0.9, 0.4]).unwrap();
        let r = project(&bank, &w, &s, 10.0, 1e-9).unwrap();
        assert_eq!(r.xi, 1.0);
        assert_eq!(r.sigma_hat, w.sigma());
        assert_eq!(r.psi_before, 0.0);
    }

    #[test]
    fn single_vis_base_at_twice_threshold_is_halved() {
        let s = scot();
        let base = SpectralCurve::<f64>::impulse(WavelengthGrid::band_of(510).unwrap());
        let bank = LedBank::new(vec![base], &s).unwrap();
        // Ψ(σ=0.5) = 850 → Ψ̂ = 425.
        let sigma = [0.5];
        let psi_hat = 425.0;
        let r = project_sigma(&bank, &sigma, &s, psi_hat, 1e-15).unwrap();
        assert!((r.sigma_hat[0] - 0.25).abs() < 1e-12);
        let after = psi_oracle(&bank, &r.sigma_hat, &s);
        assert!((after - psi_hat).abs() <= 1e-9 * psi_hat);
        assert!((r.psi_after - after).abs() <= 1e-12 * psi_hat);
    }

    #[test]
    fn mixed_bank_scales_only_vis_coefficient() {
        let s = scot();
        let vis = SpectralCurve::<f64>::impulse(WavelengthGrid::band_of(510).unwrap())
            .scaled(30.0 / 1700.0)
            .unwrap();
        let nir = SpectralCurve::gaussian(850.0, 20.0);
        let bank = LedBank::new(vec![vis, nir], &s).unwrap();
        let sigma = [1.0 - 1e-12, 0.6];
        let r = project_sigma(&bank, &sigma, &s, 10.0, 1e-9).unwrap();
        assert!((r.sigma_hat[0] / sigma[0] - 1.0 / 3.0).abs() < 1e-9);
        assert_eq!(r.sigma_hat[1].to_bits(), sigma[1].to_bits());
        let after = psi_oracle(&bank, &r.sigma_hat, &s);
        assert!((after - 10.0).abs() < 1e-8);
    }

    fn arb_case() -> impl Strategy<Value = (Vec<(f64, f64, f64)>, Vec<f64>, f64)> {
        (1usize..8).prop_flat_map(|k| {
            (
                prop::collection::vec((420.0f64..890.0, 10.0f64..80.0, 0.1f64..5.0), k),
                prop::collection::vec(0.001f64..0.999, k),
                0.01f64..500.0,
            )
        })
    }

    fn bank_from(spec: &[(f64, f64, f64)], s: &SpectralCurve<f64>) -> Option<LedBank<f64>> {
        let bases = spec
            .iter()
            .map(|&(c, w, a)| SpectralCurve::gaussian(c, w).scaled(a).unwrap())
            .collect();
        LedBank::new(bases, s).ok()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn projection_respects_threshold((spec, sigma, psi_hat) in arb_case()) {
            let s = scot();
            let Some(bank) = bank_from(&spec, &s) else { return Ok(()); };
            let r = project_sigma(&bank, &sigma, &s, psi_hat, 1e-9).unwrap();
            let after = psi_oracle(&bank, &r.sigma_hat, &s);
            prop_assert!(after <= psi_hat * (1.0 + 1e-9));
            prop_assert!(r.xi > 0.0 && r.xi <= 1.0);
        }

        #[test]
        fn projection_is_idempotent_on_compliant_weights((spec, sigma, psi_hat) in arb_case()) {
            let s = scot();
            let Some(bank) = bank_from(&spec, &s) else { return Ok(()); };
            let r = project_sigma(&bank, &sigma, &s, psi_hat, 1e-9).unwrap();
            if r.psi_before <= psi_hat {
                prop_assert_eq!(&r.sigma_hat, &sigma.to_vec());
            }
        }

        #[test]
        fn psi_after_monotone_in_threshold((spec, sigma, psi_hat) in arb_case(), factor in 1.0f64..10.0) {
            let s = scot();
            let Some(bank) = bank_from(&spec, &s) else { return Ok(()); };
            let lo = project_sigma(&bank, &sigma, &s, psi_hat, 1e-9).unwrap();
            let hi = project_sigma(&bank, &sigma, &s, psi_hat * factor, 1e-9).unwrap();
            prop_assert!(hi.psi_after >= lo.psi_after * (1.0 - 1e-12));
        }

        #[test]
        fn perceived_power_bilinear(a in 0.0f64..10.0, b in 0.0f64..10.0, c1 in 420.0f64..890.0, c2 in 420.0f64..890.0) {
            let s = scot();
            let p1 = SpectralCurve::<f64>::gaussian(c1, 30.0);
            let p2 = SpectralCurve::<f64>::gaussian(c2, 50.0);
            let mix = p1.scaled(a).unwrap().add(&p2.scaled(b).unwrap());
            let lhs = perceived_power(&s, &mix);
            let rhs = a * perceived_power(&s, &p1) + b * perceived_power(&s, &p2);
            prop_assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(rhs.abs()).max(1e-300));
        }
    }
}
