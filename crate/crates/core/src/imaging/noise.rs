//! Camera noise: `Î = κ·Poisson(I·ξ/κ) + N`.
//!
//! Every image element draws from its own ChaCha stream, selected by the
//! element's linear index `c·W·H + y·W + x` under a key derived from the model
//! seed. Results therefore do not depend on iteration order, and serial and
//! parallel execution agree bit for bit.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use super::RgbImage;
use crate::error::{Error, Result};
use crate::Scalar;

const TAG_POISSON: u64 = 0x706f_6973_736f_6e00;
const TAG_PATTERN: u64 = 0x7061_7474_6572_6e00;
const TAG_BANK: u64 = 0x6261_6e6b_0000_0000;

/// Below this mean the Poisson sampler inverts the CDF; at or above it uses
/// transformed rejection (PTRS).
const INVERSION_LIMIT: f64 = 10.0;

/// Where the additive pattern `N` comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum PatternSource<T = f64> {
    /// No additive pattern.
    None,
    /// Seeded zero-mean Gaussian field with this standard deviation.
    Gaussian { std: T },
    /// Patterns sampled from a camera; one is picked per call from the seed.
    Bank(Vec<RgbImage<T>>),
}

impl<T: Scalar> PatternSource<T> {
    /// Per-element variance of the pattern. For a bank this is the pooled
    /// empirical variance.
    pub fn variance(&self) -> T {
        match self {
            PatternSource::None => T::zero(),
            PatternSource::Gaussian { std } => *std * *std,
            PatternSource::Bank(bank) => {
                let n: usize = bank.iter().map(|b| b.data().len()).sum();
                if n == 0 {
                    return T::zero();
                }
                let nf = T::from_usize(n).unwrap();
                let mean = bank
                    .iter()
                    .flat_map(|b| b.data().iter().copied())
                    .sum::<T>()
                    / nf;
                bank.iter()
                    .flat_map(|b| b.data().iter().map(move |&v| (v - mean) * (v - mean)))
                    .sum::<T>()
                    / nf
            }
        }
    }
}

/// Camera gain, pattern source and seed.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseModel<T = f64> {
    pub kappa: T,
    pub pattern: PatternSource<T>,
    pub seed: u64,
}

impl<T: Scalar> NoiseModel<T> {
    pub fn new(kappa: T, pattern: PatternSource<T>, seed: u64) -> Result<Self> {
        if !(kappa > T::zero()) || !kappa.is_finite() {
            return Err(Error::domain(format!(
                "camera gain κ = {kappa} must be finite and > 0"
            )));
        }
        if let PatternSource::Gaussian { std } = &pattern {
            if !(*std >= T::zero()) || !std.is_finite() {
                return Err(Error::domain(format!(
                    "pattern std {std} must be finite and ≥ 0"
                )));
            }
        }
        if let PatternSource::Bank(b) = &pattern {
            if b.is_empty() {
                return Err(Error::domain("pattern bank is empty"));
            }
        }
        Ok(Self {
            kappa,
            pattern,
            seed,
        })
    }

    /// Same gain and pattern with a different seed.
    pub fn reseeded(&self, seed: u64) -> Self {
        Self {
            seed,
            ..self.clone()
        }
    }
}

/// How [`add_noise_with`] walks the image.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Serial,
    #[default]
    Parallel,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a seed with a path of integers into a new 64-bit seed.
pub fn derive_seed(seed: u64, parts: &[u64]) -> u64 {
    parts.iter().fold(splitmix64(seed), |acc, &p| {
        splitmix64(acc ^ splitmix64(p.wrapping_add(0x632B_E59B_D9B4_E019)))
    })
}

fn stream_key(seed: u64, tag: u64) -> <ChaCha8Rng as SeedableRng>::Seed {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, &[tag])).get_seed()
}

fn element_rng(key: &<ChaCha8Rng as SeedableRng>::Seed, element: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::from_seed(*key);
    rng.set_stream(element as u64);
    rng
}

/// `ln(k!)`: table for small k, Stirling series beyond.
fn ln_factorial(k: u64) -> f64 {
    const TABLE: [f64; 10] = [
        0.0,
        0.0,
        std::f64::consts::LN_2,
        1.791_759_469_228_055,
        3.178_053_830_347_945_6,
        4.787_491_742_782_046,
        6.579_251_212_010_101,
        8.525_161_361_065_415,
        10.604_602_902_745_25,
        12.801_827_480_081_469,
    ];
    if let Some(v) = TABLE.get(k as usize) {
        return *v;
    }
    let x = k as f64 + 1.0;
    let x2 = x * x;
    (x - 0.5) * x.ln() - x + 0.5 * (2.0 * std::f64::consts::PI).ln() + 1.0 / (12.0 * x)
        - 1.0 / (360.0 * x * x2)
        + 1.0 / (1260.0 * x2 * x2 * x)
}

/// Draws from Poisson(`mean`): CDF inversion for small means, Hörmann's
/// transformed rejection with squeeze (PTRS) otherwise.
pub fn sample_poisson<R: Rng + ?Sized>(rng: &mut R, mean: f64) -> u64 {
    debug_assert!(mean >= 0.0 && mean.is_finite());
    if mean <= 0.0 {
        return 0;
    }
    if mean < INVERSION_LIMIT {
        let u: f64 = rng.random();
        let mut p = (-mean).exp();
        let mut cdf = p;
        let mut k = 0u64;
        while u > cdf && k < 1000 {
            k += 1;
            p *= mean / k as f64;
            cdf += p;
            if p == 0.0 {
                break;
            }
        }
        return k;
    }
    let slam = mean.sqrt();
    let loglam = mean.ln();
    let b = 0.931 + 2.53 * slam;
    let a = -0.059 + 0.02483 * b;
    let inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
    let v_r = 0.9277 - 3.6224 / (b - 2.0);
    loop {
        let u = rng.random::<f64>() - 0.5;
        let v: f64 = rng.random();
        let us = 0.5 - u.abs();
        let k = ((2.0 * a / us + b) * u + mean + 0.43).floor();
        if us >= 0.07 && v <= v_r {
            return k as u64;
        }
        if k < 0.0 || (us < 0.013 && v > us) {
            continue;
        }
        let lhs = v.ln() + inv_alpha.ln() - (a / (us * us) + b).ln();
        let rhs = -mean + k * loglam - ln_factorial(k as u64);
        if lhs <= rhs {
            return k as u64;
        }
    }
}

/// [`add_noise_with`] using parallel execution.
pub fn add_noise<T: Scalar>(
    image: &RgbImage<T>,
    xi: T,
    model: &NoiseModel<T>,
) -> Result<RgbImage<T>> {
    add_noise_with(image, xi, model, Execution::Parallel)
}

/// Applies `κ·Poisson(I·ξ/κ) + N` element-wise. The output is not clamped.
pub fn add_noise_with<T: Scalar>(
    image: &RgbImage<T>,
    xi: T,
    model: &NoiseModel<T>,
    exec: Execution,
) -> Result<RgbImage<T>> {
    if !(model.kappa > T::zero()) || !model.kappa.is_finite() {
        return Err(Error::domain(format!(
            "camera gain κ = {} must be finite and > 0",
            model.kappa
        )));
    }
    if !(xi > T::zero() && xi <= T::one()) {
        return Err(Error::domain(format!(
            "scale factor ξ = {xi} outside (0, 1]"
        )));
    }
    if let Some(v) = image
        .data()
        .iter()
        .find(|v| !(**v >= T::zero()) || !v.is_finite())
    {
        return Err(Error::domain(format!(
            "image value {v} must be finite and ≥ 0"
        )));
    }
    let bank_pattern = match &model.pattern {
        PatternSource::Bank(bank) => {
            let idx = (derive_seed(model.seed, &[TAG_BANK]) % bank.len() as u64) as usize;
            let pat = &bank[idx];
            image.same_size(pat)?;
            Some(pat)
        }
        _ => None,
    };
    let poisson_key = stream_key(model.seed, TAG_POISSON);
    let pattern_key = stream_key(model.seed, TAG_PATTERN);
    let kappa = model.kappa.to_f64_lossy();
    let scale = xi.to_f64_lossy() / kappa;

    let sample = |e: usize, value: T| -> T {
        let mean = value.to_f64_lossy() * scale;
        let count = sample_poisson(&mut element_rng(&poisson_key, e), mean);
        let shot = T::lit(kappa * count as f64);
        let pattern = match (&model.pattern, bank_pattern) {
            (PatternSource::Gaussian { std }, _) if *std > T::zero() => {
                let z: f64 = element_rng(&pattern_key, e).sample(StandardNormal);
                *std * T::lit(z)
            }
            (_, Some(pat)) => pat.data()[e],
            _ => T::zero(),
        };
        shot + pattern
    };

    let data: Vec<T> = match exec {
        Execution::Serial => image
            .data()
            .iter()
            .enumerate()
            .map(|(e, &v)| sample(e, v))
            .collect(),
        Execution::Parallel => image
            .data()
            .par_iter()
            .enumerate()
            .map(|(e, &v)| sample(e, v))
            .collect(),
    };
    RgbImage::new(image.width(), image.height(), data)
}
