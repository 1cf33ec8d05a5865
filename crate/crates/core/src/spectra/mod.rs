//! The shared wavelength grid, spectral curves, human luminosity functions and
//! LED multiplexing.

mod csv_io;
pub mod tables;

use std::ops::Index;

pub use csv_io::{
    read_bank_csv, read_camera_csv, read_spectrum_csv, write_bank_csv, write_camera_csv,
    write_spectrum_csv,
};

use crate::error::{check_len, Error, Result};
use crate::Scalar;

/// Number of bands on the shared grid.
pub const N_BANDS: usize = 48;

/// The single 420–890 nm grid, 10 nm apart, that every curve and cube uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct WavelengthGrid;

impl WavelengthGrid {
    pub const START_NM: u32 = 420;
    pub const STEP_NM: u32 = 10;
    pub const N_BANDS: usize = N_BANDS;
    /// Wavelengths from here on are treated as NIR (700 nm excluded from VIS).
    pub const VIS_CUTOFF_NM: u32 = 700;
    /// Number of VIS bands, i.e. the index of the first NIR band.
    pub const N_VIS: usize = ((Self::VIS_CUTOFF_NM - Self::START_NM) / Self::STEP_NM) as usize;

    pub fn wavelength_nm(band: usize) -> u32 {
        debug_assert!(band < N_BANDS);
        Self::START_NM + Self::STEP_NM * band as u32
    }

    pub fn wavelengths() -> impl Iterator<Item = u32> {
        (0..N_BANDS).map(Self::wavelength_nm)
    }

    /// Band index of an exact grid wavelength.
    pub fn band_of(nm: u32) -> Option<usize> {
        if nm < Self::START_NM || !(nm - Self::START_NM).is_multiple_of(Self::STEP_NM) {
            return None;
        }
        let n = ((nm - Self::START_NM) / Self::STEP_NM) as usize;
        (n < N_BANDS).then_some(n)
    }

    /// Closest band to an arbitrary wavelength, clamped to the grid.
    pub fn nearest_band(nm: f64) -> usize {
        let n = ((nm - Self::START_NM as f64) / Self::STEP_NM as f64).round();
        n.clamp(0.0, (N_BANDS - 1) as f64) as usize
    }

    pub fn is_vis(band: usize) -> bool {
        band < Self::N_VIS
    }
}

/// Non-negative, finite intensity per band of the shared grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralCurve<T = f64> {
    values: [T; N_BANDS],
}

impl<T: Scalar> SpectralCurve<T> {
    pub fn new(values: [T; N_BANDS]) -> Result<Self> {
        if let Some((n, v)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !v.is_finite() || **v < T::zero())
        {
            return Err(Error::domain(format!(
                "spectral value {v} at {} nm is not finite and non-negative",
                WavelengthGrid::wavelength_nm(n)
            )));
        }
        Ok(Self { values })
    }

    pub fn from_slice(values: &[T]) -> Result<Self> {
        check_len("spectral curve", N_BANDS, values.len())?;
        let mut arr = [T::zero(); N_BANDS];
        arr.copy_from_slice(values);
        Self::new(arr)
    }

    /// Samples `f(wavelength_nm)` on the grid.
    pub fn from_fn(mut f: impl FnMut(f64) -> T) -> Result<Self> {
        let mut arr = [T::zero(); N_BANDS];
        for (n, v) in arr.iter_mut().enumerate() {
            *v = f(WavelengthGrid::wavelength_nm(n) as f64);
        }
        Self::new(arr)
    }

    pub fn zeros() -> Self {
        Self {
            values: [T::zero(); N_BANDS],
        }
    }

    pub fn constant(v: T) -> Result<Self> {
        Self::new([v; N_BANDS])
    }

    /// Unit value at one band, zero elsewhere.
    pub fn impulse(band: usize) -> Self {
        let mut c = Self::zeros();
        c.values[band] = T::one();
        c
    }

    /// Gaussian with unit peak at `center_nm`, sampled on the grid and cut to
    /// zero further than two FWHM from the center.
    pub fn gaussian(center_nm: f64, fwhm_nm: f64) -> Self {
        let sigma = fwhm_nm / (2.0 * (2.0 * std::f64::consts::LN_2).sqrt());
        let mut c = Self::zeros();
        for (n, v) in c.values.iter_mut().enumerate() {
            let d = WavelengthGrid::wavelength_nm(n) as f64 - center_nm;
            if d.abs() <= 2.0 * fwhm_nm {
                *v = T::lit((-0.5 * (d / sigma).powi(2)).exp());
            }
        }
        c
    }

    pub fn values(&self) -> &[T; N_BANDS] {
        &self.values
    }

    pub fn as_slice(&self) -> &[T] {
        &self.values
    }

    pub fn iter(&self) -> impl Iterator<Item = T> + '_ {
        self.values.iter().copied()
    }

    pub fn sum(&self) -> T {
        self.iter().sum()
    }

    pub fn max(&self) -> T {
        self.iter().fold(T::zero(), T::max)
    }

    /// Index of the largest band (first one on ties).
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for n in 1..N_BANDS {
            if self.values[n] > self.values[best] {
                best = n;
            }
        }
        best
    }

    pub fn dot(&self, other: &Self) -> T {
        self.iter().zip(other.iter()).map(|(a, b)| a * b).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.iter().all(|v| v == T::zero())
    }

    /// Multiplies every band by `s ≥ 0`.
    pub fn scaled(&self, s: T) -> Result<Self> {
        Self::new(self.values.map(|v| v * s))
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = *self;
        for (o, b) in out.values.iter_mut().zip(other.iter()) {
            *o = *o + b;
        }
        out
    }

    /// Band-wise difference, clamped at zero.
    pub fn saturating_sub(&self, other: &Self) -> Self {
        let mut out = *self;
        for (o, b) in out.values.iter_mut().zip(other.iter()) {
            *o = (*o - b).max(T::zero());
        }
        out
    }

    pub fn cast<U: Scalar>(&self) -> SpectralCurve<U> {
        SpectralCurve {
            values: self.values.map(|v| U::lit(v.to_f64_lossy())),
        }
    }
}

impl<T> Index<usize> for SpectralCurve<T> {
    type Output = T;

    fn index(&self, band: usize) -> &T {
        &self.values[band]
    }
}

/// Photopic and scotopic luminosity functions.
#[derive(Debug, Clone, PartialEq)]
pub struct LuminosityTables<T = f64> {
    pub photopic: SpectralCurve<T>,
    pub scotopic: SpectralCurve<T>,
}

impl<T: Scalar> LuminosityTables<T> {
    /// CIE 1924 photopic scaled to peak 683 and CIE 1951 scotopic scaled to
    /// peak 1700, both on the shared grid. The scotopic peak lands on 510 nm.
    pub fn cie() -> Self {
        let scale = |table: &[f64; N_BANDS], peak: f64| {
            let m = table.iter().cloned().fold(0.0, f64::max);
            SpectralCurve {
                values: table.map(|v| T::lit(v * peak / m)),
            }
        };
        Self {
            photopic: scale(&tables::PHOTOPIC_1924, tables::PHOTOPIC_PEAK),
            scotopic: scale(&tables::SCOTOPIC_1951, tables::SCOTOPIC_PEAK),
        }
    }
}

impl<T: Scalar> Default for LuminosityTables<T> {
    fn default() -> Self {
        Self::cie()
    }
}

/// Mesopic luminosity `(1 − x)·V' + x·V` for `x ∈ [0, 1]`.
pub fn mesopic<T: Scalar>(
    photopic: &SpectralCurve<T>,
    scotopic: &SpectralCurve<T>,
    x: T,
) -> Result<SpectralCurve<T>> {
    if !(x >= T::zero() && x <= T::one()) {
        return Err(Error::domain(format!(
            "mesopic mixing x = {x} outside [0, 1]"
        )));
    }
    let mut out = SpectralCurve::zeros();
    for n in 0..N_BANDS {
        out.values[n] = (T::one() - x) * scotopic[n] + x * photopic[n];
    }
    Ok(out)
}

/// Perceived power Ψ: plain dot product of a luminosity function with a
/// spectrum over the grid.
pub fn perceived_power<T: Scalar>(luminosity: &SpectralCurve<T>, spectrum: &SpectralCurve<T>) -> T {
    luminosity.dot(spectrum)
}

/// A bank of LED emission spectra and which of them the scotopic function sees.
#[derive(Debug, Clone, PartialEq)]
pub struct LedBank<T = f64> {
    bases: Vec<SpectralCurve<T>>,
    vis_active: Vec<bool>,
    base_power: Vec<T>,
}

impl<T: Scalar> LedBank<T> {
    /// Builds a bank; `vis_active[k]` is `perceived_power(scotopic, base k) > 0`.
    pub fn new(bases: Vec<SpectralCurve<T>>, scotopic: &SpectralCurve<T>) -> Result<Self> {
        if bases.is_empty() {
            return Err(Error::domain("LED bank needs at least one base"));
        }
        if let Some(k) = bases.iter().position(|b| b.is_zero()) {
            return Err(Error::domain(format!("LED base {k} is identically zero")));
        }
        let base_power: Vec<T> = bases.iter().map(|b| perceived_power(scotopic, b)).collect();
        let vis_active = base_power.iter().map(|&p| p > T::zero()).collect();
        Ok(Self {
            bases,
            vis_active,
            base_power,
        })
    }

    /// `k` unit-peak Gaussians, FWHM 20 nm, centers evenly spaced 420–890 nm.
    pub fn gaussian(k: usize, scotopic: &SpectralCurve<T>) -> Result<Self> {
        if k == 0 {
            return Err(Error::domain("LED bank needs at least one base"));
        }
        let span = (WavelengthGrid::wavelength_nm(N_BANDS - 1) - WavelengthGrid::START_NM) as f64;
        let bases = (0..k)
            .map(|i| {
                let c = if k == 1 {
                    WavelengthGrid::START_NM as f64 + span / 2.0
                } else {
                    WavelengthGrid::START_NM as f64 + span * i as f64 / (k - 1) as f64
                };
                SpectralCurve::gaussian(c, 20.0)
            })
            .collect();
        Self::new(bases, scotopic)
    }

    /// The 26-LED default bank.
    pub fn default_bank(scotopic: &SpectralCurve<T>) -> Self {
        Self::gaussian(26, scotopic).expect("default bank is valid")
    }

    pub fn len(&self) -> usize {
        self.bases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bases.is_empty()
    }

    pub fn bases(&self) -> &[SpectralCurve<T>] {
        &self.bases
    }

    pub fn base(&self, k: usize) -> &SpectralCurve<T> {
        &self.bases[k]
    }

    pub fn vis_active(&self) -> &[bool] {
        &self.vis_active
    }

    /// Perceived scotopic power of each base at unit weight.
    pub fn base_power(&self) -> &[T] {
        &self.base_power
    }

    /// Weighted sum of the bases. Weights must be finite and non-negative.
    pub fn multiplex(&self, weights: &[T]) -> Result<SpectralCurve<T>> {
        check_len("LED weights", self.len(), weights.len())?;
        if let Some(w) = weights.iter().find(|w| !w.is_finite() || **w < T::zero()) {
            return Err(Error::domain(format!(
                "LED weight {w} is not finite and non-negative"
            )));
        }
        let mut out = SpectralCurve::zeros();
        for (base, &w) in self.bases.iter().zip(weights) {
            for n in 0..N_BANDS {
                out.values[n] = out.values[n] + w * base[n];
            }
        }
        Ok(out)
    }
}

/// `Φ = Σ σ^k Φ^k`.
pub fn multiplex<T: Scalar>(
    bank: &LedBank<T>,
    weights: &crate::visibility::DesignWeights<T>,
) -> Result<SpectralCurve<T>> {
    bank.multiplex(weights.sigma())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cie() -> LuminosityTables<f64> {
        LuminosityTables::cie()
    }

    #[test]
    fn grid_endpoints() {
        assert_eq!(WavelengthGrid::wavelength_nm(0), 420);
        assert_eq!(WavelengthGrid::wavelength_nm(47), 890);
        assert_eq!(WavelengthGrid::N_VIS, 28);
        assert_eq!(WavelengthGrid::band_of(690), Some(27));
        assert_eq!(WavelengthGrid::band_of(700), Some(28));
        assert_eq!(WavelengthGrid::band_of(895), None);
        assert_eq!(WavelengthGrid::nearest_band(507.0), 9);
    }

    #[test]
    fn luminosity_table_invariants() {
        let t = cie();
        for n in 0..N_BANDS {
            if WavelengthGrid::wavelength_nm(n) >= 700 {
                assert_eq!(t.scotopic[n], 0.0);
            }
        }
        assert_eq!(t.scotopic.max(), 1700.0);
        assert_eq!(WavelengthGrid::wavelength_nm(t.scotopic.argmax()), 510);
        let p = WavelengthGrid::wavelength_nm(t.photopic.argmax());
        assert!(p == 550 || p == 560);
        assert!((t.photopic.max() - 683.0).abs() < 1e-9);
    }

    #[test]
    fn curve_rejects_negative_and_nan() {
        let mut v = [0.0; N_BANDS];
        v[3] = -1.0;
        assert!(SpectralCurve::new(v).is_err());
        v[3] = f64::NAN;
        assert!(SpectralCurve::new(v).is_err());
        assert!(SpectralCurve::<f64>::from_slice(&[0.0; 47]).is_err());
    }

    #[test]
    fn mesopic_endpoints_and_midpoint() {
        let t = cie();
        assert_eq!(mesopic(&t.photopic, &t.scotopic, 0.0).unwrap(), t.scotopic);
        assert_eq!(mesopic(&t.photopic, &t.scotopic, 1.0).unwrap(), t.photopic);
        let m = mesopic(&t.photopic, &t.scotopic, 0.5).unwrap();
        let b = WavelengthGrid::band_of(510).unwrap();
        assert!((m[b] - (850.0 + t.photopic[b] / 2.0)).abs() < 1e-12);
        assert!(mesopic(&t.photopic, &t.scotopic, 1.5).is_err());
        assert!(mesopic(&t.photopic, &t.scotopic, -0.1).is_err());
    }

    #[test]
    fn perceived_power_examples() {
        let t = cie();
        assert_eq!(perceived_power(&t.scotopic, &SpectralCurve::zeros()), 0.0);
        let nir = SpectralCurve::<f64>::from_fn(|nm| if nm >= 700.0 { 3.0 } else { 0.0 }).unwrap();
        assert_eq!(perceived_power(&t.scotopic, &nir), 0.0);
        let imp = SpectralCurve::impulse(WavelengthGrid::band_of(510).unwrap());
        assert_eq!(perceived_power(&t.scotopic, &imp), 1700.0);
    }

    #[test]
    fn multiplex_limits() {
        let t = cie();
        let bank = LedBank::<f64>::default_bank(&t.scotopic);
        assert_eq!(bank.len(), 26);
        assert!(bank.multiplex(&vec![0.0; 26]).unwrap().is_zero());
        let mut one_hot = vec![0.0; 26];
        one_hot[7] = 1.0;
        assert_eq!(bank.multiplex(&one_hot).unwrap(), *bank.base(7));
        assert!(bank.multiplex(&[0.5; 25]).is_err());
        assert!(bank.multiplex(&[-0.5; 26]).is_err());
    }

    #[test]
    fn multiplex_two_gaussians_matches_elementwise_sum() {
        let t = cie();
        let a = SpectralCurve::<f64>::gaussian(500.0, 30.0);
        let b = SpectralCurve::<f64>::gaussian(800.0, 30.0);
        let bank = LedBank::new(vec![a, b], &t.scotopic).unwrap();
        let phi = bank.multiplex(&[0.3, 0.7]).unwrap();
        for n in 0..N_BANDS {
            let nm = 420.0 + 10.0 * n as f64;
            let sig = 30.0 / 2.354_820_045_030_949_4;
            let ga = if (nm - 500.0).abs() <= 60.0 {
                (-0.5 * ((nm - 500.0) / sig).powi(2)).exp()
            } else {
                0.0
            };
            let gb = if (nm - 800.0).abs() <= 60.0 {
                (-0.5 * ((nm - 800.0) / sig).powi(2)).exp()
            } else {
                0.0
            };
            assert!((phi[n] - (0.3 * ga + 0.7 * gb)).abs() < 1e-12, "band {n}");
        }
        assert_eq!(bank.vis_active(), &[true, false]);
    }

    #[test]
    fn default_bank_has_nir_only_bases() {
        let t = cie();
        let bank = LedBank::<f64>::default_bank(&t.scotopic);
        let nir = bank.vis_active().iter().filter(|a| !**a).count();
        assert!(nir >= 8, "expected NIR-only bases, got {nir}");
        for (k, active) in bank.vis_active().iter().enumerate() {
            assert_eq!(*active, perceived_power(&t.scotopic, bank.base(k)) > 0.0);
        }
    }

    #[test]
    fn bank_rejects_empty_and_zero_base() {
        let t = cie();
        assert!(LedBank::<f64>::new(vec![], &t.scotopic).is_err());
        assert!(LedBank::new(vec![SpectralCurve::<f64>::zeros()], &t.scotopic).is_err());
    }

    #[test]
    fn f32_tables_match_f64() {
        let a = LuminosityTables::<f32>::cie();
        let b = LuminosityTables::<f64>::cie();
        for n in 0..N_BANDS {
            assert!((a.scotopic[n] as f64 - b.scotopic[n]).abs() <= 1e-3);
        }
    }
}
