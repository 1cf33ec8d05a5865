//! Image formation: reflectance cube × illuminant × camera sensitivity, summed
//! over the 48 bands, plus the camera noise model and the file formats for
//! cubes and rendered images.

mod export;
mod hsc;
mod noise;

pub use export::{read_raw_f32, write_png16, write_raw_f32};
pub use hsc::{load_hsc, save_cube, HSC_MAGIC, HSC_VERSION};
pub use noise::{
    add_noise, add_noise_with, derive_seed, sample_poisson, Execution, NoiseModel, PatternSource,
};

use crate::error::{check_len, Error, Result};
use crate::spectra::{SpectralCurve, WavelengthGrid, N_BANDS};
use crate::Scalar;

/// Spectral sensitivity of the R, G and B channels.
#[derive(Debug, Clone, PartialEq)]
pub struct CameraSensitivity<T = f64> {
    pub rows: [SpectralCurve<T>; 3],
}

impl<T: Scalar> CameraSensitivity<T> {
    pub fn new(r: SpectralCurve<T>, g: SpectralCurve<T>, b: SpectralCurve<T>) -> Self {
        Self { rows: [r, g, b] }
    }

    pub fn channel(&self, c: usize) -> &SpectralCurve<T> {
        &self.rows[c]
    }

    /// Per-channel `Φ(n)·C_c(n)`.
    pub fn filters(&self, spectrum: &SpectralCurve<T>) -> [[T; N_BANDS]; 3] {
        let mut f = [[T::zero(); N_BANDS]; 3];
        for (c, row) in self.rows.iter().enumerate() {
            for n in 0..N_BANDS {
                f[c][n] = spectrum[n] * row[n];
            }
        }
        f
    }

    pub fn cast<U: Scalar>(&self) -> CameraSensitivity<U> {
        CameraSensitivity {
            rows: [
                self.rows[0].cast(),
                self.rows[1].cast(),
                self.rows[2].cast(),
            ],
        }
    }
}

/// Per-pixel reflectance on the shared grid, stored band-major: plane `n`
/// holds `width × height` values in row-major order (`y * width + x`).
#[derive(Debug, Clone, PartialEq)]
pub struct HyperCube<T = f64> {
    width: usize,
    height: usize,
    data: Vec<T>,
}

impl<T: Scalar> HyperCube<T> {
    pub fn new(width: usize, height: usize, data: Vec<T>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::domain("hypercube must have non-zero size"));
        }
        check_len("hypercube data", N_BANDS * width * height, data.len())?;
        if let Some(v) = data.iter().find(|v| !v.is_finite() || **v < T::zero()) {
            return Err(Error::domain(format!(
                "reflectance {v} is not finite and non-negative"
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    /// Cube with the same reflectance spectrum at every pixel.
    pub fn uniform(width: usize, height: usize, spectrum: &SpectralCurve<T>) -> Result<Self> {
        let p = width * height;
        let mut data = Vec::with_capacity(N_BANDS * p);
        for n in 0..N_BANDS {
            data.extend(std::iter::repeat_n(spectrum[n], p));
        }
        Self::new(width, height, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> usize {
        self.width * self.height
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn band(&self, n: usize) -> &[T] {
        let p = self.pixels();
        &self.data[n * p..(n + 1) * p]
    }

    pub fn get(&self, band: usize, x: usize, y: usize) -> T {
        self.data[band * self.pixels() + y * self.width + x]
    }

    /// Reflectance spectrum of one pixel.
    pub fn spectrum_at(&self, x: usize, y: usize) -> SpectralCurve<T> {
        let p = self.pixels();
        let idx = y * self.width + x;
        let mut v = [T::zero(); N_BANDS];
        for (n, out) in v.iter_mut().enumerate() {
            *out = self.data[n * p + idx];
        }
        SpectralCurve::new(v).expect("cube entries are validated")
    }

    pub fn cast<U: Scalar>(&self) -> HyperCube<U> {
        HyperCube {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|v| U::lit(v.to_f64_lossy())).collect(),
        }
    }
}

/// Three-channel image stored as R, G, B planes of `width × height`.
#[derive(Debug, Clone, PartialEq)]
pub struct RgbImage<T = f64> {
    width: usize,
    height: usize,
    data: Vec<T>,
}

impl<T: Scalar> RgbImage<T> {
    pub fn new(width: usize, height: usize, data: Vec<T>) -> Result<Self> {
        check_len("rgb image data", 3 * width * height, data.len())?;
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            data: vec![T::zero(); 3 * width * height],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> usize {
        self.width * self.height
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn channel(&self, c: usize) -> &[T] {
        let p = self.pixels();
        &self.data[c * p..(c + 1) * p]
    }

    pub fn get(&self, c: usize, x: usize, y: usize) -> T {
        self.data[c * self.pixels() + y * self.width + x]
    }

    pub fn same_size(&self, other: &Self) -> Result<()> {
        check_len("image width", self.width, other.width)?;
        check_len("image height", self.height, other.height)
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Clamps every value into [0, 1], for display and export.
    pub fn clamp_unit(&self) -> Self {
        self.map(|v| v.max(T::zero()).min(T::one()))
    }
}

/// `I_{c,p} = Σ_n T_p(n)·Φ(n)·C_c(n)`.
///
/// VIS bands and NIR bands are summed separately and added last, so
/// `render(Φ) == render(vis(Φ)) + render(Φ − vis(Φ))` holds bit for bit.
pub fn render<T: Scalar>(
    cube: &HyperCube<T>,
    spectrum: &SpectralCurve<T>,
    camera: &CameraSensitivity<T>,
) -> RgbImage<T> {
    let p = cube.pixels();
    let filters = camera.filters(spectrum);
    let mut out = RgbImage::zeros(cube.width, cube.height);
    let mut nir = vec![T::zero(); p];
    for (c, filter) in filters.iter().enumerate() {
        let plane = &mut out.data[c * p..(c + 1) * p];
        nir.iter_mut().for_each(|v| *v = T::zero());
        for (n, &f) in filter.iter().enumerate() {
            if f == T::zero() {
                continue;
            }
            let acc = if WavelengthGrid::is_vis(n) {
                &mut *plane
            } else {
                &mut nir[..]
            };
            for (o, &t) in acc.iter_mut().zip(cube.band(n)) {
                *o = *o + t * f;
            }
        }
        for (o, &v) in plane.iter_mut().zip(&nir) {
            *o = *o + v;
        }
    }
    out
}

/// Copy of `spectrum` with every band at or above 700 nm zeroed.
pub fn split_vis<T: Scalar>(spectrum: &SpectralCurve<T>) -> SpectralCurve<T> {
    let mut v = *spectrum.values();
    for x in v.iter_mut().skip(WavelengthGrid::N_VIS) {
        *x = T::zero();
    }
    SpectralCurve::new(v).expect("subset of a valid curve")
}

/// Scale-down factors for the VIS and full-band images:
/// `ξ_vis = Σ vis(Φ̂) / (Σ vis(Φ) + ε)` and `ξ_nir = Σ Φ̂ / (Σ Φ + ε)`.
pub fn band_scale_factors<T: Scalar>(
    phi: &SpectralCurve<T>,
    phi_hat: &SpectralCurve<T>,
    epsilon: T,
) -> (T, T) {
    let xi_vis = split_vis(phi_hat).sum() / (split_vis(phi).sum() + epsilon);
    let xi_nir = phi_hat.sum() / (phi.sum() + epsilon);
    (xi_vis, xi_nir)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn camera() -> CameraSensitivity<f64> {
        CameraSensitivity::new(
            SpectralCurve::gaussian(600.0, 80.0),
            SpectralCurve::gaussian(540.0, 80.0),
            SpectralCurve::gaussian(460.0, 80.0),
        )
    }

    fn cube_from(width: usize, height: usize, vals: &[f64]) -> HyperCube<f64> {
        HyperCube::new(width, height, vals.to_vec()).unwrap()
    }

    /// Naive triple loop over (c, pixel, band).
    fn render_oracle(
        cube: &HyperCube<f64>,
        phi: &SpectralCurve<f64>,
        cam: &CameraSensitivity<f64>,
    ) -> Vec<f64> {
        let mut out = vec![0.0; 3 * cube.pixels()];
        for c in 0..3 {
            for y in 0..cube.height() {
                for x in 0..cube.width() {
                    let mut s = 0.0;
                    for n in 0..48 {
                        s += cube.get(n, x, y) * phi[n] * cam.channel(c)[n];
                    }
                    out[c * cube.pixels() + y * cube.width() + x] = s;
                }
            }
        }
        out
    }

    #[test]
    fn zero_spectrum_renders_black() {
        let cube = HyperCube::uniform(4, 3, &SpectralCurve::constant(0.7).unwrap()).unwrap();
        let img = render(&cube, &SpectralCurve::zeros(), &camera());
        assert!(img.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn unit_cube_under_impulse_gives_sensitivity() {
        let cam = camera();
        let cube = HyperCube::uniform(3, 2, &SpectralCurve::constant(1.0).unwrap()).unwrap();
        for n in [0, 13, 27, 28, 47] {
            let img = render(&cube, &SpectralCurve::impulse(n), &cam);
            for c in 0..3 {
                assert!(img.channel(c).iter().all(|&v| v == cam.channel(c)[n]));
            }
        }
    }

    #[test]
    fn render_matches_triple_loop() {
        let vals: Vec<f64> = (0..48 * 5 * 4)
            .map(|i| ((i * 7919) % 101) as f64 / 100.0)
            .collect();
        let cube = cube_from(5, 4, &vals);
        let phi = SpectralCurve::gaussian(600.0, 200.0);
        let img = render(&cube, &phi, &camera());
        for (a, b) in img.data().iter().zip(render_oracle(&cube, &phi, &camera())) {
            assert!((a - b).abs() <= 1e-12 * b.abs().max(1e-300));
        }
    }

    #[test]
    fn split_vis_examples() {
        let nir = SpectralCurve::<f64>::from_fn(|nm| if nm >= 700.0 { 1.0 } else { 0.0 }).unwrap();
        assert!(split_vis(&nir).is_zero());
        let at550 = SpectralCurve::<f64>::impulse(WavelengthGrid::band_of(550).unwrap());
        assert_eq!(split_vis(&at550), at550);
        let flat = split_vis(&SpectralCurve::<f64>::constant(1.0).unwrap());
        for n in 0..48 {
            assert_eq!(flat[n], if n <= 27 { 1.0 } else { 0.0 });
        }
    }

    #[test]
    fn band_scale_factor_examples() {
        let vis = SpectralCurve::<f64>::gaussian(520.0, 20.0);
        let (a, b) = band_scale_factors(&vis, &vis, 1e-12);
        assert!((a - 1.0).abs() < 1e-9 && (b - 1.0).abs() < 1e-9);

        let half = vis.scaled(0.5).unwrap();
        let (a, b) = band_scale_factors(&vis, &half, 1e-12);
        assert!((a - 0.5).abs() < 1e-9 && (b - 0.5).abs() < 1e-9);

        // NIR part with the same energy as the VIS part, left untouched.
        let nir = SpectralCurve::<f64>::gaussian(820.0, 20.0);
        let nir = nir.scaled(vis.sum() / nir.sum()).unwrap();
        let (a, b) = band_scale_factors(&vis.add(&nir), &half.add(&nir), 1e-12);
        assert!((a - 0.5).abs() < 1e-9);
        assert!((b - 0.75).abs() < 1e-9);
    }

    proptest! {
        #[test]
        fn render_is_linear(
            vals in prop::collection::vec(0.0f64..2.0, 48 * 6),
            c1 in 420.0f64..890.0, c2 in 420.0f64..890.0,
            a in 0.0f64..3.0, b in 0.0f64..3.0,
        ) {
            let cube = cube_from(3, 2, &vals);
            let cam = camera();
            let p1 = SpectralCurve::gaussian(c1, 40.0);
            let p2 = SpectralCurve::gaussian(c2, 90.0);
            let mix = p1.scaled(a).unwrap().add(&p2.scaled(b).unwrap());
            let lhs = render(&cube, &mix, &cam);
            let r1 = render(&cube, &p1, &cam);
            let r2 = render(&cube, &p2, &cam);
            for i in 0..lhs.data().len() {
                let rhs = a * r1.data()[i] + b * r2.data()[i];
                prop_assert!((lhs.data()[i] - rhs).abs() <= 1e-10 * rhs.abs().max(1e-12));
            }
            // Linear in the cube as well.
            let doubled = cube_from(3, 2, &vals.iter().map(|v| 2.0 * v).collect::<Vec<_>>());
            let r = render(&doubled, &p1, &cam);
            for i in 0..r.data().len() {
                prop_assert!((r.data()[i] - 2.0 * r1.data()[i]).abs() <= 1e-10 * r1.data()[i].abs().max(1e-12));
            }
        }

        #[test]
        fn band_disjoint_decomposition(vals in prop::collection::vec(0.0f64..2.0, 48 * 4), c in 420.0f64..890.0) {
            let cube = cube_from(2, 2, &vals);
            let cam = camera();
            let phi = SpectralCurve::gaussian(c, 300.0);
            let vis = split_vis(&phi);
            prop_assert_eq!(split_vis(&vis), vis);
            let nir = phi.saturating_sub(&vis);
            let whole = render(&cube, &phi, &cam);
            let a = render(&cube, &vis, &cam);
            let b = render(&cube, &nir, &cam);
            for i in 0..whole.data().len() {
                prop_assert_eq!(whole.data()[i], a.data()[i] + b.data()[i]);
            }
        }
    }
}
