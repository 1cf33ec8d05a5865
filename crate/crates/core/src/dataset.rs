//! Hyperspectral data: cube loading, manifests, synthetic test scenes, and the
//! white-light ground truth.

use std::collections::HashSet;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::{
    derive_seed, load_hsc, render, split_vis, CameraSensitivity, HyperCube, RgbImage,
};
use crate::spectra::{SpectralCurve, WavelengthGrid, N_BANDS};
use crate::Scalar;

/// Default white-light LED: a 450 nm blue pump plus a broad phosphor lobe,
/// unit peak, nothing from 700 nm on.
pub fn default_white_led<T: Scalar>() -> SpectralCurve<T> {
    let pump = SpectralCurve::<f64>::gaussian(450.0, 20.0);
    let phosphor = SpectralCurve::<f64>::gaussian(570.0, 110.0)
        .scaled(0.75)
        .unwrap();
    let raw = split_vis(&pump.add(&phosphor));
    raw.scaled(1.0 / raw.max()).unwrap().cast()
}

/// Default RGB camera: Gaussian channels at 600/540/460 nm (FWHM 80 nm), small
/// channel-specific red-edge responses, and a common NIR tail that makes the
/// channels nearly identical beyond ~820 nm. Scaled so a unit reflector under
/// [`default_white_led`] renders its brightest channel at exactly 1.
pub fn default_camera<T: Scalar>() -> CameraSensitivity<T> {
    let tail = SpectralCurve::<f64>::from_fn(|nm| {
        let rise = 1.0 / (1.0 + (-(nm - 740.0) / 25.0).exp());
        0.3 * rise * (-((nm - 820.0) / 160.0).powi(2)).exp()
    })
    .unwrap();
    let channel = |center: f64, edge_center: f64, edge_amp: f64| {
        SpectralCurve::<f64>::gaussian(center, 80.0)
            .add(
                &SpectralCurve::gaussian(edge_center, 60.0)
                    .scaled(edge_amp)
                    .unwrap(),
            )
            .add(&tail)
    };
    let raw = CameraSensitivity::new(
        channel(600.0, 720.0, 0.15),
        channel(540.0, 760.0, 0.08),
        channel(460.0, 780.0, 0.05),
    );
    let white = default_white_led::<f64>();
    let peak = (0..3)
        .map(|c| raw.channel(c).dot(&white))
        .fold(0.0, f64::max);
    let rows = raw.rows.map(|r| r.scaled(1.0 / peak).unwrap());
    CameraSensitivity { rows }.cast()
}

/// Noise-free RGB image of `cube` under the white-light LED.
pub fn ground_truth<T: Scalar>(
    cube: &HyperCube<T>,
    white_led: &SpectralCurve<T>,
    camera: &CameraSensitivity<T>,
) -> Result<RgbImage<T>> {
    if white_led
        .iter()
        .skip(WavelengthGrid::N_VIS)
        .any(|v| v > T::zero())
    {
        return Err(Error::domain(
            "ground-truth illuminant must have no support at or above 700 nm",
        ));
    }
    Ok(render(cube, white_led, camera))
}

/// Analytic reflectance of one scene patch. Values are clamped into [0, 1].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PatchSpectrum {
    Flat {
        value: f64,
    },
    /// `floor + amplitude·gaussian(center, fwhm)`.
    Gaussian {
        center_nm: f64,
        fwhm_nm: f64,
        amplitude: f64,
        floor: f64,
    },
    /// Linear from `start` at 420 nm to `end` at 890 nm.
    Ramp {
        start: f64,
        end: f64,
    },
    /// `vis` below 700 nm, the constant `nir` from 700 nm on. Two of these with
    /// the same `vis` form a metamer pair under any VIS-only illuminant.
    Split {
        vis: Box<PatchSpectrum>,
        nir: f64,
    },
    /// Smooth random spectrum drawn from the scene seed and the patch index.
    Random,
}

impl PatchSpectrum {
    fn evaluate(&self, seed: u64, index: usize) -> [f64; N_BANDS] {
        let mut out = [0.0; N_BANDS];
        match self {
            PatchSpectrum::Flat { value } => out = [*value; N_BANDS],
            PatchSpectrum::Gaussian {
                center_nm,
                fwhm_nm,
                amplitude,
                floor,
            } => {
                let g = SpectralCurve::<f64>::gaussian(*center_nm, *fwhm_nm);
                for n in 0..N_BANDS {
                    out[n] = floor + amplitude * g[n];
                }
            }
            PatchSpectrum::Ramp { start, end } => {
                for (n, v) in out.iter_mut().enumerate() {
                    *v = start + (end - start) * n as f64 / (N_BANDS - 1) as f64;
                }
            }
            PatchSpectrum::Split { vis, nir } => {
                out = vis.evaluate(seed, index);
                for v in out.iter_mut().skip(WavelengthGrid::N_VIS) {
                    *v = *nir;
                }
            }
            PatchSpectrum::Random => {
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[index as u64]));
                let base: f64 = rng.random_range(0.05..0.35);
                out = [base; N_BANDS];
                for _ in 0..3 {
                    let g = SpectralCurve::<f64>::gaussian(
                        rng.random_range(420.0..890.0),
                        rng.random_range(40.0..200.0),
                    );
                    let a: f64 = rng.random_range(0.0..0.5);
                    for n in 0..N_BANDS {
                        out[n] += a * g[n];
                    }
                }
            }
        }
        out.map(|v| v.clamp(0.0, 1.0))
    }
}

/// A `rows × cols` grid of square patches, each of constant reflectance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub rows: usize,
    pub cols: usize,
    pub patch_size: usize,
    /// Row-major, one per grid cell.
    pub patches: Vec<PatchSpectrum>,
    pub seed: u64,
}

impl SceneSpec {
    /// Two side-by-side patches that agree below 700 nm and differ above it:
    /// identical under VIS-only light.
    pub fn vis_metamer_pair(patch_size: usize) -> Self {
        let vis = Box::new(PatchSpectrum::Gaussian {
            center_nm: 560.0,
            fwhm_nm: 120.0,
            amplitude: 0.5,
            floor: 0.2,
        });
        Self {
            rows: 1,
            cols: 2,
            patch_size,
            patches: vec![
                PatchSpectrum::Split {
                    vis: vis.clone(),
                    nir: 0.2,
                },
                PatchSpectrum::Split { vis, nir: 0.8 },
            ],
            seed: 0,
        }
    }

    /// Two side-by-side patches that differ only below 700 nm: identical under
    /// NIR-only light.
    pub fn nir_metamer_pair(patch_size: usize) -> Self {
        let make = |center_nm| PatchSpectrum::Split {
            vis: Box::new(PatchSpectrum::Gaussian {
                center_nm,
                fwhm_nm: 80.0,
                amplitude: 0.6,
                floor: 0.1,
            }),
            nir: 0.5,
        };
        Self {
            rows: 1,
            cols: 2,
            patch_size,
            patches: vec![make(470.0), make(620.0)],
            seed: 0,
        }
    }

    /// Grid of random smooth spectra.
    pub fn random(rows: usize, cols: usize, patch_size: usize, seed: u64) -> Self {
        Self {
            rows,
            cols,
            patch_size,
            patches: vec![PatchSpectrum::Random; rows * cols],
            seed,
        }
    }

    pub fn width(&self) -> usize {
        self.cols * self.patch_size
    }

    pub fn height(&self) -> usize {
        self.rows * self.patch_size
    }

    /// Reflectance of patch `i`.
    pub fn patch_reflectance(&self, i: usize) -> SpectralCurve<f64> {
        SpectralCurve::new(self.patches[i].evaluate(self.seed, i)).expect("clamped to [0, 1]")
    }
}

/// Builds the cube described by `spec`.
pub fn synth_scene<T: Scalar>(spec: &SceneSpec) -> Result<HyperCube<T>> {
    if spec.rows == 0 || spec.cols == 0 || spec.patch_size == 0 {
        return Err(Error::domain("scene layout is empty"));
    }
    if spec.patches.len() != spec.rows * spec.cols {
        return Err(Error::domain(format!(
            "{} patch spectra for a {}×{} layout",
            spec.patches.len(),
            spec.rows,
            spec.cols
        )));
    }
    let (w, h) = (spec.width(), spec.height());
    let spectra: Vec<SpectralCurve<f64>> = (0..spec.patches.len())
        .map(|i| spec.patch_reflectance(i))
        .collect();
    let mut data = vec![T::zero(); N_BANDS * w * h];
    for n in 0..N_BANDS {
        let plane = &mut data[n * w * h..(n + 1) * w * h];
        for y in 0..h {
            for x in 0..w {
                let i = (y / spec.patch_size) * spec.cols + x / spec.patch_size;
                plane[y * w + x] = T::lit(spectra[i][n]);
            }
        }
    }
    HyperCube::new(w, h, data)
}

/// Loads an `HSC1` file, or a directory of per-band grayscale PNGs named
/// `<wavelength>.png` (8- or 16-bit; values are divided by full scale).
pub fn load_cube<T: Scalar>(path: impl AsRef<Path>) -> Result<HyperCube<T>> {
    let path = path.as_ref();
    if path.is_dir() {
        load_band_folder(path)
    } else {
        load_hsc(path)
    }
}

fn load_band_folder<T: Scalar>(dir: &Path) -> Result<HyperCube<T>> {
    let mut dims = None;
    let mut data = Vec::new();
    for nm in WavelengthGrid::wavelengths() {
        let file = dir.join(format!("{nm}.png"));
        if !file.exists() {
            return Err(Error::format(
                &file,
                0,
                format!("missing band image for {nm} nm"),
            ));
        }
        let img = image::open(&file)?.into_luma16();
        let d = (img.width() as usize, img.height() as usize);
        match dims {
            None => dims = Some(d),
            Some(prev) if prev != d => {
                return Err(Error::format(
                    &file,
                    0,
                    format!("band size {d:?} differs from {prev:?}"),
                ));
            }
            _ => {}
        }
        data.extend(img.as_raw().iter().map(|&v| T::lit(v as f64 / 65535.0)));
    }
    let (w, h) = dims.expect("48 bands read");
    HyperCube::new(w, h, data)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "train" => Ok(Split::Train),
            "test" => Ok(Split::Test),
            other => Err(Error::domain(format!("unknown split `{other}`"))),
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Test => "test",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub path: PathBuf,
    pub scene_id: String,
    pub split: Split,
}

/// List of cubes with their train/test assignment.
///
/// On disk: one `path<TAB>split` per line; `#` starts a comment line. Relative
/// paths are resolved against the manifest's directory.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct DatasetManifest {
    pub entries: Vec<ManifestEntry>,
}

impl DatasetManifest {
    pub fn new(entries: Vec<ManifestEntry>) -> Result<Self> {
        let mut seen = HashSet::new();
        for e in &entries {
            if !seen.insert(&e.path) {
                return Err(Error::domain(format!("{:?} listed more than once", e.path)));
            }
        }
        Ok(Self { entries })
    }

    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        let mut entries = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            let (p, split) = line.split_once('\t').ok_or_else(|| {
                Error::domain(format!(
                    "manifest line {}: expected `path<TAB>split`",
                    lineno + 1
                ))
            })?;
            let p = PathBuf::from(p);
            let path = if p.is_absolute() { p } else { base_dir.join(p) };
            let scene_id = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default();
            entries.push(ManifestEntry {
                path,
                scene_id,
                split: split.parse()?,
            });
        }
        Self::new(entries)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn to_text(&self) -> String {
        self.entries
            .iter()
            .map(|e| format!("{}\t{}\n", e.path.display(), e.split))
            .collect()
    }

    pub fn split(&self, split: Split) -> impl Iterator<Item = &ManifestEntry> {
        self.entries.iter().filter(move |e| e.split == split)
    }

    /// Loads every cube of a split, in manifest order.
    pub fn load_split<T: Scalar>(&self, split: Split) -> Result<Vec<(String, HyperCube<T>)>> {
        self.split(split)
            .map(|e| Ok((e.scene_id.clone(), load_cube(&e.path)?)))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imaging::save_cube;

    #[test]
    fn defaults_are_normalised() {
        let white = default_white_led::<f64>();
        assert_eq!(white.max(), 1.0);
        assert!(white.iter().skip(28).all(|v| v == 0.0));
        let cam = default_camera::<f64>();
        let peak = (0..3)
            .map(|c| cam.channel(c).dot(&white))
            .fold(0.0, f64::max);
        assert!((peak - 1.0).abs() < 1e-12);
        // Channels nearly coincide far in the NIR.
        let b = WavelengthGrid::band_of(860).unwrap();
        let (r, g, bl) = (cam.channel(0)[b], cam.channel(1)[b], cam.channel(2)[b]);
        assert!((r - g).abs() < 0.02 * r && (r - bl).abs() < 0.02 * r);
    }

    #[test]
    fn flat_scene_is_constant() {
        let spec = SceneSpec {
            rows: 1,
            cols: 1,
            patch_size: 4,
            patches: vec![PatchSpectrum::Flat { value: 0.5 }],
            seed: 1,
        };
        let cube: HyperCube<f64> = synth_scene(&spec).unwrap();
        assert!(cube.data().iter().all(|&v| v == 0.5));
    }

    #[test]
    fn metamer_patches_agree_on_vis_only() {
        let spec = SceneSpec::vis_metamer_pair(3);
        let a = spec.patch_reflectance(0);
        let b = spec.patch_reflectance(1);
        for n in 0..N_BANDS {
            if n < 28 {
                assert_eq!(a[n], b[n]);
            } else {
                assert_ne!(a[n], b[n]);
            }
        }
    }

    #[test]
    fn synth_is_deterministic_and_bounded() {
        let spec = SceneSpec::random(3, 4, 5, 77);
        let a: HyperCube<f64> = synth_scene(&spec).unwrap();
        let b: HyperCube<f64> = synth_scene(&spec).unwrap();
        assert_eq!(a, b);
        assert!(a.data().iter().all(|&v| (0.0..=1.0).contains(&v)));
        assert_eq!((a.width(), a.height()), (20, 15));
        let c: HyperCube<f64> = synth_scene(&SceneSpec::random(3, 4, 5, 78)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn empty_layout_is_rejected() {
        let spec = SceneSpec {
            rows: 0,
            cols: 2,
            patch_size: 1,
            patches: vec![],
            seed: 0,
        };
        assert!(synth_scene::<f64>(&spec).is_err());
    }

    #[test]
    fn ground_truth_examples() {
        let cam = default_camera::<f64>();
        let white = default_white_led::<f64>();
        let zero = HyperCube::uniform(3, 3, &SpectralCurve::zeros()).unwrap();
        assert!(ground_truth(&zero, &white, &cam)
            .unwrap()
            .data()
            .iter()
            .all(|&v| v == 0.0));

        let ones = HyperCube::uniform(2, 2, &SpectralCurve::constant(1.0).unwrap()).unwrap();
        let gt = ground_truth(&ones, &white, &cam).unwrap();
        for c in 0..3 {
            let mut expect = 0.0;
            for n in 0..N_BANDS {
                expect += white[n] * cam.channel(c)[n];
            }
            assert!(gt.channel(c).iter().all(|&v| (v - expect).abs() < 1e-14));
        }

        let spec = SceneSpec::vis_metamer_pair(2);
        let cube: HyperCube<f64> = synth_scene(&spec).unwrap();
        let gt = ground_truth(&cube, &white, &cam).unwrap();
        for c in 0..3 {
            assert_eq!(gt.get(c, 0, 0), gt.get(c, 3, 1));
        }
        assert!(ground_truth(&cube, &SpectralCurve::constant(1.0).unwrap(), &cam).is_err());
    }

    #[test]
    fn band_folder_is_scaled_by_full_range() {
        let dir = tempfile::tempdir().unwrap();
        for nm in WavelengthGrid::wavelengths() {
            let img = image::ImageBuffer::<image::Luma<u16>, _>::from_pixel(
                3,
                2,
                image::Luma([13107u16 * ((nm as u16 / 10) % 5)]),
            );
            img.save(dir.path().join(format!("{nm}.png"))).unwrap();
        }
        let cube: HyperCube<f64> = load_cube(dir.path()).unwrap();
        for (n, nm) in WavelengthGrid::wavelengths().enumerate() {
            let expect = (13107.0 * ((nm / 10) % 5) as f64) / 65535.0;
            assert!(cube.band(n).iter().all(|&v| (v - expect).abs() < 1e-15));
        }
        std::fs::remove_file(dir.path().join("500.png")).unwrap();
        assert!(load_cube::<f64>(dir.path()).is_err());
    }

    #[test]
    fn manifest_parse_and_load() {
        let dir = tempfile::tempdir().unwrap();
        let cube: HyperCube<f32> = synth_scene(&SceneSpec::random(1, 1, 2, 5)).unwrap();
        save_cube(dir.path().join("a.hsc"), &cube).unwrap();
        save_cube(dir.path().join("b.hsc"), &cube).unwrap();
        let m =
            DatasetManifest::parse("# scenes\na.hsc\ttrain\nb.hsc\ttest\n", dir.path()).unwrap();
        assert_eq!(m.split(Split::Train).count(), 1);
        let train = m.load_split::<f32>(Split::Train).unwrap();
        assert_eq!(train[0].0, "a");
        assert_eq!(train[0].1, cube);
        assert!(DatasetManifest::parse("a.hsc\ttrain\na.hsc\ttest\n", dir.path()).is_err());
        assert!(DatasetManifest::parse("a.hsc train\n", dir.path()).is_err());
        assert!(DatasetManifest::parse("a.hsc\tvalidation\n", dir.path()).is_err());
    }
}
