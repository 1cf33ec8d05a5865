//! Illumination spectrum design for seeing in the dark.
//!
//! The crate builds a wide-band (420–890 nm) illuminant out of a bank of LED
//! bases, caps how visible that illuminant is to dark-adapted (scotopic) eyes,
//! simulates the RGB images a camera records under it, and searches for the
//! LED mix that lets a restoration model recover a white-light RGB image.
//!
//! Pipeline, one module per stage:
//!
//! - [`spectra`]: the shared 48-band grid, luminosity tables, LED multiplexing
//!   and perceived power.
//! - [`visibility`]: the projection that scales visible LED coefficients so the
//!   mixed spectrum stays under a perceived-power threshold.
//! - [`imaging`]: reflectance-cube rendering, VIS/full-band splitting, Poisson
//!   plus pattern noise, and the `HSC1` cube file format.
//! - [`dataset`]: cube ingestion, synthetic scenes and ground-truth synthesis.
//! - [`restore`]: the closed-form affine reconstructor and SSIM/PSNR/MSE.
//! - [`optimizer`]: the end-to-end spectrum design loop.
//! - [`realize`]: non-negative drive-level fitting of a designed curve.
//!
//! Numeric types are generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix the scalar for the common cases. The design loop itself runs in
//! `f64`.

pub mod dataset;
pub mod error;
pub mod imaging;
pub mod linalg;
pub mod optimizer;
pub mod realize;
pub mod restore;
pub mod spectra;
pub mod visibility;

mod scalar;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub use spectra::{WavelengthGrid, N_BANDS};

/// Spectral curve in double precision.
pub type Curve = spectra::SpectralCurve<f64>;
/// Spectral curve in single precision.
pub type Curve32 = spectra::SpectralCurve<f32>;
pub type Bank = spectra::LedBank<f64>;
pub type Bank32 = spectra::LedBank<f32>;
pub type Luminosity = spectra::LuminosityTables<f64>;
pub type Weights = visibility::DesignWeights<f64>;
pub type Weights32 = visibility::DesignWeights<f32>;
pub type Projection = visibility::ProjectionResult<f64>;
pub type Camera = imaging::CameraSensitivity<f64>;
pub type Camera32 = imaging::CameraSensitivity<f32>;
pub type Cube = imaging::HyperCube<f64>;
pub type Cube32 = imaging::HyperCube<f32>;
pub type Image = imaging::RgbImage<f64>;
pub type Image32 = imaging::RgbImage<f32>;
pub type Noise = imaging::NoiseModel<f64>;
pub type Reconstructor = restore::LinearReconstructor<f64>;
pub type Realization = realize::RealizationFit<f64>;
