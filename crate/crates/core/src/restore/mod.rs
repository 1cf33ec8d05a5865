//! Restoration surrogate and image-quality metrics.

mod metrics;
mod reconstructor;

pub use metrics::{mse_loss, psnr, ssim, MetricsRecord, PSNR_CAP_DB};
pub use reconstructor::{
    apply_reconstructor, fit_reconstructor, fit_reconstructor_pooled, LinearReconstructor,
    NormalEquations, DEFAULT_RIDGE, N_FEATURES,
};
