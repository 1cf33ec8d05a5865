//! Effective run configuration: defaults, then the `--config` file, then flags.

use std::path::{Path, PathBuf};

use illum_design::optimizer::DesignConfig;
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Everything a command reads. Saved as `config.json` in the output
/// directory before any work starts; `--config` on that file replays the run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Dataset manifest (`path<TAB>split` lines).
    pub manifest: Option<PathBuf>,
    /// LED bank CSV; the built-in 26-LED bank when absent.
    pub bank: Option<PathBuf>,
    /// Camera CSV (`wavelength_nm,r,g,b`); the built-in camera when absent.
    pub camera: Option<PathBuf>,
    /// Scotopic luminosity override (spectrum CSV); CIE 1951 when absent.
    pub scotopic: Option<PathBuf>,
    /// Ground-truth illuminant override (spectrum CSV).
    pub white_led: Option<PathBuf>,
    pub out: Option<PathBuf>,
    /// Hyperspectral cube (`simulate`).
    pub cube: Option<PathBuf>,
    /// Illumination curve (`simulate`, `evaluate`) or realization target (`realize`).
    pub curve: Option<PathBuf>,
    /// Noise scale factors used by `simulate` and `evaluate`.
    pub xi_vis: f64,
    pub xi_nir: f64,
    /// Support limit for `realize`.
    pub max_active: Option<usize>,
    /// Optimizer settings; `design.seed` is the single seed of every command.
    pub design: DesignConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            manifest: None,
            bank: None,
            camera: None,
            scotopic: None,
            white_led: None,
            out: None,
            cube: None,
            curve: None,
            xi_vis: 1.0,
            xi_nir: 1.0,
            max_active: None,
            design: DesignConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            CliError::Usage(format!("cannot read --config {}: {e}", path.display()))
        })?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Usage(format!("invalid --config {}: {e}", path.display())))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes") + "\n"
    }

    /// Makes every path absolute so the saved config replays from any
    /// working directory.
    pub fn absolutize(&mut self) -> Result<(), CliError> {
        for p in [
            &mut self.manifest,
            &mut self.bank,
            &mut self.camera,
            &mut self.scotopic,
            &mut self.white_led,
            &mut self.out,
            &mut self.cube,
            &mut self.curve,
        ]
        .into_iter()
        .flatten()
        {
            *p = std::path::absolute(&*p)
                .map_err(|e| CliError::Usage(format!("bad path {}: {e}", p.display())))?;
        }
        Ok(())
    }

    pub fn require<'a>(field: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path, CliError> {
        field.as_deref().ok_or_else(|| {
            CliError::Usage(format!(
                "missing --{flag} (or `{}` in --config)",
                flag.replace('-', "_")
            ))
        })
    }
}
