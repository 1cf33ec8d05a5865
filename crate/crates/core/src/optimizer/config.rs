use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::{NoiseModel, PatternSource};
use crate::restore::DEFAULT_RIDGE;
use crate::visibility::DEFAULT_EPSILON;

/// How the descent direction is computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GradMode {
    /// Exact gradient of the noise-free objective.
    #[default]
    AnalyticNoiseFree,
    /// Exact gradient of the noise-free objective with the reconstructor's
    /// Gram matrix replaced by its expectation under the noise model.
    AnalyticExpectedNoise,
    /// Central differences of the (noisy) objective, same seed on both sides.
    FiniteDifference,
}

/// Update rule applied to the logits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StepRule {
    Sgd,
    Adam { beta1: f64, beta2: f64 },
}

impl Default for StepRule {
    fn default() -> Self {
        StepRule::Adam {
            beta1: 0.5,
            beta2: 0.999,
        }
    }
}

/// Camera noise used by the objective.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseConfig {
    pub enabled: bool,
    /// Camera gain κ.
    pub kappa: f64,
    /// Standard deviation of the additive Gaussian pattern; 0 disables it.
    pub pattern_std: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            kappa: 1.0 / 255.0,
            pattern_std: 1.0 / 255.0,
        }
    }
}

impl NoiseConfig {
    pub fn disabled() -> Self {
        Self {
            enabled: false,
            ..Self::default()
        }
    }

    /// The model for one draw, or `None` when noise is off.
    pub fn model(&self, seed: u64) -> Result<Option<NoiseModel<f64>>> {
        if !self.enabled {
            return Ok(None);
        }
        let pattern = if self.pattern_std > 0.0 {
            PatternSource::Gaussian {
                std: self.pattern_std,
            }
        } else {
            PatternSource::None
        };
        NoiseModel::new(self.kappa, pattern, seed).map(Some)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DesignConfig {
    /// Visibility threshold Ψ̂. `null` in JSON means unconstrained.
    #[serde(with = "psi_hat_serde")]
    pub psi_hat: f64,
    pub epsilon: f64,
    pub iters: usize,
    pub step_size: f64,
    /// The step size is multiplied by `decay_factor` every `decay_every` iterations.
    pub decay_every: usize,
    pub decay_factor: f64,
    pub batch: usize,
    pub grad_mode: GradMode,
    /// Logit-space step for finite differences.
    pub fd_step: f64,
    pub step_rule: StepRule,
    /// Initial value of every logit.
    pub init_logit: f64,
    /// Ridge weight of the reconstructor fit.
    pub ridge: f64,
    pub noise: NoiseConfig,
    /// Checkpoint (full train-split evaluation) period; the last iteration is
    /// always a checkpoint.
    pub checkpoint_every: usize,
    pub seed: u64,
}

impl Default for DesignConfig {
    fn default() -> Self {
        Self {
            psi_hat: 10.0,
            epsilon: DEFAULT_EPSILON,
            iters: 50_000,
            step_size: 1e-3,
            decay_every: 20_000,
            decay_factor: 0.1,
            batch: 16,
            grad_mode: GradMode::default(),
            fd_step: 1e-3,
            step_rule: StepRule::default(),
            init_logit: 0.0,
            ridge: DEFAULT_RIDGE,
            noise: NoiseConfig::default(),
            checkpoint_every: 100,
            seed: 0,
        }
    }
}

impl DesignConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::domain(m));
        if !(self.psi_hat > 0.0) {
            return fail(format!("psi_hat = {} must be > 0", self.psi_hat));
        }
        if !(self.epsilon > 0.0) || !self.epsilon.is_finite() {
            return fail(format!("epsilon = {} must be finite and > 0", self.epsilon));
        }
        if self.iters == 0 {
            return fail("iters must be ≥ 1".into());
        }
        if !(self.step_size > 0.0) || !self.step_size.is_finite() {
            return fail(format!(
                "step_size = {} must be finite and > 0",
                self.step_size
            ));
        }
        if self.decay_every == 0 {
            return fail("decay_every must be ≥ 1".into());
        }
        if !(self.decay_factor > 0.0 && self.decay_factor <= 1.0) {
            return fail(format!(
                "decay_factor = {} must be in (0, 1]",
                self.decay_factor
            ));
        }
        if self.batch == 0 {
            return fail("batch must be ≥ 1".into());
        }
        if !(self.fd_step > 0.0) || !self.fd_step.is_finite() {
            return fail(format!("fd_step = {} must be finite and > 0", self.fd_step));
        }
        if let StepRule::Adam { beta1, beta2 } = self.step_rule {
            if !(0.0..1.0).contains(&beta1) || !(0.0..1.0).contains(&beta2) {
                return fail(format!("Adam betas ({beta1}, {beta2}) must be in [0, 1)"));
            }
        }
        if !self.init_logit.is_finite() {
            return fail("init_logit must be finite".into());
        }
        if !(self.ridge >= 0.0) || !self.ridge.is_finite() {
            return fail(format!("ridge = {} must be finite and ≥ 0", self.ridge));
        }
        if self.noise.enabled {
            if !(self.noise.kappa > 0.0) || !self.noise.kappa.is_finite() {
                return fail(format!(
                    "noise.kappa = {} must be finite and > 0",
                    self.noise.kappa
                ));
            }
            if !(self.noise.pattern_std >= 0.0) || !self.noise.pattern_std.is_finite() {
                return fail(format!(
                    "noise.pattern_std = {} must be finite and ≥ 0",
                    self.noise.pattern_std
                ));
            }
        }
        if self.checkpoint_every == 0 {
            return fail("checkpoint_every must be ≥ 1".into());
        }
        Ok(())
    }

    /// Step size in effect at iteration `t` (0-based).
    pub fn step_size_at(&self, t: usize) -> f64 {
        self.step_size * self.decay_factor.powi((t / self.decay_every) as i32)
    }
}

/// JSON has no infinity; an unconstrained threshold is written as `null`.
mod psi_hat_serde {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_infinite() && *v > 0.0 {
            s.serialize_none()
        } else {
            s.serialize_f64(*v)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}
