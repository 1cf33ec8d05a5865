//! Descent on the LED design weights under the visibility bound.
//!
//! The logits `z` parameterise `σ = logistic(z)`; every objective evaluation
//! projects σ onto the bound, renders the training scenes, re-fits the
//! reconstructor in closed form, and scores it against the white-light
//! renders.

mod config;
mod moments;
mod objective;

use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use config::{DesignConfig, GradMode, NoiseConfig, StepRule};
pub use moments::AnalyticEval;
pub use objective::{DesignProblem, Evaluation, Scene};

use crate::dataset::DatasetManifest;
use crate::error::{Error, Result};
use crate::imaging::{derive_seed, CameraSensitivity};
use crate::spectra::{LedBank, SpectralCurve};

const TAG_BATCH: u64 = 1;
const TAG_STEP: u64 = 2;
const TAG_EVAL: u64 = 3;

/// Relative slack allowed on Ψ ≤ Ψ̂ at checkpoints.
pub const FEASIBILITY_SLACK: f64 = 1e-9;

/// One checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    /// Number of descent steps taken.
    pub iteration: usize,
    pub sigma: Vec<f64>,
    pub xi: f64,
    pub psi_after: f64,
    /// Objective over the full training set, fixed evaluation seed.
    pub loss: f64,
    pub best_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DesignTrace {
    pub records: Vec<TraceRecord>,
}

impl DesignTrace {
    /// One JSON object per line.
    pub fn to_jsonl(&self) -> String {
        self.records
            .iter()
            .map(|r| serde_json::to_string(r).expect("trace records serialize") + "\n")
            .collect()
    }

    pub fn from_jsonl(text: &str) -> Result<Self> {
        let records = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(serde_json::from_str)
            .collect::<std::result::Result<_, _>>()?;
        Ok(Self { records })
    }

    pub fn write_jsonl(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(self.to_jsonl().as_bytes())
            .map_err(|e| Error::io(path, e))
    }
}

/// JSON sidecar written next to the designed curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignSummary {
    pub sigma: Vec<f64>,
    pub xi: f64,
    pub psi_after: f64,
    /// `null` when unconstrained.
    pub psi_hat: Option<f64>,
    pub loss: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DesignOutcome {
    /// Best-loss design weights σ*.
    pub sigma_star: Vec<f64>,
    pub logits: Vec<f64>,
    /// Projected spectrum Φ̂* at σ*.
    pub curve: SpectralCurve<f64>,
    pub xi: f64,
    pub psi_after: f64,
    pub loss: f64,
    pub trace: DesignTrace,
}

impl DesignOutcome {
    pub fn summary(&self, psi_hat: f64) -> DesignSummary {
        DesignSummary {
            sigma: self.sigma_star.clone(),
            xi: self.xi,
            psi_after: self.psi_after,
            psi_hat: psi_hat.is_finite().then_some(psi_hat),
            loss: self.loss,
        }
    }
}

/// A run that stopped early, with the checkpoints recorded so far.
#[derive(Debug, thiserror::Error)]
#[error("{error}")]
pub struct DesignFailure {
    pub error: Error,
    pub trace: DesignTrace,
}

impl From<Error> for DesignFailure {
    fn from(error: Error) -> Self {
        Self {
            error,
            trace: DesignTrace::default(),
        }
    }
}

/// Shuffled passes over the training scenes.
#[derive(Debug, Clone)]
struct BatchSampler {
    n: usize,
    size: usize,
    seed: u64,
    epoch: u64,
    order: Vec<usize>,
    pos: usize,
}

impl BatchSampler {
    fn new(n: usize, size: usize, seed: u64) -> Self {
        let mut s = Self {
            n,
            size: size.min(n),
            seed,
            epoch: 0,
            order: Vec::new(),
            pos: 0,
        };
        s.reshuffle();
        s
    }

    fn reshuffle(&mut self) {
        self.order = (0..self.n).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(self.seed, &[TAG_BATCH, self.epoch]));
        self.order.shuffle(&mut rng);
        self.pos = 0;
    }

    fn next_batch(&mut self) -> Vec<usize> {
        let mut batch = Vec::with_capacity(self.size);
        while batch.len() < self.size {
            if self.pos == self.n {
                self.epoch += 1;
                self.reshuffle();
            }
            batch.push(self.order[self.pos]);
            self.pos += 1;
        }
        batch
    }
}

enum Stepper {
    Sgd,
    Adam {
        beta1: f64,
        beta2: f64,
        m: Vec<f64>,
        v: Vec<f64>,
        t: i32,
    },
}

impl Stepper {
    fn new(rule: StepRule, k: usize) -> Self {
        match rule {
            StepRule::Sgd => Stepper::Sgd,
            StepRule::Adam { beta1, beta2 } => Stepper::Adam {
                beta1,
                beta2,
                m: vec![0.0; k],
                v: vec![0.0; k],
                t: 0,
            },
        }
    }

    fn step(&mut self, z: &mut [f64], g: &[f64], lr: f64) {
        match self {
            Stepper::Sgd => z.iter_mut().zip(g).for_each(|(z, g)| *z -= lr * g),
            Stepper::Adam {
                beta1,
                beta2,
                m,
                v,
                t,
            } => {
                *t += 1;
                let c1 = 1.0 - beta1.powi(*t);
                let c2 = 1.0 - beta2.powi(*t);
                for k in 0..z.len() {
                    m[k] = *beta1 * m[k] + (1.0 - *beta1) * g[k];
                    v[k] = *beta2 * v[k] + (1.0 - *beta2) * g[k] * g[k];
                    z[k] -= lr * (m[k] / c1) / ((v[k] / c2).sqrt() + 1e-8);
                }
            }
        }
    }
}

impl DesignProblem {
    /// Descent direction for one step on `batch`.
    pub fn gradient(
        &self,
        logits: &[f64],
        batch: &[usize],
        config: &DesignConfig,
        noise_seed: u64,
    ) -> Result<Vec<f64>> {
        match config.grad_mode {
            GradMode::AnalyticNoiseFree | GradMode::AnalyticExpectedNoise => {
                Ok(self.analytic(logits, batch, config)?.grad)
            }
            GradMode::FiniteDifference => {
                let h = config.fd_step;
                (0..logits.len())
                    .map(|k| {
                        let mut zp = logits.to_vec();
                        let mut zm = logits.to_vec();
                        zp[k] += h;
                        zm[k] -= h;
                        let fp = self.objective(&zp, batch, config, noise_seed)?;
                        let fm = self.objective(&zm, batch, config, noise_seed)?;
                        Ok((fp - fm) / (2.0 * h))
                    })
                    .collect()
            }
        }
    }
}

/// Runs the descent and returns the best checkpoint.
pub fn run_design(
    problem: &DesignProblem,
    config: &DesignConfig,
) -> std::result::Result<DesignOutcome, DesignFailure> {
    config.validate()?;
    let k = problem.bank.len();
    let all = problem.all_scenes();
    let eval_seed = derive_seed(config.seed, &[TAG_EVAL]);
    let mut z = vec![config.init_logit; k];
    let mut stepper = Stepper::new(config.step_rule, k);
    let mut sampler = BatchSampler::new(all.len(), config.batch, config.seed);
    let mut trace = DesignTrace::default();
    let mut best: Option<(f64, Vec<f64>, Evaluation)> = None;

    let mut checkpoint = |iteration: usize, z: &[f64], trace: &mut DesignTrace| -> Result<()> {
        let ev = problem.evaluate(z, &all, config, eval_seed)?;
        if !ev.loss.is_finite() {
            return Err(Error::Numerical(format!(
                "non-finite loss {} at iteration {iteration}",
                ev.loss
            )));
        }
        if ev.projection.psi_after > config.psi_hat * (1.0 + FEASIBILITY_SLACK) {
            return Err(Error::Numerical(format!(
                "Ψ = {} exceeds Ψ̂ = {} at iteration {iteration}",
                ev.projection.psi_after, config.psi_hat
            )));
        }
        if best.as_ref().is_none_or(|(l, ..)| ev.loss < *l) {
            best = Some((ev.loss, z.to_vec(), ev.clone()));
        }
        trace.records.push(TraceRecord {
            iteration,
            sigma: ev.sigma.clone(),
            xi: ev.projection.xi,
            psi_after: ev.projection.psi_after,
            loss: ev.loss,
            best_loss: best.as_ref().unwrap().0,
        });
        Ok(())
    };

    let fail = |error: Error, trace: &DesignTrace| DesignFailure {
        error,
        trace: trace.clone(),
    };
    checkpoint(0, &z, &mut trace).map_err(|e| fail(e, &trace))?;
    for t in 0..config.iters {
        let batch = sampler.next_batch();
        let g = problem
            .gradient(
                &z,
                &batch,
                config,
                derive_seed(config.seed, &[TAG_STEP, t as u64]),
            )
            .map_err(|e| fail(e, &trace))?;
        if let Some(bad) = g.iter().find(|v| !v.is_finite()) {
            let e = Error::Numerical(format!("non-finite gradient {bad} at iteration {t}"));
            return Err(fail(e, &trace));
        }
        stepper.step(&mut z, &g, config.step_size_at(t));
        let done = t + 1;
        if done % config.checkpoint_every == 0 || done == config.iters {
            checkpoint(done, &z, &mut trace).map_err(|e| fail(e, &trace))?;
        }
    }

    let (loss, logits, ev) = best.expect("at least one checkpoint");
    Ok(DesignOutcome {
        sigma_star: ev.sigma,
        logits,
        curve: ev.spectrum,
        xi: ev.projection.xi,
        psi_after: ev.projection.psi_after,
        loss,
        trace,
    })
}

/// [`run_design`] on the train split of `manifest`, with the default white
/// LED as ground-truth illuminant.
pub fn design_spectrum(
    manifest: &DatasetManifest,
    bank: &LedBank<f64>,
    camera: &CameraSensitivity<f64>,
    scotopic: &SpectralCurve<f64>,
    config: &DesignConfig,
) -> std::result::Result<DesignOutcome, DesignFailure> {
    let problem =
        DesignProblem::from_manifest(manifest, bank.clone(), camera.clone(), *scotopic)?;
    run_design(&problem, config)
}
