//! `illum`: design, simulate, evaluate and realize visibility-constrained LED
//! illumination spectra.
//!
//! Exit codes: 0 success, 2 usage or configuration error, 3 numerical failure.
//! Settings are taken from built-in defaults, then `--config`, then flags.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use illum_design::optimizer::{DesignConfig, GradMode, StepRule};
use illum_design::Error;

use crate::config::RunConfig;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("i/o error on {path:?}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Core(#[from] Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(Error::Numerical(_) | Error::Rank { .. }) => 3,
            _ => 2,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "illum",
    version,
    about = "Visibility-constrained LED illumination spectrum design"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Optimize LED weights on the train split; writes curve.csv, sigma.json,
    /// trace.jsonl and config.json.
    Design(DesignArgs),
    /// Render VIS, full-band and ground-truth images of one cube under a curve.
    Simulate(SimulateArgs),
    /// Fit the reconstructor on the train split and score the test split.
    Evaluate(EvaluateArgs),
    /// Fit non-negative LED drive levels to a target curve.
    Realize(RealizeArgs),
}

#[derive(Debug, Args)]
struct CommonArgs {
    /// JSON run configuration; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// LED bank CSV (`wavelength_nm,base_0,...`).
    #[arg(long)]
    bank: Option<PathBuf>,
    /// Camera CSV (`wavelength_nm,r,g,b`).
    #[arg(long)]
    camera: Option<PathBuf>,
    /// Scotopic luminosity CSV.
    #[arg(long)]
    scotopic: Option<PathBuf>,
    /// Ground-truth illuminant CSV.
    #[arg(long)]
    white_led: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum GradModeArg {
    AnalyticNoiseFree,
    AnalyticExpectedNoise,
    FiniteDifference,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum StepRuleArg {
    Sgd,
    Adam,
}

#[derive(Debug, Args)]
struct NoiseArgs {
    /// Enable or disable camera noise.
    #[arg(long)]
    noise: Option<bool>,
    /// Camera gain κ.
    #[arg(long)]
    kappa: Option<f64>,
    /// Standard deviation of the additive Gaussian pattern.
    #[arg(long)]
    pattern_std: Option<f64>,
}

#[derive(Debug, Args)]
struct DesignArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[command(flatten)]
    noise: NoiseArgs,
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Visibility threshold Ψ̂ (`inf` for unconstrained).
    #[arg(long)]
    psi_hat: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    iters: Option<usize>,
    #[arg(long)]
    step_size: Option<f64>,
    #[arg(long)]
    decay_every: Option<usize>,
    #[arg(long)]
    decay_factor: Option<f64>,
    #[arg(long)]
    batch: Option<usize>,
    #[arg(long, value_enum)]
    grad_mode: Option<GradModeArg>,
    #[arg(long)]
    fd_step: Option<f64>,
    #[arg(long, value_enum)]
    step_rule: Option<StepRuleArg>,
    #[arg(long)]
    beta1: Option<f64>,
    #[arg(long)]
    beta2: Option<f64>,
    #[arg(long)]
    init_logit: Option<f64>,
    /// Ridge weight of the reconstructor fit.
    #[arg(long)]
    ridge: Option<f64>,
    #[arg(long)]
    checkpoint_every: Option<usize>,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[command(flatten)]
    noise: NoiseArgs,
    /// HSC1 cube file or folder of per-band PNGs.
    #[arg(long)]
    cube: Option<PathBuf>,
    /// Illumination spectrum CSV.
    #[arg(long)]
    curve: Option<PathBuf>,
    #[arg(long)]
    xi_vis: Option<f64>,
    #[arg(long)]
    xi_nir: Option<f64>,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[command(flatten)]
    noise: NoiseArgs,
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Illumination spectrum CSV.
    #[arg(long)]
    curve: Option<PathBuf>,
    #[arg(long)]
    xi_vis: Option<f64>,
    #[arg(long)]
    xi_nir: Option<f64>,
    #[arg(long)]
    ridge: Option<f64>,
    /// Score the ground truth against itself instead of a reconstruction.
    #[arg(long)]
    self_check: bool,
}

#[derive(Debug, Args)]
struct RealizeArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Target spectrum CSV.
    #[arg(long)]
    curve: Option<PathBuf>,
    /// Keep at most this many LEDs.
    #[arg(long)]
    max_active: Option<usize>,
}

fn set<T>(slot: &mut T, flag: Option<T>) {
    if let Some(v) = flag {
        *slot = v;
    }
}

fn set_path(slot: &mut Option<PathBuf>, flag: &Option<PathBuf>) {
    if flag.is_some() {
        slot.clone_from(flag);
    }
}

impl CommonArgs {
    fn resolve(&self) -> Result<RunConfig, CliError> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        set_path(&mut cfg.bank, &self.bank);
        set_path(&mut cfg.camera, &self.camera);
        set_path(&mut cfg.scotopic, &self.scotopic);
        set_path(&mut cfg.white_led, &self.white_led);
        set_path(&mut cfg.out, &self.out);
        set(&mut cfg.design.seed, self.seed);
        Ok(cfg)
    }
}

impl NoiseArgs {
    fn apply(&self, d: &mut DesignConfig) {
        set(&mut d.noise.enabled, self.noise);
        set(&mut d.noise.kappa, self.kappa);
        set(&mut d.noise.pattern_std, self.pattern_std);
    }
}

impl DesignArgs {
    fn resolve(&self) -> Result<RunConfig, CliError> {
        let mut cfg = self.common.resolve()?;
        set_path(&mut cfg.manifest, &self.manifest);
        let d = &mut cfg.design;
        self.noise.apply(d);
        set(&mut d.psi_hat, self.psi_hat);
        set(&mut d.epsilon, self.epsilon);
        set(&mut d.iters, self.iters);
        set(&mut d.step_size, self.step_size);
        set(&mut d.decay_every, self.decay_every);
        set(&mut d.decay_factor, self.decay_factor);
        set(&mut d.batch, self.batch);
        set(
            &mut d.grad_mode,
            self.grad_mode.map(|g| match g {
                GradModeArg::AnalyticNoiseFree => GradMode::AnalyticNoiseFree,
                GradModeArg::AnalyticExpectedNoise => GradMode::AnalyticExpectedNoise,
                GradModeArg::FiniteDifference => GradMode::FiniteDifference,
            }),
        );
        set(&mut d.fd_step, self.fd_step);
        if let Some(rule) = self.step_rule {
            d.step_rule = match rule {
                StepRuleArg::Sgd => StepRule::Sgd,
                StepRuleArg::Adam => match d.step_rule {
                    adam @ StepRule::Adam { .. } => adam,
                    StepRule::Sgd => StepRule::default(),
                },
            };
        }
        if let StepRule::Adam { beta1, beta2 } = &mut d.step_rule {
            set(beta1, self.beta1);
            set(beta2, self.beta2);
        } else if self.beta1.is_some() || self.beta2.is_some() {
            return Err(CliError::Usage(
                "--beta1/--beta2 require --step-rule adam".into(),
            ));
        }
        set(&mut d.init_logit, self.init_logit);
        set(&mut d.ridge, self.ridge);
        set(&mut d.checkpoint_every, self.checkpoint_every);
        Ok(cfg)
    }
}

impl SimulateArgs {
    fn resolve(&self) -> Result<RunConfig, CliError> {
        let mut cfg = self.common.resolve()?;
        self.noise.apply(&mut cfg.design);
        set_path(&mut cfg.cube, &self.cube);
        set_path(&mut cfg.curve, &self.curve);
        set(&mut cfg.xi_vis, self.xi_vis);
        set(&mut cfg.xi_nir, self.xi_nir);
        Ok(cfg)
    }
}

impl EvaluateArgs {
    fn resolve(&self) -> Result<RunConfig, CliError> {
        let mut cfg = self.common.resolve()?;
        self.noise.apply(&mut cfg.design);
        set_path(&mut cfg.manifest, &self.manifest);
        set_path(&mut cfg.curve, &self.curve);
        set(&mut cfg.xi_vis, self.xi_vis);
        set(&mut cfg.xi_nir, self.xi_nir);
        set(&mut cfg.design.ridge, self.ridge);
        Ok(cfg)
    }
}

impl RealizeArgs {
    fn resolve(&self) -> Result<RunConfig, CliError> {
        let mut cfg = self.common.resolve()?;
        set_path(&mut cfg.curve, &self.curve);
        if self.max_active.is_some() {
            cfg.max_active = self.max_active;
        }
        Ok(cfg)
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Design(a) => commands::design(a.resolve()?),
        Command::Simulate(a) => commands::simulate(a.resolve()?),
        Command::Evaluate(a) => {
            let self_check = a.self_check;
            commands::evaluate(a.resolve()?, self_check)
        }
        Command::Realize(a) => commands::realize(a.resolve()?),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
