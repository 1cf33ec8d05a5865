//! Subcommand bodies. Each one writes its effective `config.json` before
//! touching any input.

use std::fs;
use std::path::Path;

use illum_design::dataset::{
    default_camera, default_white_led, ground_truth, load_cube, DatasetManifest, Split,
};
use illum_design::imaging::{
    add_noise, derive_seed, render, split_vis, write_png16, write_raw_f32, CameraSensitivity,
    HyperCube, RgbImage,
};
use illum_design::optimizer::{run_design, DesignProblem};
use illum_design::realize::fit_nnls;
use illum_design::restore::{
    apply_reconstructor, fit_reconstructor_pooled, mse_loss, psnr, ssim, MetricsRecord,
};
use illum_design::spectra::{
    read_bank_csv, read_camera_csv, read_spectrum_csv, write_spectrum_csv, LedBank,
    LuminosityTables, SpectralCurve,
};
use serde::Serialize;

use crate::config::RunConfig;
use crate::CliError;

/// Seed-path tags separating the train and test noise streams of `evaluate`.
const TRAIN_STREAM: u64 = 0;
const TEST_STREAM: u64 = 1;

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(illum_design::Error::from)? + "\n";
    write_file(path, text)
}

/// Absolutizes paths, creates the output directory and saves the config.
fn prepare(cfg: &mut RunConfig) -> Result<std::path::PathBuf, CliError> {
    cfg.absolutize()?;
    let out = RunConfig::require(&cfg.out, "out")?.to_path_buf();
    fs::create_dir_all(&out).map_err(|source| CliError::Io {
        path: out.clone(),
        source,
    })?;
    write_file(&out.join("config.json"), cfg.to_json())?;
    Ok(out)
}

struct Optics {
    scotopic: SpectralCurve<f64>,
    bank: LedBank<f64>,
    camera: CameraSensitivity<f64>,
    white_led: SpectralCurve<f64>,
}

fn optics(cfg: &RunConfig) -> Result<Optics, CliError> {
    let scotopic = match &cfg.scotopic {
        Some(p) => read_spectrum_csv(p)?,
        None => LuminosityTables::cie().scotopic,
    };
    let bank = match &cfg.bank {
        Some(p) => read_bank_csv(p, &scotopic)?,
        None => LedBank::default_bank(&scotopic),
    };
    let camera = match &cfg.camera {
        Some(p) => read_camera_csv(p)?,
        None => default_camera(),
    };
    let white_led = match &cfg.white_led {
        Some(p) => read_spectrum_csv(p)?,
        None => default_white_led(),
    };
    Ok(Optics {
        scotopic,
        bank,
        camera,
        white_led,
    })
}

pub fn design(mut cfg: RunConfig) -> Result<(), CliError> {
    // Validate before writing anything so a bad threshold leaves no output.
    RunConfig::require(&cfg.manifest, "manifest")?;
    cfg.design.validate()?;
    let out = prepare(&mut cfg)?;
    let o = optics(&cfg)?;
    let manifest = DatasetManifest::read(RunConfig::require(&cfg.manifest, "manifest")?)?;
    let cubes = manifest.load_split(Split::Train)?;
    let problem = DesignProblem::new(cubes, o.bank, o.camera, o.scotopic, o.white_led)?;

    match run_design(&problem, &cfg.design) {
        Ok(outcome) => {
            write_spectrum_csv(out.join("curve.csv"), &outcome.curve)?;
            write_json(
                &out.join("sigma.json"),
                &outcome.summary(cfg.design.psi_hat),
            )?;
            outcome.trace.write_jsonl(out.join("trace.jsonl"))?;
            println!(
                "loss {:.6e}  psi {:.6e}  xi {:.6}  -> {}",
                outcome.loss,
                outcome.psi_after,
                outcome.xi,
                out.display()
            );
            Ok(())
        }
        Err(failure) => {
            failure.trace.write_jsonl(out.join("trace.jsonl"))?;
            Err(failure.error.into())
        }
    }
}

fn save_image(out: &Path, stem: &str, img: &RgbImage<f64>) -> Result<(), CliError> {
    write_png16(out.join(format!("{stem}.png")), img)?;
    write_raw_f32(out.join(format!("{stem}.f32")), img)?;
    Ok(())
}

/// VIS-light and full-light captures of `cube` under `curve`, noisy when the
/// config enables noise.
fn capture(
    cfg: &RunConfig,
    o: &Optics,
    cube: &HyperCube<f64>,
    curve: &SpectralCurve<f64>,
    seed_path: &[u64],
) -> Result<(RgbImage<f64>, RgbImage<f64>), CliError> {
    let vis = render(cube, &split_vis(curve), &o.camera);
    let nir = render(cube, curve, &o.camera);
    let seed = derive_seed(cfg.design.seed, seed_path);
    match cfg.design.noise.model(seed)? {
        Some(model) => Ok((
            add_noise(&vis, cfg.xi_vis, &model.reseeded(derive_seed(seed, &[0])))?,
            add_noise(&nir, cfg.xi_nir, &model.reseeded(derive_seed(seed, &[1])))?,
        )),
        None => Ok((vis, nir)),
    }
}

pub fn simulate(mut cfg: RunConfig) -> Result<(), CliError> {
    let out = prepare(&mut cfg)?;
    let o = optics(&cfg)?;
    let cube: HyperCube<f64> = load_cube(RunConfig::require(&cfg.cube, "cube")?)?;
    let curve: SpectralCurve<f64> = read_spectrum_csv(RunConfig::require(&cfg.curve, "curve")?)?;
    let gt = ground_truth(&cube, &o.white_led, &o.camera)?;
    let (vis, nir) = capture(&cfg, &o, &cube, &curve, &[])?;
    save_image(&out, "vis", &vis)?;
    save_image(&out, "nir", &nir)?;
    save_image(&out, "gt", &gt)?;
    println!("{}x{} -> {}", cube.width(), cube.height(), out.display());
    Ok(())
}

#[derive(Debug, Serialize)]
struct Aggregate {
    ssim: f64,
    psnr: f64,
    mse: f64,
}

#[derive(Debug, Serialize)]
struct Report {
    train_scenes: usize,
    scenes: Vec<MetricsRecord>,
    mean: Aggregate,
}

fn score(
    scene_id: &str,
    pred: &RgbImage<f64>,
    gt: &RgbImage<f64>,
) -> Result<MetricsRecord, CliError> {
    Ok(MetricsRecord {
        scene_id: scene_id.to_string(),
        ssim: ssim(pred, gt)?,
        psnr: psnr(pred, gt, 1.0)?,
        mse: mse_loss(pred, gt)?,
    })
}

pub fn evaluate(mut cfg: RunConfig, self_check: bool) -> Result<(), CliError> {
    RunConfig::require(&cfg.manifest, "manifest")?;
    if !self_check {
        RunConfig::require(&cfg.curve, "curve")?;
    }
    let out = prepare(&mut cfg)?;
    let o = optics(&cfg)?;
    let manifest = DatasetManifest::read(RunConfig::require(&cfg.manifest, "manifest")?)?;
    let test: Vec<(String, HyperCube<f64>)> = manifest.load_split(Split::Test)?;
    if test.is_empty() {
        return Err(CliError::Usage("manifest has no test scenes".into()));
    }

    let mut records = Vec::with_capacity(test.len());
    let mut train_scenes = 0;
    if self_check {
        for (id, cube) in &test {
            let gt = ground_truth(cube, &o.white_led, &o.camera)?;
            records.push(score(id, &gt, &gt)?);
        }
    } else {
        let curve: SpectralCurve<f64> =
            read_spectrum_csv(RunConfig::require(&cfg.curve, "curve")?)?;
        let train: Vec<(String, HyperCube<f64>)> = manifest.load_split(Split::Train)?;
        if train.is_empty() {
            return Err(CliError::Usage("manifest has no train scenes".into()));
        }
        train_scenes = train.len();
        let mut triples = Vec::with_capacity(train.len());
        for (i, (_, cube)) in train.iter().enumerate() {
            let (vis, nir) = capture(&cfg, &o, cube, &curve, &[TRAIN_STREAM, i as u64])?;
            triples.push((vis, nir, ground_truth(cube, &o.white_led, &o.camera)?));
        }
        let refs: Vec<_> = triples.iter().map(|(v, n, g)| (v, n, g)).collect();
        let model = fit_reconstructor_pooled(&refs, cfg.design.ridge)?;
        for (i, (id, cube)) in test.iter().enumerate() {
            let (vis, nir) = capture(&cfg, &o, cube, &curve, &[TEST_STREAM, i as u64])?;
            let pred = apply_reconstructor(&model, &vis, &nir)?;
            records.push(score(
                id,
                &pred,
                &ground_truth(cube, &o.white_led, &o.camera)?,
            )?);
        }
    }

    let n = records.len() as f64;
    let mean = Aggregate {
        ssim: records.iter().map(|r| r.ssim).sum::<f64>() / n,
        psnr: records.iter().map(|r| r.psnr).sum::<f64>() / n,
        mse: records.iter().map(|r| r.mse).sum::<f64>() / n,
    };
    let report = Report {
        train_scenes,
        scenes: records,
        mean,
    };
    write_json(&out.join("report.json"), &report)?;
    println!(
        "{} test scenes  ssim {:.4}  psnr {:.2} dB  mse {:.4e}",
        report.scenes.len(),
        report.mean.ssim,
        report.mean.psnr,
        report.mean.mse
    );
    Ok(())
}

#[derive(Debug, Serialize)]
struct FitReport {
    weights: Vec<f64>,
    residual_l2: f64,
    active_indices: Vec<usize>,
}

pub fn realize(mut cfg: RunConfig) -> Result<(), CliError> {
    let out = prepare(&mut cfg)?;
    let o = optics(&cfg)?;
    let target: SpectralCurve<f64> = read_spectrum_csv(RunConfig::require(&cfg.curve, "curve")?)?;
    let fit = fit_nnls(&target, &o.bank, cfg.max_active)?;
    let fitted = fit.fitted_curve(&o.bank)?;
    write_json(
        &out.join("fit.json"),
        &FitReport {
            active_indices: fit.active_indices(),
            weights: fit.weights.clone(),
            residual_l2: fit.residual_l2,
        },
    )?;
    write_spectrum_csv(out.join("fitted.csv"), &fitted)?;
    println!(
        "{} active LEDs  residual {:.4e}",
        fit.active_count, fit.residual_l2
    );
    Ok(())
}
