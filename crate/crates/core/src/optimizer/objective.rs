//! The design objective evaluated on rendered images.

use rayon::prelude::*;

use super::config::DesignConfig;
use super::moments::SceneMoments;
use crate::dataset::{default_white_led, ground_truth, DatasetManifest, Split};
use crate::error::{Error, Result};
use crate::imaging::{
    add_noise, band_scale_factors, derive_seed, render, split_vis, CameraSensitivity, HyperCube,
    RgbImage,
};
use crate::restore::{apply_reconstructor, NormalEquations};
use crate::spectra::{LedBank, SpectralCurve};
use crate::visibility::{logistic, project_sigma, ProjectionResult};

const KIND_VIS: u64 = 0;
const KIND_NIR: u64 = 1;

/// A training cube and its white-light rendering.
#[derive(Debug, Clone)]
pub struct Scene {
    pub id: String,
    pub cube: HyperCube<f64>,
    pub ground_truth: RgbImage<f64>,
}

/// Everything the objective needs besides the logits: bank, camera,
/// luminosity, ground-truth illuminant and the training scenes.
#[derive(Debug, Clone)]
pub struct DesignProblem {
    pub bank: LedBank<f64>,
    pub camera: CameraSensitivity<f64>,
    pub scotopic: SpectralCurve<f64>,
    pub white_led: SpectralCurve<f64>,
    scenes: Vec<Scene>,
    moments: Vec<SceneMoments>,
}

/// One evaluation of the objective.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub loss: f64,
    pub sigma: Vec<f64>,
    pub projection: ProjectionResult<f64>,
    /// Projected spectrum Φ̂.
    pub spectrum: SpectralCurve<f64>,
    pub xi_vis: f64,
    pub xi_nir: f64,
}

impl DesignProblem {
    pub fn new(
        cubes: Vec<(String, HyperCube<f64>)>,
        bank: LedBank<f64>,
        camera: CameraSensitivity<f64>,
        scotopic: SpectralCurve<f64>,
        white_led: SpectralCurve<f64>,
    ) -> Result<Self> {
        if cubes.is_empty() {
            return Err(Error::domain("no training scenes"));
        }
        let scenes = cubes
            .into_iter()
            .map(|(id, cube)| {
                let ground_truth = ground_truth(&cube, &white_led, &camera)?;
                Ok(Scene {
                    id,
                    cube,
                    ground_truth,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let moments = scenes
            .par_iter()
            .map(|s| SceneMoments::from_cube(&s.cube))
            .collect();
        Ok(Self {
            bank,
            camera,
            scotopic,
            white_led,
            scenes,
            moments,
        })
    }

    /// Problem over the train split of `manifest`, with the default white LED
    /// as ground-truth illuminant.
    pub fn from_manifest(
        manifest: &DatasetManifest,
        bank: LedBank<f64>,
        camera: CameraSensitivity<f64>,
        scotopic: SpectralCurve<f64>,
    ) -> Result<Self> {
        let cubes = manifest.load_split(Split::Train)?;
        Self::new(cubes, bank, camera, scotopic, default_white_led())
    }

    pub fn scenes(&self) -> &[Scene] {
        &self.scenes
    }

    pub(crate) fn moments(&self) -> &[SceneMoments] {
        &self.moments
    }

    pub fn all_scenes(&self) -> Vec<usize> {
        (0..self.scenes.len()).collect()
    }

    /// Pooled reconstruction MSE over `batch` (indices into the scenes).
    ///
    /// Pipeline: σ = logistic(logits), projection onto the visibility bound,
    /// renders under vis(Φ̂) and Φ̂, noise with ξ_vis and ξ_nir when enabled,
    /// one ridge fit over the whole batch, MSE against the ground truth.
    pub fn evaluate(
        &self,
        logits: &[f64],
        batch: &[usize],
        config: &DesignConfig,
        noise_seed: u64,
    ) -> Result<Evaluation> {
        if batch.is_empty() {
            return Err(Error::domain("empty batch"));
        }
        if let Some(&i) = batch.iter().find(|&&i| i >= self.scenes.len()) {
            return Err(Error::domain(format!("scene index {i} out of range")));
        }
        let sigma: Vec<f64> = logits.iter().map(|&z| logistic(z)).collect();
        let projection = project_sigma(
            &self.bank,
            &sigma,
            &self.scotopic,
            config.psi_hat,
            config.epsilon,
        )?;
        let phi = self.bank.multiplex(&sigma)?;
        let phi_hat = self.bank.multiplex(&projection.sigma_hat)?;
        let (xi_vis, xi_nir) = band_scale_factors(&phi, &phi_hat, config.epsilon);
        let vis_light = split_vis(&phi_hat);

        let renders = batch
            .par_iter()
            .map(|&i| {
                let cube = &self.scenes[i].cube;
                let vis = render(cube, &vis_light, &self.camera);
                let nir = render(cube, &phi_hat, &self.camera);
                match config.noise.model(0)? {
                    None => Ok((vis, nir)),
                    Some(model) => {
                        let seed = |kind| derive_seed(noise_seed, &[i as u64, kind]);
                        // ξ is 0 only for a black image, where any positive value draws the same.
                        let vis = add_noise(
                            &vis,
                            xi_vis.max(f64::MIN_POSITIVE),
                            &model.reseeded(seed(KIND_VIS)),
                        )?;
                        let nir = add_noise(
                            &nir,
                            xi_nir.max(f64::MIN_POSITIVE),
                            &model.reseeded(seed(KIND_NIR)),
                        )?;
                        Ok((vis, nir))
                    }
                }
            })
            .collect::<Result<Vec<_>>>()?;

        let parts = batch
            .par_iter()
            .zip(&renders)
            .map(|(&i, (v, n))| NormalEquations::from_images(v, n, &self.scenes[i].ground_truth))
            .collect::<Result<Vec<_>>>()?;
        let mut eq = NormalEquations::default();
        for p in &parts {
            eq.merge(p);
        }
        let model = eq.solve(config.ridge)?;

        let sse: Vec<f64> = batch
            .par_iter()
            .zip(&renders)
            .map(|(&i, (v, n))| {
                let pred = apply_reconstructor(&model, v, n)?;
                Ok(pred
                    .data()
                    .iter()
                    .zip(self.scenes[i].ground_truth.data())
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>())
            })
            .collect::<Result<Vec<_>>>()?;
        let count: usize = batch
            .iter()
            .map(|&i| 3 * self.scenes[i].cube.pixels())
            .sum();
        let loss = sse.iter().sum::<f64>() / count as f64;
        Ok(Evaluation {
            loss,
            sigma,
            projection,
            spectrum: phi_hat,
            xi_vis,
            xi_nir,
        })
    }

    /// [`DesignProblem::evaluate`], loss only.
    pub fn objective(
        &self,
        logits: &[f64],
        batch: &[usize],
        config: &DesignConfig,
        noise_seed: u64,
    ) -> Result<f64> {
        Ok(self.evaluate(logits, batch, config, noise_seed)?.loss)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{default_camera, synth_scene, SceneSpec};
    use crate::optimizer::NoiseConfig;
    use crate::restore::{fit_reconstructor_pooled, mse_loss};
    use crate::spectra::LuminosityTables;
    use crate::visibility::logit;

    fn scot() -> SpectralCurve<f64> {
        LuminosityTables::cie().scotopic
    }

    fn quiet(psi_hat: f64) -> DesignConfig {
        DesignConfig {
            psi_hat,
            noise: NoiseConfig::disabled(),
            ..Default::default()
        }
    }

    fn problem(specs: &[SceneSpec], bank: LedBank<f64>) -> DesignProblem {
        let cubes = specs
            .iter()
            .enumerate()
            .map(|(i, s)| (format!("s{i}"), synth_scene(s).unwrap()))
            .collect();
        DesignProblem::new(cubes, bank, default_camera(), scot(), default_white_led()).unwrap()
    }

    #[test]
    fn white_led_bank_reconstructs_exactly() {
        let bank = LedBank::new(vec![default_white_led()], &scot()).unwrap();
        let p = problem(
            &[SceneSpec::random(3, 3, 4, 1), SceneSpec::random(2, 2, 6, 2)],
            bank,
        );
        let cfg = quiet(f64::INFINITY);
        for s in [0.1, 0.5, 0.9] {
            let loss = p
                .objective(&[logit(s).unwrap()], &p.all_scenes(), &cfg, 0)
                .unwrap();
            assert!(loss < 1e-10, "σ = {s}: {loss}");
        }
    }

    #[test]
    fn nir_only_bank_hits_the_metamer_floor() {
        let bank = LedBank::new(
            vec![
                SpectralCurve::gaussian(800.0, 30.0),
                SpectralCurve::gaussian(860.0, 30.0),
            ],
            &scot(),
        )
        .unwrap();
        assert!(bank.vis_active().iter().all(|a| !a));
        let spec = SceneSpec::nir_metamer_pair(4);
        let p = problem(std::slice::from_ref(&spec), bank);
        // Both patches render identically, so the best any map can do per
        // channel is the mean of the two ground-truth colours.
        let white = default_white_led::<f64>();
        let cam = default_camera::<f64>();
        let (a, b) = (spec.patch_reflectance(0), spec.patch_reflectance(1));
        let mut floor = 0.0;
        for c in 0..3 {
            let mut ya = 0.0;
            let mut yb = 0.0;
            for n in 0..48 {
                ya += a[n] * white[n] * cam.channel(c)[n];
                yb += b[n] * white[n] * cam.channel(c)[n];
            }
            floor += ((ya - yb) / 2.0).powi(2);
        }
        floor /= 3.0;
        assert!(floor > 1e-3);
        let cfg = quiet(10.0);
        for z in [[-2.0, 1.0], [0.0, 0.0], [3.0, -1.5]] {
            let loss = p.objective(&z, &[0], &cfg, 0).unwrap();
            assert!(loss >= floor - 1e-9, "{loss} < {floor}");
            assert!(loss <= floor * (1.0 + 1e-6), "{loss} vs {floor}");
        }
    }

    #[test]
    fn doubling_vis_bases_under_active_projection_is_invisible() {
        let scot = scot();
        let bases: Vec<_> = [450.0, 520.0, 600.0, 660.0]
            .iter()
            .map(|&c| SpectralCurve::gaussian(c, 30.0))
            .collect();
        let doubled: Vec<_> = bases.iter().map(|b| b.scaled(2.0).unwrap()).collect();
        let specs = [SceneSpec::random(3, 3, 4, 9)];
        let p1 = problem(&specs, LedBank::new(bases, &scot).unwrap());
        let p2 = problem(&specs, LedBank::new(doubled, &scot).unwrap());
        let cfg = quiet(10.0);
        let z = [0.3, -0.2, 1.0, 0.5];
        let e1 = p1.evaluate(&z, &[0], &cfg, 0).unwrap();
        let e2 = p2.evaluate(&z, &[0], &cfg, 0).unwrap();
        assert!(e1.projection.xi < 1.0);
        assert!((e1.projection.psi_after - e2.projection.psi_after).abs() <= 1e-9 * 10.0);
        assert!(
            (e1.loss - e2.loss).abs() <= 1e-10,
            "{} vs {}",
            e1.loss,
            e2.loss
        );
    }

    #[test]
    fn pooled_loss_matches_component_pipeline() {
        let scot = scot();
        let bank = LedBank::default_bank(&scot);
        let p = problem(
            &[SceneSpec::random(2, 3, 4, 3), SceneSpec::random(3, 2, 4, 4)],
            bank.clone(),
        );
        let cfg = quiet(50.0);
        let z: Vec<f64> = (0..bank.len())
            .map(|k| ((k * 7) % 5) as f64 - 2.0)
            .collect();
        let loss = p.objective(&z, &[0, 1], &cfg, 0).unwrap();

        let sigma: Vec<f64> = z.iter().map(|&v| logistic(v)).collect();
        let proj = project_sigma(&bank, &sigma, &scot, 50.0, 1e-9).unwrap();
        let phi_hat = bank.multiplex(&proj.sigma_hat).unwrap();
        let imgs: Vec<_> = p
            .scenes()
            .iter()
            .map(|s| {
                (
                    render(&s.cube, &split_vis(&phi_hat), &p.camera),
                    render(&s.cube, &phi_hat, &p.camera),
                    s.ground_truth.clone(),
                )
            })
            .collect();
        let refs: Vec<_> = imgs.iter().map(|(v, n, t)| (v, n, t)).collect();
        let m = fit_reconstructor_pooled(&refs, cfg.ridge).unwrap();
        let expect = imgs
            .iter()
            .map(|(v, n, t)| mse_loss(&apply_reconstructor(&m, v, n).unwrap(), t).unwrap())
            .sum::<f64>()
            / 2.0;
        assert!((loss - expect).abs() <= 1e-12 * expect.max(1e-12));
    }

    #[test]
    fn noisy_objective_is_seeded() {
        let bank = LedBank::default_bank(&scot());
        let p = problem(
            &[SceneSpec::random(2, 2, 5, 1), SceneSpec::random(2, 2, 5, 2)],
            bank,
        );
        let cfg = DesignConfig {
            psi_hat: 100.0,
            ..Default::default()
        };
        let z = vec![0.0; 26];
        let a = p.objective(&z, &[0, 1], &cfg, 5).unwrap();
        assert_eq!(a, p.objective(&z, &[0, 1], &cfg, 5).unwrap());
        assert_ne!(a, p.objective(&z, &[0, 1], &cfg, 6).unwrap());
        assert!(p.objective(&z, &[], &cfg, 5).is_err());
        assert!(p.objective(&z, &[2], &cfg, 5).is_err());
    }
}
