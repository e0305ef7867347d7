//! Scene fitting: image loss, Adam updates in an unconstrained
//! parameterization, and gradient-driven densification.

mod adam;
mod densify;

pub use adam::{Adam, SceneOptimizer, StepRates, ADAM_BETA1, ADAM_BETA2, ADAM_EPSILON, PARAMS_PER_PARTICLE};
pub use densify::{densify_and_prune, Densified, DensifyStats, CLONE_JITTER, SPLIT_OFFSET, SPLIT_SCALE_DIVISOR};

use nalgebra::Vector3;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::camera::CameraRig;
use crate::image::{ssim_with_gradient, Image};
use crate::particles::GaussianParticle;
use crate::raster::{render, render_backward, RenderOptions};
use crate::{Error, Result};

/// Per-group Adam learning rates. The position rate decays log-linearly from
/// `position_init` to `position_final` over the run and is multiplied by the
/// scene extent.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LearningRates {
    pub position_init: f64,
    pub position_final: f64,
    pub scale: f64,
    pub rotation: f64,
    pub opacity: f64,
    pub sh_dc: f64,
    pub sh_rest: f64,
}

impl Default for LearningRates {
    fn default() -> Self {
        Self {
            position_init: 1.6e-4,
            position_final: 1.6e-6,
            scale: 5e-3,
            rotation: 1e-3,
            opacity: 5e-2,
            sh_dc: 2.5e-3,
            sh_rest: 2.5e-3 / 20.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub iterations: usize,
    pub learning_rates: LearningRates,
    pub ssim_weight: f64,
    pub densify_interval: usize,
    /// Densification runs on iterations in `[densify_from, densify_until)`.
    pub densify_from: usize,
    pub densify_until: usize,
    pub densify_threshold: f64,
    pub prune_opacity: f64,
    /// Densified particles whose largest scale exceeds this fraction of the
    /// scene extent are split rather than cloned.
    pub split_fraction: f64,
    /// Iterations between raising the active spherical-harmonic degree.
    pub sh_degree_interval: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            iterations: 2000,
            learning_rates: LearningRates::default(),
            ssim_weight: 0.2,
            densify_interval: 300,
            densify_from: 300,
            densify_until: 15_000,
            densify_threshold: 2e-4,
            prune_opacity: 5e-3,
            split_fraction: 0.01,
            sh_degree_interval: 1000,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let lr = &self.learning_rates;
        let rates = [
            ("position_init", lr.position_init),
            ("position_final", lr.position_final),
            ("scale", lr.scale),
            ("rotation", lr.rotation),
            ("opacity", lr.opacity),
            ("sh_dc", lr.sh_dc),
            ("sh_rest", lr.sh_rest),
        ];
        for (name, v) in rates {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "learning rate {name} must be positive, got {v}"
                )));
            }
        }
        if self.densify_interval == 0 || self.sh_degree_interval == 0 {
            return Err(Error::InvalidParameter(
                "densify and SH intervals must be at least 1".into(),
            ));
        }
        if !(self.ssim_weight >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "ssim_weight must be non-negative, got {}",
                self.ssim_weight
            )));
        }
        Ok(())
    }

    /// Learning rates in effect at `iteration` for a scene of the given extent.
    pub fn rates_at(&self, iteration: usize, scene_extent: f64) -> StepRates {
        let lr = &self.learning_rates;
        let t = if self.iterations == 0 {
            0.0
        } else {
            (iteration as f64 / self.iterations as f64).clamp(0.0, 1.0)
        };
        let position = (lr.position_init.ln() * (1.0 - t) + lr.position_final.ln() * t).exp() * scene_extent;
        StepRates {
            position,
            scale: lr.scale,
            rotation: lr.rotation,
            opacity: lr.opacity,
            sh_dc: lr.sh_dc,
            sh_rest: lr.sh_rest,
        }
    }
}

/// `MSE + w · (1 − SSIM)` and its gradient with respect to `rendered`.
pub fn loss(rendered: &Image, target: &Image, ssim_weight: f64) -> Result<(f64, Image)> {
    rendered.same_dimensions(target)?;
    let n = rendered.data().len() as f64;
    let (ssim, ssim_grad) = ssim_with_gradient(rendered, target)?;
    let mut grad = Image::new(rendered.width(), rendered.height());
    let mut sq = 0.0;
    for (((g, r), t), s) in grad
        .data_mut()
        .iter_mut()
        .zip(rendered.data())
        .zip(target.data())
        .zip(ssim_grad.data())
    {
        let d = r - t;
        sq += d * d;
        *g = 2.0 * d / n - ssim_weight * s;
    }
    Ok((sq / n + ssim_weight * (1.0 - ssim), grad))
}

/// Radius of the camera centers around their centroid, with a 10% margin.
/// With a single camera, its distance to the scene centroid is used instead.
pub fn scene_extent(rigs: &[&CameraRig], scene: &[GaussianParticle]) -> f64 {
    let centers: Vec<Vector3<f64>> = rigs.iter().map(|r| r.center_at_time(0.5)).collect();
    if centers.is_empty() {
        return 1.0;
    }
    let centroid = centers.iter().sum::<Vector3<f64>>() / centers.len() as f64;
    let mut radius = centers.iter().map(|c| (c - centroid).norm()).fold(0.0, f64::max);
    if radius < 1e-9 && !scene.is_empty() {
        let scene_centroid = scene.iter().map(|p| p.mean).sum::<Vector3<f64>>() / scene.len() as f64;
        radius = (centroid - scene_centroid).norm();
    }
    if radius < 1e-9 {
        1.0
    } else {
        1.1 * radius
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FitResult {
    pub scene: Vec<GaussianParticle>,
    /// Loss of the sampled view at each iteration, before its update.
    pub loss_history: Vec<f64>,
    pub densify_events: usize,
}

/// Fits `initial` to the target views. View order is a seeded sequence of
/// shuffled passes over `views`.
pub fn fit(
    initial: &[GaussianParticle],
    views: &[(CameraRig, Image)],
    config: &TrainConfig,
    opts: &RenderOptions,
) -> Result<FitResult> {
    if views.is_empty() {
        return Err(Error::InvalidParameter("fitting needs at least one view".into()));
    }
    config.validate()?;
    opts.validate()?;
    for (rig, img) in views {
        if img.width() != rig.width() || img.height() != rig.height() {
            return Err(Error::DimensionMismatch {
                left_w: img.width(),
                left_h: img.height(),
                right_w: rig.width(),
                right_h: rig.height(),
            });
        }
    }

    let rigs: Vec<&CameraRig> = views.iter().map(|(r, _)| r).collect();
    let extent = scene_extent(&rigs, initial);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut scene = initial.to_vec();
    let mut optimizer = SceneOptimizer::new(scene.len());
    let mut stats = DensifyStats::new(scene.len());
    let mut order: Vec<usize> = Vec::new();
    let mut history = Vec::with_capacity(config.iterations);
    let mut densify_events = 0;

    for it in 0..config.iterations {
        if order.is_empty() {
            order = (0..views.len()).collect();
            order.shuffle(&mut rng);
        }
        let (rig, target) = &views[order.pop().expect("refilled above")];
        let mut view_opts = opts.clone();
        view_opts.sh_degree = opts.sh_degree.min(it / config.sh_degree_interval);

        let frame = render(&scene, rig, &view_opts);
        let (value, d_color) = loss(&frame.color, target, config.ssim_weight)?;
        history.push(value);
        let back = render_backward(&scene, rig, &view_opts, &frame, &d_color)?;
        stats.accumulate(&back.densify_score, &back.visible);
        optimizer.step(&mut scene, &back.gradients, &config.rates_at(it, extent));

        let step = it + 1;
        if step >= config.densify_from && step < config.densify_until && step % config.densify_interval == 0 {
            let out = densify_and_prune(&scene, &mut stats, config, extent, &mut rng);
            if out.scene.len() != scene.len() || out.origin.iter().enumerate().any(|(j, o)| *o != Some(j)) {
                densify_events += 1;
            }
            optimizer.remap(&out.origin);
            scene = out.scene;
        }
    }

    Ok(FitResult {
        scene,
        loss_history: history,
        densify_events,
    })
}
