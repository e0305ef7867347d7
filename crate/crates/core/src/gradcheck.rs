//! Finite-difference checks of the analytic gradients: per-ray alpha and the
//! full render → loss → backward chain.
//!
//! Errors are norm-wise, `‖analytic − fd‖ / max(‖analytic‖, ‖fd‖, floor)`, and
//! reported as the worst value per parameter group. Differences use a
//! five-point stencil.

use nalgebra::{Vector2, Vector3, Vector4};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::camera::{look_at, CameraRig, Intrinsics, IntrinsicsModel, ShutterSpec};
use crate::optim::loss;
use crate::particles::{alpha_backward, particle_alpha, GaussianParticle, KernelSpec, RadianceCoeffs, Ray};
use crate::raster::{render, render_backward, RenderOptions, SortMode};
use crate::Result;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamGroup {
    Mean,
    Scale,
    Rotation,
    Opacity,
    Radiance,
}

impl ParamGroup {
    pub const ALL: [ParamGroup; 5] = [
        ParamGroup::Mean,
        ParamGroup::Scale,
        ParamGroup::Rotation,
        ParamGroup::Opacity,
        ParamGroup::Radiance,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ParamGroup::Mean => "mean",
            ParamGroup::Scale => "scale",
            ParamGroup::Rotation => "rotation",
            ParamGroup::Opacity => "opacity",
            ParamGroup::Radiance => "radiance",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|g| g.name() == name)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradCheckConfig {
    pub seed: u64,
    /// Random particle/ray pairs in the alpha suite.
    pub unit_instances: usize,
    pub unit_tolerance: f64,
    pub scene_particles: usize,
    pub image_size: u32,
    pub end_to_end_tolerance: f64,
    /// Scales the analytic gradient of one group before comparison, so the
    /// harness can be shown to fail.
    pub corrupt: Option<(ParamGroup, f64)>,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            unit_instances: 100,
            unit_tolerance: 1e-4,
            scene_particles: 20,
            image_size: 64,
            end_to_end_tolerance: 1e-3,
            corrupt: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupResult {
    pub group: ParamGroup,
    pub worst_error: f64,
    pub tolerance: f64,
}

impl GroupResult {
    pub fn passed(&self) -> bool {
        self.worst_error <= self.tolerance
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub suite: String,
    pub groups: Vec<GroupResult>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.groups.iter().all(GroupResult::passed)
    }

    pub fn worst(&self, group: ParamGroup) -> Option<f64> {
        self.groups.iter().find(|g| g.group == group).map(|g| g.worst_error)
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Norm-wise relative error with an absolute `floor` for tiny gradients.
pub fn relative_error(analytic: &[f64], fd: &[f64], floor: f64) -> f64 {
    let diff: Vec<f64> = analytic.iter().zip(fd).map(|(a, b)| a - b).collect();
    norm(&diff) / norm(analytic).max(norm(fd)).max(floor)
}

fn stencil(f: impl Fn(f64) -> f64, h: f64) -> f64 {
    (f(-2.0 * h) - 8.0 * f(-h) + 8.0 * f(h) - f(2.0 * h)) / (12.0 * h)
}

fn corruption(cfg: &GradCheckConfig, group: ParamGroup) -> f64 {
    match cfg.corrupt {
        Some((g, factor)) if g == group => factor,
        _ => 1.0,
    }
}

fn random_particle(rng: &mut ChaCha8Rng, center: Vector3<f64>, spread: f64, scales: (f64, f64)) -> GaussianParticle {
    let mut radiance = RadianceCoeffs::from_rgb(Vector3::from_fn(|_, _| rng.random_range(0.2..0.8)));
    for c in radiance.coeffs.iter_mut().skip(1) {
        *c = Vector3::from_fn(|_, _| rng.random_range(-0.1..0.1));
    }
    GaussianParticle::new(
        center + Vector3::from_fn(|_, _| rng.random_range(-spread..spread)),
        Vector4::from_fn(|_, _| rng.random_range(-1.0..1.0)) + Vector4::new(1e-3, 0.0, 0.0, 0.0),
        Vector3::from_fn(|_, _| rng.random_range(scales.0..scales.1)),
        rng.random_range(0.1..0.95),
        radiance,
    )
    .expect("sampled parameters satisfy the particle invariants")
}

const UNIT_DEGREES: [u32; 4] = [2, 3, 4, 8];

/// `alpha_backward` against differences of `particle_alpha` on random
/// particle/ray pairs, cycling through kernel degrees 2, 3, 4 and 8.
pub fn check_alpha_backward(cfg: &GradCheckConfig) -> SuiteReport {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let groups = [
        ParamGroup::Mean,
        ParamGroup::Scale,
        ParamGroup::Rotation,
        ParamGroup::Opacity,
    ];
    let mut worst = [0.0f64; 4];
    let mut done = 0;
    while done < cfg.unit_instances {
        let kernel = KernelSpec::new(UNIT_DEGREES[done % UNIT_DEGREES.len()], 3.0).expect("valid degree");
        let p = random_particle(&mut rng, Vector3::zeros(), 1.0, (0.2, 1.5));
        let origin = Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), -6.0);
        let target = p.mean + Vector3::from_fn(|_, _| rng.random_range(-1.5..1.5));
        let ray = Ray::new(origin, target - origin).expect("distinct points");
        if particle_alpha(&p, &ray, &kernel) <= 1e-6 {
            continue;
        }
        done += 1;

        let a = alpha_backward(&p, &ray, &kernel, 1.0);
        let eval = |m: Vector3<f64>, q: Vector4<f64>, s: Vector3<f64>, o: f64| {
            let p = GaussianParticle::new(m, q, s, o, RadianceCoeffs::zeros()).expect("perturbation stays valid");
            particle_alpha(&p, &ray, &kernel)
        };
        let (m, q, s, o) = (p.mean, *p.rotation(), *p.scale(), p.opacity());
        let h = 1e-4;
        let fd_mean: Vec<f64> = (0..3)
            .map(|i| stencil(|d| eval(m + Vector3::ith(i, d), q, s, o), h))
            .collect();
        let fd_scale: Vec<f64> = (0..3)
            .map(|i| stencil(|d| eval(m, q, s + Vector3::ith(i, d), o), h * s[i]))
            .collect();
        let fd_rot: Vec<f64> = (0..4)
            .map(|i| stencil(|d| eval(m, q + Vector4::ith(i, d), s, o), h))
            .collect();
        let fd_opacity = stencil(|d| eval(m, q, s, o + d), h * o * 0.01);

        let scaled = |v: &[f64], g: ParamGroup| v.iter().map(|x| x * corruption(cfg, g)).collect::<Vec<f64>>();
        let errors = [
            relative_error(&scaled(a.mean.as_slice(), ParamGroup::Mean), &fd_mean, 1e-6),
            relative_error(&scaled(a.scale.as_slice(), ParamGroup::Scale), &fd_scale, 1e-6),
            relative_error(&scaled(a.rotation.as_slice(), ParamGroup::Rotation), &fd_rot, 1e-6),
            relative_error(&scaled(&[a.opacity], ParamGroup::Opacity), &[fd_opacity], 1e-6),
        ];
        for (w, e) in worst.iter_mut().zip(errors) {
            *w = w.max(e);
        }
    }
    SuiteReport {
        suite: "alpha".into(),
        groups: groups
            .iter()
            .zip(worst)
            .map(|(&group, worst_error)| GroupResult {
                group,
                worst_error,
                tolerance: cfg.unit_tolerance,
            })
            .collect(),
    }
}

/// Options under which the rendered image is a smooth function of every
/// parameter: no alpha cutoff, no early termination, and a blend order fixed
/// by the particle centers. Per-ray orders follow `τ_max`, and two hits
/// trading places changes a pixel by a finite step that differences pick up
/// but no gradient describes.
pub fn smooth_render_options() -> RenderOptions {
    RenderOptions {
        sort_mode: SortMode::TileGlobal,
        min_alpha: 1e-12,
        min_transmittance: 0.0,
        ..RenderOptions::default()
    }
}

/// The scene, rolling-shutter camera and target image of the end-to-end check.
pub fn end_to_end_setup(cfg: &GradCheckConfig) -> Result<(Vec<GaussianParticle>, CameraRig, crate::Image)> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed);
    let size = cfg.image_size;
    let f = size as f64;
    let intr = Intrinsics::new(
        IntrinsicsModel::Pinhole,
        Vector2::new(f, f),
        Vector2::new(f / 2.0, f / 2.0),
        (size, size),
    )?;
    let up = Vector3::new(0.0, -1.0, 0.0);
    let start = look_at(&Vector3::new(-0.05, 0.0, -4.0), &Vector3::zeros(), &up)?;
    let end = look_at(&Vector3::new(0.05, 0.02, -4.0), &Vector3::zeros(), &up)?;
    let rig = CameraRig::new(intr, ShutterSpec::rolling(start, end));
    let scene: Vec<GaussianParticle> = (0..cfg.scene_particles)
        .map(|_| random_particle(&mut rng, Vector3::zeros(), 0.8, (0.08, 0.4)))
        .collect();
    let truth: Vec<GaussianParticle> = (0..cfg.scene_particles)
        .map(|_| random_particle(&mut rng, Vector3::zeros(), 0.8, (0.08, 0.4)))
        .collect();
    let target = render(&truth, &rig, &smooth_render_options()).color;
    Ok((scene, rig, target))
}

fn perturbed(scene: &[GaussianParticle], i: usize, group: ParamGroup, k: usize, d: f64) -> Vec<GaussianParticle> {
    let mut out = scene.to_vec();
    let p = &mut out[i];
    match group {
        ParamGroup::Mean => p.mean[k] += d,
        ParamGroup::Scale => p.set_scale(p.scale() + Vector3::ith(k, d)).expect("small step"),
        ParamGroup::Rotation => p.set_rotation(p.rotation() + Vector4::ith(k, d)).expect("small step"),
        ParamGroup::Opacity => p.set_opacity(p.opacity() + d).expect("small step"),
        ParamGroup::Radiance => p.radiance.coeffs[k / 3][k % 3] += d,
    }
    out
}

/// Gradient of `MSE + 0.2 (1 − SSIM)` through `render_backward` against
/// differences of the full forward pass, every parameter of every particle.
pub fn check_end_to_end(cfg: &GradCheckConfig) -> Result<SuiteReport> {
    let (scene, rig, target) = end_to_end_setup(cfg)?;
    let opts = smooth_render_options();
    let ssim_weight = 0.2;
    let objective = |s: &[GaussianParticle]| -> f64 {
        let frame = render(s, &rig, &opts);
        loss(&frame.color, &target, ssim_weight).expect("same size").0
    };
    let frame = render(&scene, &rig, &opts);
    let (_, d_color) = loss(&frame.color, &target, ssim_weight)?;
    let back = render_backward(&scene, &rig, &opts, &frame, &d_color)?.gradients;

    let mut groups = Vec::new();
    for group in ParamGroup::ALL {
        let mut analytic = Vec::new();
        let mut fd = Vec::new();
        for (i, p) in scene.iter().enumerate() {
            let (values, steps): (Vec<f64>, Vec<f64>) = match group {
                ParamGroup::Mean => (back.mean[i].iter().copied().collect(), vec![1e-4; 3]),
                ParamGroup::Scale => (
                    back.scale[i].iter().copied().collect(),
                    p.scale().iter().map(|s| 1e-4 * s).collect(),
                ),
                ParamGroup::Rotation => (back.rotation[i].iter().copied().collect(), vec![1e-4; 4]),
                ParamGroup::Opacity => (vec![back.opacity[i]], vec![1e-4 * p.opacity().min(1.0 - p.opacity())]),
                ParamGroup::Radiance => (
                    back.radiance[i].iter().flat_map(|c| c.iter().copied()).collect(),
                    vec![1e-3; 48],
                ),
            };
            for (k, h) in steps.into_iter().enumerate() {
                fd.push(stencil(|d| objective(&perturbed(&scene, i, group, k, d)), h));
            }
            analytic.extend(values.iter().map(|v| v * corruption(cfg, group)));
        }
        groups.push(GroupResult {
            group,
            worst_error: relative_error(&analytic, &fd, 1e-12),
            tolerance: cfg.end_to_end_tolerance,
        });
    }
    Ok(SuiteReport {
        suite: "end_to_end".into(),
        groups,
    })
}
