//! Procedural test scenes, the per-particle projection-quality report (KL of
//! UT and EWA conics against a Monte-Carlo reference) and image metrics.

use nalgebra::{Vector3, Vector4};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::camera::CameraRig;
use crate::image::{psnr, ssim, Image};
use crate::particles::{GaussianParticle, RadianceCoeffs};
use crate::projection::{ewa_project, kl_divergence, mc_project, ut_project, UTParams};
use crate::{Error, Result};

/// Upper edge of the KL histogram; larger values land in the overflow bucket.
pub const HISTOGRAM_CAP: f64 = 0.04;
pub const HISTOGRAM_BINS: usize = 20;

/// Albedo of every `single_box` particle.
pub const BOX_ALBEDO: [f64; 3] = [0.85, 0.55, 0.25];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SceneKind {
    /// Particles on a cubic lattice filling `[-extent, extent]³`.
    Grid,
    /// Random anisotropic particles with means uniform in `[-extent, extent]³`.
    RandomCloud,
    /// Shell of small isotropic particles tiling the surface of the cube of
    /// half-size `extent`. `count` is rounded to `6 m²`.
    SingleBox,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSceneSpec {
    pub kind: SceneKind,
    pub count: usize,
    pub extent: f64,
    #[serde(default)]
    pub seed: u64,
}

pub fn make_synthetic_scene(spec: &SyntheticSceneSpec) -> Result<Vec<GaussianParticle>> {
    if spec.count < 1 {
        return Err(Error::InvalidParameter("synthetic scene needs count >= 1".into()));
    }
    if !(spec.extent > 0.0) || !spec.extent.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "synthetic scene extent must be positive, got {}",
            spec.extent
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let e = spec.extent;
    match spec.kind {
        SceneKind::Grid => {
            let side = (spec.count as f64).cbrt().ceil() as usize;
            let spacing = 2.0 * e / side as f64;
            (0..spec.count)
                .map(|i| {
                    let idx = Vector3::new(i % side, (i / side) % side, i / (side * side));
                    let mean = idx.map(|k| -e + (k as f64 + 0.5) * spacing);
                    let rgb = Vector3::from_fn(|_, _| rng.random_range(0.1..0.9));
                    GaussianParticle::isotropic(mean, 0.25 * spacing, 0.8, rgb)
                })
                .collect()
        }
        SceneKind::RandomCloud => (0..spec.count)
            .map(|_| {
                let mean = Vector3::from_fn(|_, _| rng.random_range(-e..=e));
                let q = Vector4::from_fn(|_, _| rng.random_range(-1.0..1.0)) + Vector4::new(1e-3, 0.0, 0.0, 0.0);
                let scale = Vector3::from_fn(|_, _| e * 10f64.powf(rng.random_range(-2.0..-1.0)));
                let opacity = rng.random_range(0.3..0.95);
                let rgb = Vector3::from_fn(|_, _| rng.random_range(0.05..0.95));
                GaussianParticle::new(mean, q, scale, opacity, RadianceCoeffs::from_rgb(rgb))
            })
            .collect(),
        SceneKind::SingleBox => {
            let m = ((spec.count as f64 / 6.0).sqrt().round() as usize).max(1);
            let spacing = 2.0 * e / m as f64;
            let rgb = Vector3::from(BOX_ALBEDO);
            let mut scene = Vec::with_capacity(6 * m * m);
            for axis in 0..3 {
                for side in [-1.0, 1.0] {
                    for i in 0..m {
                        for j in 0..m {
                            let u = -e + (i as f64 + 0.5) * spacing;
                            let v = -e + (j as f64 + 0.5) * spacing;
                            let mut mean = Vector3::zeros();
                            mean[axis] = side * e;
                            mean[(axis + 1) % 3] = u;
                            mean[(axis + 2) % 3] = v;
                            scene.push(GaussianParticle::isotropic(mean, 0.6 * spacing, 0.95, rgb)?);
                        }
                    }
                }
            }
            Ok(scene)
        }
    }
}

/// One particle valid under every applicable projection.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProjectionRow {
    pub id: u32,
    /// `None` when the camera is outside the EWA baseline's domain.
    pub kl_ewa: Option<f64>,
    pub kl_ut: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KlSummary {
    pub count: usize,
    pub median: f64,
    pub mean: f64,
    /// Counts over `[0, HISTOGRAM_CAP)` in equal bins.
    pub histogram: Vec<u64>,
    pub overflow: u64,
}

impl KlSummary {
    pub fn from_values(values: &[f64]) -> Self {
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len();
        let median = match n {
            0 => f64::NAN,
            _ if n % 2 == 1 => sorted[n / 2],
            _ => 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]),
        };
        let mean = if n == 0 {
            f64::NAN
        } else {
            sorted.iter().sum::<f64>() / n as f64
        };
        let mut histogram = vec![0; HISTOGRAM_BINS];
        let mut overflow = 0;
        for v in &sorted {
            let bin = (v / HISTOGRAM_CAP * HISTOGRAM_BINS as f64) as usize;
            match histogram.get_mut(bin) {
                Some(c) => *c += 1,
                None => overflow += 1,
            }
        }
        Self {
            count: n,
            median,
            mean,
            histogram,
            overflow,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProjectionReport {
    pub camera_model: String,
    pub mc_samples: usize,
    pub rows: Vec<ProjectionRow>,
    pub ut: KlSummary,
    pub ewa: Option<KlSummary>,
    /// Why the EWA column is missing, if it is.
    pub ewa_unsupported: Option<String>,
    /// Particles left out because their reference was invalid, they landed
    /// off-image, or a method produced a degenerate conic.
    pub skipped: usize,
}

fn particle_seed(seed: u64, id: u32) -> u64 {
    seed ^ (id as u64 + 1).wrapping_mul(0x9e37_79b9_7f4a_7c15)
}

/// Projects every particle with UT, EWA (when the camera allows it) and a
/// Monte-Carlo reference of `mc_samples` samples, and reports `KL(method ‖ MC)`
/// for particles whose reference is valid and centered inside the image.
pub fn projection_quality_report(
    scene: &[GaussianParticle],
    rig: &CameraRig,
    ut: &UTParams,
    mc_samples: usize,
    seed: u64,
) -> ProjectionReport {
    let ewa_unsupported = match scene.first().map(|p| ewa_project(p, rig)) {
        Some(Err(Error::UnsupportedModel(msg))) => Some(msg),
        _ if !rig.intrinsics.model.is_ideal_pinhole() => Some(format!(
            "EWA baseline implements the pinhole Jacobian only, got {}",
            rig.intrinsics.model.name()
        )),
        _ => None,
    };
    let with_ewa = ewa_unsupported.is_none();
    let (w, h) = (rig.width() as f64, rig.height() as f64);

    let rows: Vec<Option<ProjectionRow>> = scene
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            let id = i as u32;
            let mc = mc_project(p, rig, mc_samples, particle_seed(seed, id));
            let inside = mc.mean.x >= 0.0 && mc.mean.x < w && mc.mean.y >= 0.0 && mc.mean.y < h;
            if !mc.valid || !inside {
                return None;
            }
            let kl_ut = kl_divergence(&ut_project(p, rig, ut), &mc).ok()?;
            let kl_ewa = if with_ewa {
                Some(kl_divergence(&ewa_project(p, rig).ok()?, &mc).ok()?)
            } else {
                None
            };
            Some(ProjectionRow { id, kl_ewa, kl_ut })
        })
        .collect();

    let skipped = rows.iter().filter(|r| r.is_none()).count();
    let rows: Vec<ProjectionRow> = rows.into_iter().flatten().collect();
    let ut_values: Vec<f64> = rows.iter().map(|r| r.kl_ut).collect();
    let ewa = with_ewa.then(|| KlSummary::from_values(&rows.iter().filter_map(|r| r.kl_ewa).collect::<Vec<_>>()));
    ProjectionReport {
        camera_model: rig.intrinsics.model.name().to_string(),
        mc_samples,
        rows,
        ut: KlSummary::from_values(&ut_values),
        ewa,
        ewa_unsupported,
        skipped,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImageMetrics {
    /// `+∞` for identical images.
    pub psnr: f64,
    pub ssim: f64,
}

pub fn image_metrics(a: &Image, b: &Image) -> Result<ImageMetrics> {
    Ok(ImageMetrics {
        psnr: psnr(a, b)?,
        ssim: ssim(a, b)?,
    })
}
