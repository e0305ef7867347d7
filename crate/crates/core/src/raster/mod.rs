//! Tile-based renderer. Particles are projected with the unscented transform
//! only to find which tiles they touch; every pixel then evaluates its
//! particles in 3D at their maximum response along the pixel ray and
//! composites them front to back.

mod backward;
mod composite;
mod tiles;

pub use backward::{render_backward, BackwardOutput, ParticleGradients};
pub use composite::{composite_ray, HitRecord};
pub use tiles::{bin_particles, TileGrid};

use nalgebra::{Point3, Vector3};
use rayon::prelude::*;

use crate::camera::CameraRig;
use crate::image::Image;
use crate::math::sym2_eigenvalues;
use crate::particles::{sh_basis, sh_raw, GaussianParticle, KernelSpec, PreparedParticle, MIN_ALPHA};
use crate::projection::{ut_project, Conic2D, UTParams};
use crate::{Error, Result};
use composite::{stream_hits, Compositor};

pub const DEFAULT_TILE_SIZE: usize = 16;
pub const DEFAULT_KBUFFER_SIZE: usize = 16;
/// Screen-space low-pass added to projected covariances before binning, px².
pub const DEFAULT_LOW_PASS: f64 = 0.3;
pub const DEFAULT_MIN_TRANSMITTANCE: f64 = 1e-4;

/// How hits along a ray are ordered before compositing.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SortMode {
    /// Each tile's list is sorted once by camera depth of the particle means.
    TileGlobal,
    /// Hits stream in tile order through a `k`-entry buffer that keeps the
    /// farthest pending hits and blends the nearest one whenever it overflows.
    PerRayKBuffer(usize),
    /// All hits of a ray sorted by `τ_max`; the reference ordering.
    PerRayExact,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RenderOptions {
    pub sort_mode: SortMode,
    pub kernel: KernelSpec,
    pub ut_params: UTParams,
    pub background: Vector3<f64>,
    /// Highest spherical-harmonic degree evaluated (0..=3).
    pub sh_degree: usize,
    pub tile_size: usize,
    pub low_pass: f64,
    /// Hits with a smaller alpha are skipped; also sets the culling extent.
    pub min_alpha: f64,
    /// A ray stops once its transmittance falls below this.
    pub min_transmittance: f64,
}

impl Default for RenderOptions {
    fn default() -> Self {
        Self {
            sort_mode: SortMode::PerRayKBuffer(DEFAULT_KBUFFER_SIZE),
            kernel: KernelSpec::default(),
            ut_params: UTParams::default(),
            background: Vector3::zeros(),
            sh_degree: 3,
            tile_size: DEFAULT_TILE_SIZE,
            low_pass: DEFAULT_LOW_PASS,
            min_alpha: MIN_ALPHA,
            min_transmittance: DEFAULT_MIN_TRANSMITTANCE,
        }
    }
}

impl RenderOptions {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if let SortMode::PerRayKBuffer(0) = self.sort_mode {
            return bad("k-buffer size must be at least 1".into());
        }
        if self.tile_size == 0 {
            return bad("tile size must be at least 1".into());
        }
        if self.sh_degree > 3 {
            return bad(format!(
                "spherical-harmonic degree must be <= 3, got {}",
                self.sh_degree
            ));
        }
        if !(self.min_alpha > 0.0 && self.min_alpha < 1.0) {
            return bad(format!("min_alpha must lie in (0, 1), got {}", self.min_alpha));
        }
        if !(0.0..1.0).contains(&self.min_transmittance) {
            return bad(format!(
                "min_transmittance must lie in [0, 1), got {}",
                self.min_transmittance
            ));
        }
        if !(self.low_pass >= 0.0) {
            return bad(format!("low-pass filter must be non-negative, got {}", self.low_pass));
        }
        Ok(())
    }
}

/// Screen-space radius outside which a Gaussian particle's alpha drops below
/// 1/255.
pub fn compute_extent(conic: &Conic2D, sigma_opacity: f64) -> f64 {
    kernel_extent(conic, sigma_opacity, &KernelSpec::gaussian(), MIN_ALPHA)
}

/// [`compute_extent`] for an arbitrary kernel and alpha threshold.
pub fn kernel_extent(conic: &Conic2D, sigma_opacity: f64, kernel: &KernelSpec, min_alpha: f64) -> f64 {
    if !conic.valid {
        return 0.0;
    }
    let (largest, _) = sym2_eigenvalues(&conic.cov);
    kernel.cutoff_distance(sigma_opacity, min_alpha) * largest.max(0.0).sqrt()
}

/// Rendered image plus per-pixel and per-particle bookkeeping.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameBuffer {
    pub color: Image,
    /// Transmittance left after the last blended hit.
    pub transmittance: Vec<f64>,
    /// Sum of the compositing weights `αᵢ Tᵢ` of the blended hits.
    pub weight_sum: Vec<f64>,
    /// Number of blended hits per pixel.
    pub hit_count: Vec<u32>,
    /// Number of pixels each particle was blended into.
    pub coverage: Vec<u32>,
}

impl FrameBuffer {
    pub fn width(&self) -> usize {
        self.color.width()
    }

    pub fn height(&self) -> usize {
        self.color.height()
    }

    pub fn transmittance_at(&self, x: usize, y: usize) -> f64 {
        self.transmittance[y * self.width() + x]
    }

    /// Largest per-pixel deviation of `Σ αᵢTᵢ + T_final` from one.
    pub fn conservation_error(&self) -> f64 {
        self.weight_sum
            .iter()
            .zip(&self.transmittance)
            .map(|(w, t)| (w + t - 1.0).abs())
            .fold(0.0, f64::max)
    }
}

/// Per-frame state shared by the forward and adjoint passes.
pub(crate) struct FrameSetup {
    pub prepared: Vec<PreparedParticle>,
    pub grid: TileGrid,
    pub visible: Vec<bool>,
}

pub(crate) fn setup_frame(scene: &[GaussianParticle], rig: &CameraRig, opts: &RenderOptions) -> FrameSetup {
    let pose = rig.shutter.pose_start();
    let per_particle: Vec<(Conic2D, f64, f64)> = scene
        .par_iter()
        .map(|p| {
            let conic = ut_project(p, rig, &opts.ut_params).dilated(opts.low_pass);
            let extent = kernel_extent(&conic, p.opacity(), &opts.kernel, opts.min_alpha);
            let depth = pose.transform_point(&Point3::from(p.mean)).z;
            (conic, extent, depth)
        })
        .collect();
    let conics: Vec<Conic2D> = per_particle.iter().map(|v| v.0).collect();
    let extents: Vec<f64> = per_particle.iter().map(|v| v.1).collect();
    let depths: Vec<f64> = per_particle.iter().map(|v| v.2).collect();
    let grid = bin_particles(
        &conics,
        &extents,
        &depths,
        TileGrid::new(rig.width(), rig.height(), opts.tile_size),
    );
    let mut visible = vec![false; scene.len()];
    for list in grid.lists() {
        for &id in list {
            visible[id as usize] = true;
        }
    }
    FrameSetup {
        prepared: scene.iter().enumerate().map(|(i, p)| p.prepare(i as u32)).collect(),
        grid,
        visible,
    }
}

struct TileOutput {
    pixels: Vec<(usize, Vector3<f64>, f64, f64, u32)>,
    coverage: Vec<u32>,
}

pub fn render(scene: &[GaussianParticle], rig: &CameraRig, opts: &RenderOptions) -> FrameBuffer {
    let setup = setup_frame(scene, rig, opts);
    let (width, height) = (rig.width(), rig.height());
    let grid = &setup.grid;

    let outputs: Vec<TileOutput> = (0..grid.tile_count())
        .into_par_iter()
        .map(|tile| {
            let list = grid.list(tile);
            let mut coverage = vec![0u32; list.len()];
            let mut pixels = Vec::new();
            for (x, y) in grid.tile_pixels(tile) {
                let idx = y * width + x;
                let center = nalgebra::Vector2::new(x as f64 + 0.5, y as f64 + 0.5);
                let Ok(ray) = rig.pixel_to_ray(&center) else {
                    pixels.push((idx, opts.background, 1.0, 0.0, 0));
                    continue;
                };
                let basis = sh_basis(ray.direction(), opts.sh_degree);
                let mut comp = Compositor::new(opts.min_transmittance);
                stream_hits(list, &setup.prepared, &ray, opts, |hit| {
                    coverage[hit.slot] += 1;
                    let p = &scene[hit.id as usize];
                    let rgb = sh_raw(&p.radiance, &basis).map(|c| c.max(0.0));
                    comp.blend(hit.alpha, &rgb)
                });
                let (color, t) = comp.finish(&opts.background);
                pixels.push((idx, color, t, comp.weight_sum(), comp.count()));
            }
            TileOutput { pixels, coverage }
        })
        .collect();

    let n = width * height;
    let mut frame = FrameBuffer {
        color: Image::new(width, height),
        transmittance: vec![1.0; n],
        weight_sum: vec![0.0; n],
        hit_count: vec![0; n],
        coverage: vec![0; scene.len()],
    };
    for (tile, out) in outputs.into_iter().enumerate() {
        for (idx, color, t, w, count) in out.pixels {
            frame.color.set(idx % width, idx / width, color);
            frame.transmittance[idx] = t;
            frame.weight_sum[idx] = w;
            frame.hit_count[idx] = count;
        }
        for (&id, c) in grid.list(tile).iter().zip(out.coverage) {
            frame.coverage[id as usize] += c;
        }
    }
    frame
}
