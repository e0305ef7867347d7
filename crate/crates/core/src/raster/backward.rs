//! Adjoint of [`render`](super::render). Each pixel's blend sequence is
//! regenerated and walked back to front from the stored final transmittance,
//! recovering `Tᵢ = Tᵢ₊₁ / (1 − αᵢ)`. Gradients do not flow through the
//! unscented projection, which only decides tile membership.

use nalgebra::{Matrix3, Vector2, Vector3, Vector4};
use rayon::prelude::*;

use super::composite::{stream_hits, Compositor, TileHit};
use super::{setup_frame, FrameBuffer, RenderOptions};
use crate::camera::CameraRig;
use crate::image::Image;
use crate::particles::{
    alpha_backward_canonical, canonical_to_params, sh_basis, sh_radiance_backward, sh_raw, GaussianParticle, SH_COEFFS,
};
use crate::{Error, Result};

/// Per-particle gradients of a scalar image loss.
#[derive(Clone, Debug, PartialEq)]
pub struct ParticleGradients {
    pub mean: Vec<Vector3<f64>>,
    pub scale: Vec<Vector3<f64>>,
    /// Ambient-space quaternion gradient `(w, x, y, z)`.
    pub rotation: Vec<Vector4<f64>>,
    pub opacity: Vec<f64>,
    pub radiance: Vec<[Vector3<f64>; SH_COEFFS]>,
}

impl ParticleGradients {
    pub fn zeros(n: usize) -> Self {
        Self {
            mean: vec![Vector3::zeros(); n],
            scale: vec![Vector3::zeros(); n],
            rotation: vec![Vector4::zeros(); n],
            opacity: vec![0.0; n],
            radiance: vec![[Vector3::zeros(); SH_COEFFS]; n],
        }
    }

    pub fn len(&self) -> usize {
        self.mean.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mean.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BackwardOutput {
    pub gradients: ParticleGradients,
    /// `‖dL/dμ‖ / (½ · distance to the camera center)` for this view.
    pub densify_score: Vec<f64>,
    /// Particles binned into at least one tile of this view.
    pub visible: Vec<bool>,
}

#[derive(Clone)]
struct LocalGrad {
    mean: Vector3<f64>,
    d_canonical: Matrix3<f64>,
    opacity: f64,
    radiance: [Vector3<f64>; SH_COEFFS],
}

impl Default for LocalGrad {
    fn default() -> Self {
        Self {
            mean: Vector3::zeros(),
            d_canonical: Matrix3::zeros(),
            opacity: 0.0,
            radiance: [Vector3::zeros(); SH_COEFFS],
        }
    }
}

/// Back-propagates `d_color = dL/d(frame.color)` to every particle.
/// `frame` must be the forward render of the same scene, rig and options.
pub fn render_backward(
    scene: &[GaussianParticle],
    rig: &CameraRig,
    opts: &RenderOptions,
    frame: &FrameBuffer,
    d_color: &Image,
) -> Result<BackwardOutput> {
    frame.color.same_dimensions(d_color)?;
    if frame.width() != rig.width() || frame.height() != rig.height() {
        return Err(Error::DimensionMismatch {
            left_w: frame.width(),
            left_h: frame.height(),
            right_w: rig.width(),
            right_h: rig.height(),
        });
    }
    let setup = setup_frame(scene, rig, opts);
    let grid = &setup.grid;
    let width = rig.width();

    let tile_grads: Vec<Vec<LocalGrad>> = (0..grid.tile_count())
        .into_par_iter()
        .map(|tile| {
            let list = grid.list(tile);
            let mut local = vec![LocalGrad::default(); list.len()];
            let mut sequence: Vec<TileHit> = Vec::new();
            for (x, y) in grid.tile_pixels(tile) {
                let g = d_color.get(x, y);
                if g == Vector3::zeros() || list.is_empty() {
                    continue;
                }
                let Ok(ray) = rig.pixel_to_ray(&Vector2::new(x as f64 + 0.5, y as f64 + 0.5)) else {
                    continue;
                };
                let basis = sh_basis(ray.direction(), opts.sh_degree);

                sequence.clear();
                let mut comp = Compositor::new(opts.min_transmittance);
                stream_hits(list, &setup.prepared, &ray, opts, |hit| {
                    sequence.push(*hit);
                    let rgb = sh_raw(&scene[hit.id as usize].radiance, &basis).map(|c| c.max(0.0));
                    comp.blend(hit.alpha, &rgb)
                });

                let mut t = frame.transmittance[y * width + x];
                let mut behind = opts.background;
                for hit in sequence.iter().rev() {
                    let particle = &scene[hit.id as usize];
                    let prepared = &setup.prepared[hit.id as usize];
                    let one_minus = 1.0 - hit.alpha;
                    let t_before = t / one_minus;
                    let rgb = sh_raw(&particle.radiance, &basis).map(|c| c.max(0.0));

                    let d_alpha = t_before * g.dot(&(rgb - behind));
                    let d_rgb = g * (t_before * hit.alpha);
                    let slot = &mut local[hit.slot];
                    let cg = alpha_backward_canonical(
                        &prepared.to_canonical,
                        &prepared.mean,
                        prepared.opacity,
                        &ray,
                        &opts.kernel,
                        d_alpha,
                    );
                    slot.mean += cg.mean;
                    slot.d_canonical += cg.d_to_canonical;
                    slot.opacity += cg.opacity;
                    sh_radiance_backward(&particle.radiance, &basis, &d_rgb, &mut slot.radiance);

                    behind = rgb * hit.alpha + behind * one_minus;
                    t = t_before;
                }
            }
            local
        })
        .collect();

    let n = scene.len();
    let mut mean = vec![Vector3::zeros(); n];
    let mut d_canonical = vec![Matrix3::zeros(); n];
    let mut grads = ParticleGradients::zeros(n);
    for (tile, local) in tile_grads.into_iter().enumerate() {
        for (&id, lg) in grid.list(tile).iter().zip(local) {
            let i = id as usize;
            mean[i] += lg.mean;
            d_canonical[i] += lg.d_canonical;
            grads.opacity[i] += lg.opacity;
            for (acc, v) in grads.radiance[i].iter_mut().zip(&lg.radiance) {
                *acc += v;
            }
        }
    }

    let center = rig.center_at_time(0.5);
    let mut densify_score = vec![0.0; n];
    for (i, p) in scene.iter().enumerate() {
        let (ds, dq) = canonical_to_params(
            &d_canonical[i],
            &setup.prepared[i].to_canonical,
            p.scale(),
            p.rotation(),
        );
        grads.scale[i] = ds;
        grads.rotation[i] = dq;
        grads.mean[i] = mean[i];
        let half_distance = 0.5 * (p.mean - center).norm();
        if half_distance > 0.0 {
            densify_score[i] = mean[i].norm() / half_distance;
        }
    }

    Ok(BackwardOutput {
        gradients: grads,
        densify_score,
        visible: setup.visible,
    })
}
