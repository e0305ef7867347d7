use std::cmp::Ordering;

use nalgebra::Vector3;

use super::{RenderOptions, SortMode, DEFAULT_MIN_TRANSMITTANCE};
use crate::camera::NEAR_PLANE;
use crate::particles::{PreparedParticle, Ray};

/// One accepted particle intersection along a ray.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HitRecord {
    pub particle_id: u32,
    pub tau_max: f64,
    pub alpha: f64,
}

/// A hit plus its position in the tile list, for tile-local accumulators.
#[derive(Clone, Copy, Debug)]
pub(crate) struct TileHit {
    pub slot: usize,
    pub id: u32,
    pub tau: f64,
    pub alpha: f64,
}

fn ray_order(a: &TileHit, b: &TileHit) -> Ordering {
    a.tau.total_cmp(&b.tau).then(a.id.cmp(&b.id))
}

/// Front-to-back accumulator.
#[derive(Clone, Debug)]
pub(crate) struct Compositor {
    color: Vector3<f64>,
    transmittance: f64,
    weight_sum: f64,
    count: u32,
    min_transmittance: f64,
}

impl Compositor {
    pub fn new(min_transmittance: f64) -> Self {
        Self {
            color: Vector3::zeros(),
            transmittance: 1.0,
            weight_sum: 0.0,
            count: 0,
            min_transmittance,
        }
    }

    /// Blends one hit; returns `false` once the ray is saturated.
    #[inline]
    pub fn blend(&mut self, alpha: f64, rgb: &Vector3<f64>) -> bool {
        let weight = alpha * self.transmittance;
        self.color += rgb * weight;
        self.weight_sum += weight;
        self.transmittance *= 1.0 - alpha;
        self.count += 1;
        self.transmittance >= self.min_transmittance
    }

    pub fn weight_sum(&self) -> f64 {
        self.weight_sum
    }

    pub fn count(&self) -> u32 {
        self.count
    }

    /// Final color with the background seen through the remaining transmittance.
    pub fn finish(&self, background: &Vector3<f64>) -> (Vector3<f64>, f64) {
        (self.color + background * self.transmittance, self.transmittance)
    }
}

/// Front-to-back compositing of depth-ordered hits over `background`.
/// Returns the color and the final transmittance.
pub fn composite_ray(hits: &[HitRecord], radiance: &[Vector3<f64>], background: &Vector3<f64>) -> (Vector3<f64>, f64) {
    assert_eq!(hits.len(), radiance.len(), "one radiance per hit");
    let mut comp = Compositor::new(DEFAULT_MIN_TRANSMITTANCE);
    for (hit, rgb) in hits.iter().zip(radiance) {
        if !comp.blend(hit.alpha, rgb) {
            break;
        }
    }
    comp.finish(background)
}

/// Evaluates the tile's particles along `ray` and feeds the accepted hits to
/// `sink` in the order prescribed by the sort mode, until `sink` returns
/// `false`.
pub(crate) fn stream_hits<F>(list: &[u32], prepared: &[PreparedParticle], ray: &Ray, opts: &RenderOptions, mut sink: F)
where
    F: FnMut(&TileHit) -> bool,
{
    let hits = list.iter().enumerate().filter_map(|(slot, &id)| {
        let eval = prepared[id as usize].evaluate(ray, &opts.kernel);
        (eval.tau > NEAR_PLANE && eval.alpha >= opts.min_alpha).then_some(TileHit {
            slot,
            id,
            tau: eval.tau,
            alpha: eval.alpha,
        })
    });

    match opts.sort_mode {
        SortMode::TileGlobal => {
            for hit in hits {
                if !sink(&hit) {
                    return;
                }
            }
        }
        SortMode::PerRayExact => {
            let mut all: Vec<TileHit> = hits.collect();
            all.sort_by(ray_order);
            for hit in &all {
                if !sink(hit) {
                    return;
                }
            }
        }
        SortMode::PerRayKBuffer(k) => {
            // Sorted near to far; holds the k farthest hits not yet blended.
            let mut buffer: Vec<TileHit> = Vec::with_capacity(k + 1);
            for hit in hits {
                let at = buffer.partition_point(|h| ray_order(h, &hit) == Ordering::Less);
                buffer.insert(at, hit);
                if buffer.len() > k {
                    let nearest = buffer.remove(0);
                    if !sink(&nearest) {
                        return;
                    }
                }
            }
            for hit in &buffer {
                if !sink(hit) {
                    return;
                }
            }
        }
    }
}
