use nalgebra::Vector3;
use rand::Rng;
use rand_distr::StandardNormal;

use super::TrainConfig;
use crate::particles::GaussianParticle;

/// Offset of split children along the parent's major axis, in units of its
/// largest scale.
pub const SPLIT_OFFSET: f64 = 0.8;
/// Children of a split shrink their scales by this factor.
pub const SPLIT_SCALE_DIVISOR: f64 = 1.6;
/// Clone jitter, as a fraction of the parent's own spread.
pub const CLONE_JITTER: f64 = 0.5;

/// Densification score accumulated over views since the last densify step.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct DensifyStats {
    pub score_sum: Vec<f64>,
    pub views: Vec<u32>,
}

impl DensifyStats {
    pub fn new(n: usize) -> Self {
        Self {
            score_sum: vec![0.0; n],
            views: vec![0; n],
        }
    }

    /// Adds one view's scores for the particles visible in it.
    pub fn accumulate(&mut self, score: &[f64], visible: &[bool]) {
        for i in 0..self.score_sum.len() {
            if visible[i] {
                self.score_sum[i] += score[i];
                self.views[i] += 1;
            }
        }
    }

    pub fn mean_score(&self, i: usize) -> f64 {
        if self.views[i] == 0 {
            0.0
        } else {
            self.score_sum[i] / self.views[i] as f64
        }
    }

    pub fn reset(&mut self, n: usize) {
        *self = Self::new(n);
    }
}

/// Scene after densification, with `origin[j]` naming the particle that
/// particle `j` was kept from (`None` for newly created ones).
#[derive(Clone, Debug, PartialEq)]
pub struct Densified {
    pub scene: Vec<GaussianParticle>,
    pub origin: Vec<Option<usize>>,
    pub cloned: usize,
    pub split: usize,
    pub pruned: usize,
}

/// Clones small high-score particles, splits large ones in two along their
/// major axis, and drops nearly transparent ones. `scene_extent` sets the
/// split cutoff; `rng` drives the clone jitter.
pub fn densify_and_prune<R: Rng>(
    scene: &[GaussianParticle],
    stats: &mut DensifyStats,
    config: &TrainConfig,
    scene_extent: f64,
    rng: &mut R,
) -> Densified {
    let split_cutoff = config.split_fraction * scene_extent;
    let mut out = Densified {
        scene: Vec::with_capacity(scene.len()),
        origin: Vec::with_capacity(scene.len()),
        cloned: 0,
        split: 0,
        pruned: 0,
    };
    let mut fresh = Vec::new();

    for (i, p) in scene.iter().enumerate() {
        if p.opacity() < config.prune_opacity {
            out.pruned += 1;
            continue;
        }
        let score = stats.mean_score(i);
        if !(score > config.densify_threshold) {
            out.scene.push(p.clone());
            out.origin.push(Some(i));
            continue;
        }
        let (axis, s_max) = p.scale().argmax();
        if s_max > split_cutoff {
            let dir = p.rotation_matrix().column(axis) * (SPLIT_OFFSET * s_max);
            for sign in [1.0, -1.0] {
                let mut child = p.clone();
                child.mean = p.mean + dir * sign;
                child
                    .set_scale(p.scale() / SPLIT_SCALE_DIVISOR)
                    .expect("scaled-down positive scales stay positive");
                fresh.push(child);
            }
            out.split += 1;
        } else {
            let z = Vector3::from_fn(|_, _| rng.sample::<f64, _>(StandardNormal));
            let mut twin = p.clone();
            twin.mean = p.mean + p.covariance_sqrt() * z * CLONE_JITTER;
            out.scene.push(p.clone());
            out.origin.push(Some(i));
            fresh.push(twin);
            out.cloned += 1;
        }
    }
    out.origin.extend(std::iter::repeat_n(None, fresh.len()));
    out.scene.extend(fresh);
    stats.reset(out.scene.len());
    out
}
