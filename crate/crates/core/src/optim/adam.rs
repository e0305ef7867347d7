use nalgebra::{Vector3, Vector4};

use crate::particles::{GaussianParticle, SH_COEFFS};
use crate::raster::ParticleGradients;

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPSILON: f64 = 1e-15;

/// Unconstrained values per particle: mean (3), log-scale (3), quaternion (4),
/// logit-opacity (1), radiance (48).
pub const PARAMS_PER_PARTICLE: usize = 3 + 3 + 4 + 1 + 3 * SH_COEFFS;

const MEAN: usize = 0;
const LOG_SCALE: usize = 3;
const ROTATION: usize = 6;
const OPACITY: usize = 10;
const SH_DC: usize = 11;
const SH_REST: usize = 14;

/// Logit is clamped so the opacity never rounds to exactly 0 or above 1.
const MAX_LOGIT: f64 = 36.0;

/// Adam moment estimates for a flat parameter vector.
#[derive(Clone, Debug, PartialEq)]
pub struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl Adam {
    pub fn new(len: usize) -> Self {
        Self {
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.m.len()
    }

    pub fn is_empty(&self) -> bool {
        self.m.is_empty()
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    /// One bias-corrected update, `lr[i]` per entry.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64], lr: &[f64]) {
        assert_eq!(params.len(), self.m.len());
        assert_eq!(grads.len(), self.m.len());
        assert_eq!(lr.len(), self.m.len());
        self.t += 1;
        let c1 = 1.0 - ADAM_BETA1.powi(self.t as i32);
        let c2 = 1.0 - ADAM_BETA2.powi(self.t as i32);
        for i in 0..params.len() {
            let g = grads[i];
            self.m[i] = ADAM_BETA1 * self.m[i] + (1.0 - ADAM_BETA1) * g;
            self.v[i] = ADAM_BETA2 * self.v[i] + (1.0 - ADAM_BETA2) * g * g;
            let m_hat = self.m[i] / c1;
            let v_hat = self.v[i] / c2;
            params[i] -= lr[i] * m_hat / (v_hat.sqrt() + ADAM_EPSILON);
        }
    }

    /// Keeps the moments of entries in blocks of `block` values according to
    /// `origin`: `Some(i)` copies old block `i`, `None` starts from zero.
    pub fn remap(&mut self, origin: &[Option<usize>], block: usize) {
        let gather = |src: &[f64]| {
            let mut out = vec![0.0; origin.len() * block];
            for (dst, o) in origin.iter().enumerate() {
                if let Some(i) = o {
                    out[dst * block..(dst + 1) * block].copy_from_slice(&src[i * block..(i + 1) * block]);
                }
            }
            out
        };
        self.m = gather(&self.m);
        self.v = gather(&self.v);
    }
}

/// Learning rates for one step, per parameter group.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepRates {
    pub position: f64,
    pub scale: f64,
    pub rotation: f64,
    pub opacity: f64,
    pub sh_dc: f64,
    pub sh_rest: f64,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln().clamp(-MAX_LOGIT, MAX_LOGIT)
}

pub(crate) fn pack(p: &GaussianParticle, out: &mut [f64]) {
    out[MEAN..MEAN + 3].copy_from_slice(p.mean.as_slice());
    for i in 0..3 {
        out[LOG_SCALE + i] = p.scale()[i].ln();
    }
    out[ROTATION..ROTATION + 4].copy_from_slice(p.rotation().as_slice());
    out[OPACITY] = logit(p.opacity());
    for (k, c) in p.radiance.coeffs.iter().enumerate() {
        out[SH_DC + 3 * k..SH_DC + 3 * k + 3].copy_from_slice(c.as_slice());
    }
}

#[cfg(test)]
pub(crate) fn unpack(raw: &[f64], p: &mut GaussianParticle) {
    p.mean = Vector3::from_column_slice(&raw[MEAN..MEAN + 3]);
    unpack_scale(raw, p);
    unpack_rotation(raw, p);
    unpack_opacity(raw, p);
    for (k, c) in p.radiance.coeffs.iter_mut().enumerate() {
        *c = Vector3::from_column_slice(&raw[SH_DC + 3 * k..SH_DC + 3 * k + 3]);
    }
}

fn unpack_scale(raw: &[f64], p: &mut GaussianParticle) {
    let scale = Vector3::from_fn(|i, _| raw[LOG_SCALE + i].exp().max(f64::MIN_POSITIVE));
    p.set_scale(scale).expect("exponentiated scales are positive");
}

fn unpack_rotation(raw: &[f64], p: &mut GaussianParticle) {
    // A collapsed quaternion keeps the previous orientation.
    let _ = p.set_rotation(Vector4::from_column_slice(&raw[ROTATION..ROTATION + 4]));
}

fn unpack_opacity(raw: &[f64], p: &mut GaussianParticle) {
    let opacity = sigmoid(raw[OPACITY].clamp(-MAX_LOGIT, MAX_LOGIT));
    p.set_opacity(opacity)
        .expect("sigmoid of a clamped logit lies in (0, 1)");
}

/// Like [`unpack`], but leaves groups whose raw values equal `before`
/// untouched, so a zero update does not pick up round-trip error.
fn unpack_changed(raw: &[f64], before: &[f64], p: &mut GaussianParticle) {
    let changed = |r: std::ops::Range<usize>| raw[r.clone()] != before[r];
    if changed(LOG_SCALE..ROTATION) {
        unpack_scale(raw, p);
    }
    if changed(ROTATION..OPACITY) {
        unpack_rotation(raw, p);
    }
    if changed(OPACITY..SH_DC) {
        unpack_opacity(raw, p);
    }
    p.mean = Vector3::from_column_slice(&raw[MEAN..MEAN + 3]);
    for (k, c) in p.radiance.coeffs.iter_mut().enumerate() {
        *c = Vector3::from_column_slice(&raw[SH_DC + 3 * k..SH_DC + 3 * k + 3]);
    }
}

/// Gradients with respect to the unconstrained parameters of particle `i`.
pub(crate) fn pack_gradient(p: &GaussianParticle, g: &ParticleGradients, i: usize, out: &mut [f64]) {
    out[MEAN..MEAN + 3].copy_from_slice(g.mean[i].as_slice());
    for k in 0..3 {
        out[LOG_SCALE + k] = g.scale[i][k] * p.scale()[k];
    }
    out[ROTATION..ROTATION + 4].copy_from_slice(g.rotation[i].as_slice());
    let o = p.opacity();
    out[OPACITY] = g.opacity[i] * o * (1.0 - o);
    for (k, c) in g.radiance[i].iter().enumerate() {
        out[SH_DC + 3 * k..SH_DC + 3 * k + 3].copy_from_slice(c.as_slice());
    }
}

pub(crate) fn rate_vector(rates: &StepRates, n_particles: usize) -> Vec<f64> {
    let mut block = [0.0; PARAMS_PER_PARTICLE];
    block[MEAN..LOG_SCALE].fill(rates.position);
    block[LOG_SCALE..ROTATION].fill(rates.scale);
    block[ROTATION..OPACITY].fill(rates.rotation);
    block[OPACITY] = rates.opacity;
    block[SH_DC..SH_REST].fill(rates.sh_dc);
    block[SH_REST..].fill(rates.sh_rest);
    block.repeat(n_particles)
}

/// Adam over a whole scene in its unconstrained parameterization.
#[derive(Clone, Debug, PartialEq)]
pub struct SceneOptimizer {
    adam: Adam,
}

impl SceneOptimizer {
    pub fn new(n_particles: usize) -> Self {
        Self {
            adam: Adam::new(n_particles * PARAMS_PER_PARTICLE),
        }
    }

    pub fn particle_count(&self) -> usize {
        self.adam.len() / PARAMS_PER_PARTICLE
    }

    /// Applies one Adam update to every particle, renormalizing quaternions.
    pub fn step(&mut self, scene: &mut [GaussianParticle], grads: &ParticleGradients, rates: &StepRates) {
        assert_eq!(scene.len(), grads.len(), "one gradient record per particle");
        assert_eq!(
            scene.len(),
            self.particle_count(),
            "optimizer state out of sync with scene"
        );
        let n = scene.len();
        let mut params = vec![0.0; n * PARAMS_PER_PARTICLE];
        let mut g = vec![0.0; n * PARAMS_PER_PARTICLE];
        for (i, p) in scene.iter().enumerate() {
            let range = i * PARAMS_PER_PARTICLE..(i + 1) * PARAMS_PER_PARTICLE;
            pack(p, &mut params[range.clone()]);
            pack_gradient(p, grads, i, &mut g[range]);
        }
        let before = params.clone();
        self.adam.step(&mut params, &g, &rate_vector(rates, n));
        for (i, p) in scene.iter_mut().enumerate() {
            let range = i * PARAMS_PER_PARTICLE..(i + 1) * PARAMS_PER_PARTICLE;
            unpack_changed(&params[range.clone()], &before[range], p);
        }
    }

    /// Follows a densification: `origin[j]` is the old index particle `j`
    /// inherits its moments from, or `None` for a fresh particle.
    pub fn remap(&mut self, origin: &[Option<usize>]) {
        self.adam.remap(origin, PARAMS_PER_PARTICLE);
    }
}
