//! Adjoint of the per-ray alpha evaluation.
//!
//! The maximum-response point is found in the particle's canonical frame,
//! `o_g = S⁻¹Rᵀ(o − μ)`, `d_g = S⁻¹Rᵀd`, `τ = −o_g·d_g / |d_g|²`, and the
//! response depends on `ω² = |o_g + τ d_g|²`. Because `τ` is the minimizer,
//! `∂ω²/∂o_g = 2 p_g` and `∂ω²/∂d_g = 2 τ p_g` with `p_g = o_g + τ d_g`; the
//! remaining chains run through `A = S⁻¹Rᵀ`.

use nalgebra::{Matrix3, Vector3, Vector4};

use super::{GaussianParticle, KernelSpec, Ray, MAX_ALPHA};
use crate::math::quat_gradient;

/// Gradients of a scalar loss with respect to one particle's parameters.
/// The rotation gradient lives in ambient quaternion space.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct AlphaGradients {
    pub mean: Vector3<f64>,
    pub scale: Vector3<f64>,
    pub rotation: Vector4<f64>,
    pub opacity: f64,
}

impl std::ops::AddAssign for AlphaGradients {
    fn add_assign(&mut self, rhs: Self) {
        self.mean += rhs.mean;
        self.scale += rhs.scale;
        self.rotation += rhs.rotation;
        self.opacity += rhs.opacity;
    }
}

/// Canonical-frame intermediates shared by the forward and adjoint passes.
pub(crate) struct CanonicalGrad {
    pub mean: Vector3<f64>,
    pub d_to_canonical: Matrix3<f64>,
    pub opacity: f64,
}

/// Chain `dL/dα` into `dL/dμ`, `dL/dA` and `dL/dσ` for a particle with
/// canonical transform `a`.
#[inline]
pub(crate) fn alpha_backward_canonical(
    a: &Matrix3<f64>,
    mean: &Vector3<f64>,
    opacity: f64,
    ray: &Ray,
    kernel: &KernelSpec,
    upstream: f64,
) -> CanonicalGrad {
    let delta = ray.origin - mean;
    let d = ray.direction();
    let o_g = a * delta;
    let d_g = a * d;
    let tau = -o_g.dot(&d_g) / d_g.norm_squared();
    let p_g = o_g + d_g * tau;
    let w2 = p_g.norm_squared();
    let rho = kernel.response(w2);

    if opacity * rho > MAX_ALPHA {
        return CanonicalGrad {
            mean: Vector3::zeros(),
            d_to_canonical: Matrix3::zeros(),
            opacity: 0.0,
        };
    }

    let g_w2 = upstream * opacity * kernel.response_derivative(w2);
    let g_og = p_g * (2.0 * g_w2);
    let g_dg = p_g * (2.0 * g_w2 * tau);
    CanonicalGrad {
        mean: -(a.transpose() * g_og),
        d_to_canonical: g_og * delta.transpose() + g_dg * d.transpose(),
        opacity: upstream * rho,
    }
}

/// Chain `dL/dA` (with `A = S⁻¹Rᵀ`) into scale and quaternion gradients.
#[inline]
pub(crate) fn canonical_to_params(
    d_a: &Matrix3<f64>,
    a: &Matrix3<f64>,
    scale: &Vector3<f64>,
    q: &Vector4<f64>,
) -> (Vector3<f64>, Vector4<f64>) {
    let inv_s = scale.map(|s| 1.0 / s);
    let d_scale = Vector3::from_fn(|i, _| -inv_s[i] * d_a.row(i).dot(&a.row(i)));
    let d_rot = d_a.transpose() * Matrix3::from_diagonal(&inv_s);
    (d_scale, quat_gradient(q, &d_rot))
}

/// Gradients of `upstream · α(particle, ray)` with respect to position,
/// scale, rotation and opacity. Zero when alpha sits on its upper clamp.
pub fn alpha_backward(particle: &GaussianParticle, ray: &Ray, kernel: &KernelSpec, upstream: f64) -> AlphaGradients {
    let prepared = particle.prepare(0);
    let a = prepared.to_canonical;
    let g = alpha_backward_canonical(&a, &particle.mean, particle.opacity(), ray, kernel, upstream);
    let (scale, rotation) = canonical_to_params(&g.d_to_canonical, &a, particle.scale(), particle.rotation());
    AlphaGradients {
        mean: g.mean,
        scale,
        rotation,
        opacity: g.opacity,
    }
}
