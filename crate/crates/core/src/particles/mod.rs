//! Volumetric Gaussian particles, their kernel response and per-ray
//! maximum-response evaluation.

mod grad;
mod sh;

pub use grad::{alpha_backward, AlphaGradients};
pub(crate) use grad::{alpha_backward_canonical, canonical_to_params};
pub(crate) use sh::sh_raw;
pub use sh::{sh_basis, sh_radiance, sh_radiance_backward, SH_COEFFS};

use nalgebra::{Matrix3, Vector3, Vector4};
use serde::{Deserialize, Serialize};

use crate::math::quat_to_rotation;
use crate::{Error, Result};

/// Upper clamp on per-hit alpha; keeps transmittance strictly positive.
pub const MAX_ALPHA: f64 = 0.999;

/// Hits below this alpha are discarded by the rasterizer.
pub const MIN_ALPHA: f64 = 1.0 / 255.0;

/// Spherical-harmonic radiance coefficients, degrees 0..=3, one RGB triple per
/// basis function.
#[derive(Clone, Debug, PartialEq)]
pub struct RadianceCoeffs {
    pub coeffs: [Vector3<f64>; SH_COEFFS],
}

impl RadianceCoeffs {
    pub fn zeros() -> Self {
        Self {
            coeffs: [Vector3::zeros(); SH_COEFFS],
        }
    }

    /// Coefficients whose degree-0 term renders as `rgb` from every direction.
    pub fn from_rgb(rgb: Vector3<f64>) -> Self {
        let mut out = Self::zeros();
        out.coeffs[0] = (rgb - Vector3::repeat(0.5)) / sh::SH_C0;
        out
    }
}

impl Default for RadianceCoeffs {
    fn default() -> Self {
        Self::zeros()
    }
}

/// Generalized Gaussian kernel `exp(-½ λ dⁿ)` with `λ = r² / rⁿ`, so every
/// degree has the same response at Mahalanobis distance `r`. Degree 2 is the
/// ordinary Gaussian.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawKernelSpec")]
pub struct KernelSpec {
    degree: u32,
    reference_radius: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawKernelSpec {
    degree: u32,
    #[serde(default = "default_reference_radius")]
    reference_radius: f64,
}

fn default_reference_radius() -> f64 {
    3.0
}

impl TryFrom<RawKernelSpec> for KernelSpec {
    type Error = Error;

    fn try_from(raw: RawKernelSpec) -> Result<Self> {
        KernelSpec::new(raw.degree, raw.reference_radius)
    }
}

impl KernelSpec {
    pub fn new(degree: u32, reference_radius: f64) -> Result<Self> {
        if degree < 2 {
            return Err(Error::InvalidParameter(format!(
                "kernel degree must be >= 2, got {degree}"
            )));
        }
        if !(reference_radius > 0.0) || !reference_radius.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "kernel reference radius must be positive, got {reference_radius}"
            )));
        }
        Ok(Self {
            degree,
            reference_radius,
        })
    }

    pub fn gaussian() -> Self {
        Self {
            degree: 2,
            reference_radius: 3.0,
        }
    }

    pub fn degree(&self) -> u32 {
        self.degree
    }

    pub fn reference_radius(&self) -> f64 {
        self.reference_radius
    }

    /// `λ = r² / rⁿ`
    pub fn scale_factor(&self) -> f64 {
        let r = self.reference_radius;
        r * r / r.powi(self.degree as i32)
    }

    /// Response as a function of the squared Mahalanobis distance.
    #[inline]
    pub fn response(&self, sq_distance: f64) -> f64 {
        if self.degree == 2 {
            (-0.5 * sq_distance).exp()
        } else {
            let n_half = self.degree as f64 * 0.5;
            (-0.5 * self.scale_factor() * sq_distance.powf(n_half)).exp()
        }
    }

    /// Mahalanobis distance beyond which `opacity · ρ < min_alpha`; zero when
    /// the particle can never reach `min_alpha`.
    pub fn cutoff_distance(&self, opacity: f64, min_alpha: f64) -> f64 {
        if opacity <= min_alpha {
            return 0.0;
        }
        let power = 2.0 * (opacity / min_alpha).ln() / self.scale_factor();
        if self.degree == 2 {
            power.sqrt()
        } else {
            power.powf(1.0 / self.degree as f64)
        }
    }

    /// `dρ/d(d²)` at the given squared distance.
    #[inline]
    pub fn response_derivative(&self, sq_distance: f64) -> f64 {
        let rho = self.response(sq_distance);
        if self.degree == 2 {
            -0.5 * rho
        } else {
            let n_half = self.degree as f64 * 0.5;
            -0.5 * self.scale_factor() * n_half * sq_distance.powf(n_half - 1.0) * rho
        }
    }
}

impl Default for KernelSpec {
    fn default() -> Self {
        Self::gaussian()
    }
}

/// A ray `o + τ d` with unit-length `d`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Ray {
    pub origin: Vector3<f64>,
    direction: Vector3<f64>,
}

impl Ray {
    pub fn new(origin: Vector3<f64>, direction: Vector3<f64>) -> Result<Self> {
        let norm = direction.norm();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::InvalidParameter("ray direction has zero length".into()));
        }
        Ok(Self {
            origin,
            direction: direction / norm,
        })
    }

    pub fn direction(&self) -> &Vector3<f64> {
        &self.direction
    }

    pub fn at(&self, tau: f64) -> Vector3<f64> {
        self.origin + self.direction * tau
    }
}

/// One anisotropic Gaussian particle.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianParticle {
    pub mean: Vector3<f64>,
    rotation: Vector4<f64>,
    scale: Vector3<f64>,
    opacity: f64,
    pub radiance: RadianceCoeffs,
}

impl GaussianParticle {
    /// Builds a particle, normalizing the `(w, x, y, z)` quaternion.
    pub fn new(
        mean: Vector3<f64>,
        rotation: Vector4<f64>,
        scale: Vector3<f64>,
        opacity: f64,
        radiance: RadianceCoeffs,
    ) -> Result<Self> {
        let mut particle = Self {
            mean,
            rotation: Vector4::new(1.0, 0.0, 0.0, 0.0),
            scale: Vector3::repeat(1.0),
            opacity: 1.0,
            radiance,
        };
        particle.set_rotation(rotation)?;
        particle.set_scale(scale)?;
        particle.set_opacity(opacity)?;
        Ok(particle)
    }

    /// Rebuilds a stored particle. The quaternion must already be unit length
    /// (within `1e-9`) and is kept verbatim, so stored scenes reload bit-exactly.
    pub fn from_stored(
        mean: Vector3<f64>,
        rotation: Vector4<f64>,
        scale: Vector3<f64>,
        opacity: f64,
        radiance: RadianceCoeffs,
    ) -> Result<Self> {
        let norm = rotation.norm();
        if !((norm - 1.0).abs() <= 1e-9) {
            return Err(Error::InvalidParameter(format!(
                "stored quaternion is not unit length (|q| = {norm})"
            )));
        }
        let mut particle = Self::new(mean, rotation, scale, opacity, radiance)?;
        particle.rotation = rotation;
        Ok(particle)
    }

    /// Isotropic particle with constant color.
    pub fn isotropic(mean: Vector3<f64>, radius: f64, opacity: f64, rgb: Vector3<f64>) -> Result<Self> {
        Self::new(
            mean,
            Vector4::new(1.0, 0.0, 0.0, 0.0),
            Vector3::repeat(radius),
            opacity,
            RadianceCoeffs::from_rgb(rgb),
        )
    }

    pub fn rotation(&self) -> &Vector4<f64> {
        &self.rotation
    }

    pub fn scale(&self) -> &Vector3<f64> {
        &self.scale
    }

    pub fn opacity(&self) -> f64 {
        self.opacity
    }

    pub fn set_rotation(&mut self, q: Vector4<f64>) -> Result<()> {
        let norm = q.norm();
        if !(norm > 1e-12) || !norm.is_finite() {
            return Err(Error::InvalidParameter("rotation quaternion has zero length".into()));
        }
        self.rotation = q / norm;
        Ok(())
    }

    pub fn set_scale(&mut self, s: Vector3<f64>) -> Result<()> {
        if s.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "scales must be strictly positive, got ({}, {}, {})",
                s.x, s.y, s.z
            )));
        }
        self.scale = s;
        Ok(())
    }

    pub fn set_opacity(&mut self, opacity: f64) -> Result<()> {
        if !(opacity > 0.0 && opacity <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "opacity must lie in (0, 1], got {opacity}"
            )));
        }
        self.opacity = opacity;
        Ok(())
    }

    pub fn rotation_matrix(&self) -> Matrix3<f64> {
        quat_to_rotation(&self.rotation)
    }

    /// `R S`, the square root of the covariance read off the factorization.
    pub fn covariance_sqrt(&self) -> Matrix3<f64> {
        self.rotation_matrix() * Matrix3::from_diagonal(&self.scale)
    }

    pub fn covariance(&self) -> Matrix3<f64> {
        let m = self.covariance_sqrt();
        m * m.transpose()
    }

    /// Squared Mahalanobis distance of `x` from the particle center.
    pub fn sq_mahalanobis(&self, x: &Vector3<f64>) -> f64 {
        self.prepare(0).to_canonical(&(x - self.mean)).norm_squared()
    }

    pub fn prepare(&self, id: u32) -> PreparedParticle {
        let inv_scale = Matrix3::from_diagonal(&self.scale.map(|s| 1.0 / s));
        PreparedParticle {
            id,
            mean: self.mean,
            to_canonical: inv_scale * self.rotation_matrix().transpose(),
            opacity: self.opacity,
        }
    }
}

/// `Σ = R S Sᵀ Rᵀ` for a `(w, x, y, z)` quaternion and per-axis scales.
pub fn covariance_from_rs(q: &Vector4<f64>, s: &Vector3<f64>) -> Result<Matrix3<f64>> {
    let mut p = GaussianParticle::new(Vector3::zeros(), *q, Vector3::repeat(1.0), 1.0, RadianceCoeffs::zeros())?;
    p.set_scale(*s)?;
    Ok(p.covariance())
}

/// Kernel response of `particle` at world point `x`.
pub fn kernel_response(particle: &GaussianParticle, x: &Vector3<f64>, kernel: &KernelSpec) -> f64 {
    kernel.response(particle.sq_mahalanobis(x))
}

/// Depth along `ray` at which the particle response peaks. May be negative.
pub fn max_response_depth(particle: &GaussianParticle, ray: &Ray) -> f64 {
    particle.prepare(0).max_response_depth(ray)
}

/// Alpha of `particle` evaluated at its maximum response along `ray`, clamped
/// to [`MAX_ALPHA`].
pub fn particle_alpha(particle: &GaussianParticle, ray: &Ray, kernel: &KernelSpec) -> f64 {
    particle.prepare(0).evaluate(ray, kernel).alpha
}

/// Particle data in the form used by the inner rendering loop.
#[derive(Clone, Debug)]
pub struct PreparedParticle {
    pub id: u32,
    pub mean: Vector3<f64>,
    /// `S⁻¹ Rᵀ`
    pub to_canonical: Matrix3<f64>,
    pub opacity: f64,
}

/// Result of evaluating one particle along one ray.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RayEval {
    pub tau: f64,
    pub sq_distance: f64,
    pub response: f64,
    pub alpha: f64,
}

impl PreparedParticle {
    #[inline]
    pub fn to_canonical(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.to_canonical * v
    }

    #[inline]
    pub fn max_response_depth(&self, ray: &Ray) -> f64 {
        let o_g = self.to_canonical(&(ray.origin - self.mean));
        let d_g = self.to_canonical(&ray.direction);
        -o_g.dot(&d_g) / d_g.norm_squared()
    }

    #[inline]
    pub fn evaluate(&self, ray: &Ray, kernel: &KernelSpec) -> RayEval {
        let o_g = self.to_canonical(&(ray.origin - self.mean));
        let d_g = self.to_canonical(&ray.direction);
        let tau = -o_g.dot(&d_g) / d_g.norm_squared();
        let sq_distance = (o_g + d_g * tau).norm_squared();
        let response = kernel.response(sq_distance);
        RayEval {
            tau,
            sq_distance,
            response,
            alpha: (self.opacity * response).min(MAX_ALPHA),
        }
    }
}
