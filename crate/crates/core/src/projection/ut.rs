//! Unscented transform with seven sigma points read off the `R S` factor.

use nalgebra::{Matrix2, Matrix3, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use super::Conic2D;
use crate::camera::CameraRig;
use crate::particles::GaussianParticle;
use crate::{Error, Result};

/// Spread (`alpha`), prior (`beta`) and secondary scaling (`kappa`) of the
/// sigma points. Construction guarantees `3 + λ > 0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawUTParams")]
pub struct UTParams {
    alpha: f64,
    beta: f64,
    kappa: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawUTParams {
    alpha: f64,
    beta: f64,
    kappa: f64,
}

impl TryFrom<RawUTParams> for UTParams {
    type Error = Error;

    fn try_from(raw: RawUTParams) -> Result<Self> {
        UTParams::new(raw.alpha, raw.beta, raw.kappa)
    }
}

impl UTParams {
    pub fn new(alpha: f64, beta: f64, kappa: f64) -> Result<Self> {
        let params = Self { alpha, beta, kappa };
        let spread = 3.0 + params.lambda();
        if !(spread > 0.0) || !spread.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "unscented transform needs 3 + lambda > 0, got {spread} (alpha={alpha}, kappa={kappa})"
            )));
        }
        Ok(params)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    /// `λ = α²(3 + κ) − 3`
    pub fn lambda(&self) -> f64 {
        self.alpha * self.alpha * (3.0 + self.kappa) - 3.0
    }
}

impl Default for UTParams {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            beta: 2.0,
            kappa: 0.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UTWeights {
    pub mean: [f64; 7],
    pub cov: [f64; 7],
}

pub fn ut_weights(params: &UTParams) -> UTWeights {
    let lambda = params.lambda();
    let w0 = lambda / (3.0 + lambda);
    let wi = 1.0 / (2.0 * (3.0 + lambda));
    let mut mean = [wi; 7];
    let mut cov = [wi; 7];
    mean[0] = w0;
    cov[0] = w0 + (1.0 - params.alpha * params.alpha + params.beta);
    UTWeights { mean, cov }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SigmaPointSet {
    pub points: [Vector3<f64>; 7],
    pub weights: UTWeights,
}

/// Sigma points `μ`, `μ ± √(3+λ) · column_i(sqrt)` for any square root
/// `sqrt sqrtᵀ = Σ`.
pub fn sigma_points_from_sqrt(mean: &Vector3<f64>, sqrt: &Matrix3<f64>, params: &UTParams) -> SigmaPointSet {
    let spread = (3.0 + params.lambda()).sqrt();
    let mut points = [*mean; 7];
    for i in 0..3 {
        let offset = sqrt.column(i) * spread;
        points[1 + i] = mean + offset;
        points[4 + i] = mean - offset;
    }
    SigmaPointSet {
        points,
        weights: ut_weights(params),
    }
}

pub fn sigma_points(particle: &GaussianParticle, params: &UTParams) -> SigmaPointSet {
    sigma_points_from_sqrt(&particle.mean, &particle.covariance_sqrt(), params)
}

/// Pushes the sigma points through `project` and re-estimates a 2D Gaussian.
/// Any point failing to project invalidates the result.
pub fn unscented_transform<F>(set: &SigmaPointSet, project: F) -> Conic2D
where
    F: Fn(&Vector3<f64>) -> Option<Vector2<f64>>,
{
    let mut images = [Vector2::zeros(); 7];
    for (img, x) in images.iter_mut().zip(&set.points) {
        match project(x) {
            Some(v) => *img = v,
            None => return Conic2D::invalid(),
        }
    }
    let mean = images
        .iter()
        .zip(&set.weights.mean)
        .fold(Vector2::zeros(), |acc, (v, w)| acc + v * *w);
    let cov = images
        .iter()
        .zip(&set.weights.cov)
        .fold(Matrix2::zeros(), |acc, (v, w)| {
            let d = v - mean;
            acc + d * d.transpose() * *w
        });
    Conic2D::new(mean, cov)
}

pub fn ut_project_with<F>(particle: &GaussianParticle, params: &UTParams, project: F) -> Conic2D
where
    F: Fn(&Vector3<f64>) -> Option<Vector2<f64>>,
{
    unscented_transform(&sigma_points(particle, params), project)
}

/// Unscented projection through the full camera model; each sigma point gets
/// its own rolling-shutter pose.
pub fn ut_project(particle: &GaussianParticle, rig: &CameraRig, params: &UTParams) -> Conic2D {
    ut_project_with(particle, params, |x| {
        let p = rig.project_point(x);
        p.valid.then_some(p.pixel)
    })
}
