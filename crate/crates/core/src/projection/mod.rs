//! Gaussian-to-conic projection: the unscented transform, the EWA
//! linearization baseline and a Monte-Carlo reference, plus closed-form KL
//! divergence between the resulting 2D Gaussians.

mod ewa;
mod mc;
mod ut;

pub use ewa::{ewa_call_count, ewa_project};
pub use mc::{mc_project, mc_project_with, MC_MIN_VALID_FRACTION};
pub use ut::{
    sigma_points, sigma_points_from_sqrt, unscented_transform, ut_project, ut_project_with, ut_weights, SigmaPointSet,
    UTParams, UTWeights,
};

use nalgebra::{Matrix2, Vector2};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Screen-space Gaussian: mean and covariance in pixels.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Conic2D {
    pub mean: Vector2<f64>,
    pub cov: Matrix2<f64>,
    pub valid: bool,
}

impl Conic2D {
    /// Marks the conic valid only if `cov` is a finite positive-definite matrix.
    pub fn new(mean: Vector2<f64>, cov: Matrix2<f64>) -> Self {
        let finite = mean.iter().chain(cov.iter()).all(|v| v.is_finite());
        let valid = finite && cov.determinant() > 0.0 && cov.trace() > 0.0;
        Self { mean, cov, valid }
    }

    pub fn invalid() -> Self {
        Self {
            mean: Vector2::zeros(),
            cov: Matrix2::zeros(),
            valid: false,
        }
    }

    /// Adds `amount` px² to the diagonal (screen-space low-pass filter).
    pub fn dilated(&self, amount: f64) -> Self {
        if !self.valid {
            return *self;
        }
        Self::new(self.mean, self.cov + Matrix2::identity() * amount)
    }
}

/// `KL(p ‖ q)` between two 2D Gaussians.
pub fn kl_divergence(p: &Conic2D, q: &Conic2D) -> Result<f64> {
    if !p.valid || !q.valid {
        return Err(Error::InvalidConic("KL divergence needs two valid conics"));
    }
    let q_inv = q
        .cov
        .try_inverse()
        .ok_or(Error::InvalidConic("singular reference covariance"))?;
    let diff = q.mean - p.mean;
    let trace = (q_inv * p.cov).trace();
    let maha = diff.dot(&(q_inv * diff));
    let log_det = (q.cov.determinant() / p.cov.determinant()).ln();
    Ok((0.5 * (trace + maha - 2.0 + log_det)).max(0.0))
}
