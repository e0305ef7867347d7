use nalgebra::{Matrix2, Vector2, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::Conic2D;
use crate::camera::CameraRig;
use crate::particles::GaussianParticle;

/// Fraction of samples that must project for the estimate to count as valid.
pub const MC_MIN_VALID_FRACTION: f64 = 0.8;

/// Monte-Carlo reference projection: draws `n_samples` points from the
/// particle's 3D Gaussian and fits a 2D Gaussian to their images.
pub fn mc_project_with<F>(particle: &GaussianParticle, n_samples: usize, seed: u64, project: F) -> Conic2D
where
    F: Fn(&Vector3<f64>) -> Option<Vector2<f64>>,
{
    if n_samples < 8 {
        return Conic2D::invalid();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sqrt = particle.covariance_sqrt();
    let mut images = Vec::with_capacity(n_samples);
    for _ in 0..n_samples {
        let z = Vector3::from_fn(|_, _| StandardNormal.sample(&mut rng));
        if let Some(px) = project(&(particle.mean + sqrt * z)) {
            images.push(px);
        }
    }
    let m = images.len();
    if (m as f64) < MC_MIN_VALID_FRACTION * n_samples as f64 || m < 3 {
        return Conic2D::invalid();
    }
    let mean = images.iter().fold(Vector2::zeros(), |a, v| a + v) / m as f64;
    let cov = images.iter().fold(Matrix2::zeros(), |a, v| {
        let d = v - mean;
        a + d * d.transpose()
    }) / (m - 1) as f64;
    Conic2D::new(mean, cov)
}

pub fn mc_project(particle: &GaussianParticle, rig: &CameraRig, n_samples: usize, seed: u64) -> Conic2D {
    mc_project_with(particle, n_samples, seed, |x| {
        let p = rig.project_point(x);
        p.valid.then_some(p.pixel)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::camera::{Intrinsics, IntrinsicsModel, Pose, ShutterSpec};
    use crate::particles::RadianceCoeffs;
    use crate::projection::{kl_divergence, ut_project, UTParams};
    use nalgebra::{Matrix2x3, Vector4};

    fn rig() -> CameraRig {
        let intr = Intrinsics::new(
            IntrinsicsModel::Pinhole,
            Vector2::new(250.0, 250.0),
            Vector2::new(160.0, 120.0),
            (320, 240),
        )
        .unwrap();
        CameraRig::new(intr, ShutterSpec::global(Pose::identity()))
    }

    fn particle() -> GaussianParticle {
        GaussianParticle::new(
            Vector3::new(0.4, -0.2, 3.0),
            Vector4::new(0.9, 0.1, 0.2, 0.3),
            Vector3::new(0.2, 0.1, 0.05),
            1.0,
            RadianceCoeffs::zeros(),
        )
        .unwrap()
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let a = mc_project(&particle(), &rig(), 500, 7);
        let b = mc_project(&particle(), &rig(), 500, 7);
        assert_eq!(a, b);
        let c = mc_project(&particle(), &rig(), 500, 8);
        assert_ne!(a.mean, c.mean);
    }

    #[test]
    fn too_few_samples_is_invalid() {
        assert!(!mc_project(&particle(), &rig(), 4, 0).valid);
    }

    #[test]
    fn mostly_behind_camera_is_invalid() {
        let p = GaussianParticle::isotropic(Vector3::new(0.0, 0.0, 0.0), 1.0, 1.0, Vector3::zeros()).unwrap();
        assert!(!mc_project(&p, &rig(), 500, 1).valid);
    }

    #[test]
    fn affine_map_within_three_standard_errors() {
        let p = particle();
        let map = Matrix2x3::new(100.0, 20.0, 0.0, -10.0, 80.0, 30.0);
        let truth_mean = map * p.mean;
        let truth_cov = map * p.covariance() * map.transpose();
        let n = 4000;
        let conic = mc_project_with(&p, n, 3, |x| Some(map * x));
        for i in 0..2 {
            let se = (truth_cov[(i, i)] / n as f64).sqrt();
            assert!((conic.mean[i] - truth_mean[i]).abs() < 3.0 * se);
            // Var of a sample variance of a Gaussian: 2σ⁴/(n−1).
            let se_var = truth_cov[(i, i)] * (2.0 / (n - 1) as f64).sqrt();
            assert!((conic.cov[(i, i)] - truth_cov[(i, i)]).abs() < 3.0 * se_var);
        }
    }

    #[test]
    fn converges_toward_ut_on_mild_projection() {
        let p = particle();
        let rig = rig();
        let ut = ut_project(&p, &rig, &UTParams::default());
        let mean_kl = |n: usize| {
            (0..50u64)
                .map(|seed| kl_divergence(&ut, &mc_project(&p, &rig, n, seed)).unwrap())
                .sum::<f64>()
                / 50.0
        };
        let small = mean_kl(100);
        let large = mean_kl(2000);
        assert!(large < small, "{large} vs {small}");
        assert!(large < 2e-3, "{large}");
    }
}
