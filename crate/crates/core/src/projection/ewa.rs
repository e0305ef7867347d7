use std::sync::atomic::{AtomicUsize, Ordering};

use nalgebra::{Matrix2, Matrix2x3, Point3, Vector2};

use super::Conic2D;
use crate::camera::{CameraRig, NEAR_PLANE};
use crate::particles::GaussianParticle;
use crate::{Error, Result};

static CALLS: AtomicUsize = AtomicUsize::new(0);

/// Number of `ewa_project` calls made by this process so far.
pub fn ewa_call_count() -> usize {
    CALLS.load(Ordering::Relaxed)
}

/// First-order (EWA) projection: `Σ' = J W Σ Wᵀ Jᵀ` with the pinhole
/// Jacobian at the particle mean. Uses the exposure-start pose only.
pub fn ewa_project(particle: &GaussianParticle, rig: &CameraRig) -> Result<Conic2D> {
    CALLS.fetch_add(1, Ordering::Relaxed);
    let intr = &rig.intrinsics;
    if !intr.model.is_ideal_pinhole() {
        return Err(Error::UnsupportedModel(format!(
            "EWA baseline implements the pinhole Jacobian only, got {}",
            intr.model.name()
        )));
    }
    let pose = rig.shutter.pose_start();
    let p = pose.transform_point(&Point3::from(particle.mean)).coords;
    if p.z <= NEAR_PLANE {
        return Ok(Conic2D::invalid());
    }
    let (fx, fy) = (intr.focal.x, intr.focal.y);
    let inv_z = 1.0 / p.z;
    let jac = Matrix2x3::new(
        fx * inv_z,
        0.0,
        -fx * p.x * inv_z * inv_z,
        0.0,
        fy * inv_z,
        -fy * p.y * inv_z * inv_z,
    );
    let rot = pose.rotation.to_rotation_matrix().into_inner();
    let jw = jac * rot;
    let cov: Matrix2<f64> = jw * particle.covariance() * jw.transpose();
    let mean = Vector2::new(fx * p.x * inv_z, fy * p.y * inv_z) + intr.principal_point;
    Ok(Conic2D::new(mean, 0.5 * (cov + cov.transpose())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::camera::{Intrinsics, IntrinsicsModel, Pose, ShutterSpec};
    use crate::projection::{kl_divergence, mc_project, ut_project, UTParams};
    use approx::assert_relative_eq;
    use nalgebra::{Vector3, Vector4};

    fn rig(model: IntrinsicsModel, f: f64) -> CameraRig {
        let intr = Intrinsics::new(model, Vector2::new(f, f), Vector2::new(320.0, 240.0), (640, 480)).unwrap();
        CameraRig::new(intr, ShutterSpec::global(Pose::identity()))
    }

    #[test]
    fn on_axis_isotropic() {
        let p = GaussianParticle::isotropic(Vector3::new(0.0, 0.0, 4.0), 0.1, 1.0, Vector3::zeros()).unwrap();
        let conic = ewa_project(&p, &rig(IntrinsicsModel::Pinhole, 200.0)).unwrap();
        assert_relative_eq!(conic.mean, Vector2::new(320.0, 240.0), epsilon = 1e-12);
        assert_relative_eq!(conic.cov, Matrix2::identity() * 25.0, epsilon = 1e-10);
    }

    #[test]
    fn rejects_fisheye() {
        let p = GaussianParticle::isotropic(Vector3::new(0.0, 0.0, 4.0), 0.1, 1.0, Vector3::zeros()).unwrap();
        let err = ewa_project(&p, &rig(IntrinsicsModel::FisheyeEquidistant { k: [0.0; 4] }, 200.0)).unwrap_err();
        assert!(matches!(err, Error::UnsupportedModel(_)));
        assert!(err.to_string().contains("pinhole Jacobian"));
    }

    #[test]
    fn zero_distortion_radial_is_accepted() {
        let p = GaussianParticle::isotropic(Vector3::new(0.0, 0.0, 4.0), 0.1, 1.0, Vector3::zeros()).unwrap();
        let model = IntrinsicsModel::PinholeRadial {
            k1: 0.0,
            k2: 0.0,
            k3: 0.0,
            p1: 0.0,
            p2: 0.0,
        };
        assert!(ewa_project(&p, &rig(model, 200.0)).unwrap().valid);
        let model = IntrinsicsModel::PinholeRadial {
            k1: 0.1,
            k2: 0.0,
            k3: 0.0,
            p1: 0.0,
            p2: 0.0,
        };
        assert!(ewa_project(&p, &rig(model, 200.0)).is_err());
    }

    #[test]
    fn behind_camera_is_invalid() {
        let p = GaussianParticle::isotropic(Vector3::new(0.0, 0.0, -1.0), 0.1, 1.0, Vector3::zeros()).unwrap();
        assert!(!ewa_project(&p, &rig(IntrinsicsModel::Pinhole, 200.0)).unwrap().valid);
    }

    #[test]
    fn linearization_error_grows_toward_wide_fov_corner() {
        // ~60° off axis on a wide pinhole: the projection is strongly nonlinear
        // across the particle, which the Jacobian cannot see.
        let rig = rig(IntrinsicsModel::Pinhole, 150.0);
        let p = GaussianParticle::new(
            Vector3::new(1.6, 1.2, 1.2),
            Vector4::new(0.8, 0.3, -0.2, 0.4),
            Vector3::new(0.25, 0.15, 0.1),
            1.0,
            crate::particles::RadianceCoeffs::zeros(),
        )
        .unwrap();
        let mc = mc_project(&p, &rig, 20_000, 11);
        let ut = ut_project(&p, &rig, &UTParams::default());
        let ewa = ewa_project(&p, &rig).unwrap();
        let kl_ut = kl_divergence(&ut, &mc).unwrap();
        let kl_ewa = kl_divergence(&ewa, &mc).unwrap();
        assert!(kl_ewa > kl_ut, "ewa {kl_ewa} ut {kl_ut}");
    }
}
