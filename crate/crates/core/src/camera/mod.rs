//! Camera rigs: intrinsic lens models plus a (possibly rolling) shutter that
//! assigns every image row its own world-to-camera pose.
//!
//! Camera frame convention: `+x` right, `+y` down, `+z` forward. Pixel
//! coordinates are continuous; pixel `(i, j)` covers `[i, i+1) × [j, j+1)`.

mod intrinsics;

pub use intrinsics::{Intrinsics, IntrinsicsModel, FISHEYE_MAX_THETA};

use nalgebra::{Isometry3, Matrix3, Point3, Rotation3, Translation3, UnitQuaternion, Vector2, Vector3};

use crate::particles::Ray;
use crate::{Error, Result};

/// Points closer than this (world units) are treated as behind the camera.
pub const NEAR_PLANE: f64 = 0.01;

/// Default number of row-search refinements for rolling-shutter projection.
pub const DEFAULT_RS_ITERATIONS: usize = 3;

/// World-to-camera rigid transform.
pub type Pose = Isometry3<f64>;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ShutterMode {
    Global,
    RollingTopToBottom,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ShutterSpec {
    mode: ShutterMode,
    pose_start: Pose,
    pose_end: Pose,
    /// Fixed-point refinements used to locate a point's exposure row.
    pub rs_iterations: usize,
}

impl ShutterSpec {
    pub fn global(pose: Pose) -> Self {
        Self {
            mode: ShutterMode::Global,
            pose_start: pose,
            pose_end: pose,
            rs_iterations: DEFAULT_RS_ITERATIONS,
        }
    }

    pub fn rolling(pose_start: Pose, pose_end: Pose) -> Self {
        Self {
            mode: ShutterMode::RollingTopToBottom,
            pose_start,
            pose_end,
            rs_iterations: DEFAULT_RS_ITERATIONS,
        }
    }

    pub fn new(mode: ShutterMode, pose_start: Pose, pose_end: Pose) -> Result<Self> {
        match mode {
            ShutterMode::Global if pose_start != pose_end => Err(Error::InvalidParameter(
                "global shutter requires identical start and end poses".into(),
            )),
            ShutterMode::Global => Ok(Self::global(pose_start)),
            ShutterMode::RollingTopToBottom => Ok(Self::rolling(pose_start, pose_end)),
        }
    }

    pub fn mode(&self) -> ShutterMode {
        self.mode
    }

    pub fn pose_start(&self) -> &Pose {
        &self.pose_start
    }

    pub fn pose_end(&self) -> &Pose {
        &self.pose_end
    }

    /// Pose at normalized exposure time `t ∈ [0, 1]` (clamped).
    pub fn pose_at_time(&self, t: f64) -> Pose {
        match self.mode {
            ShutterMode::Global => self.pose_start,
            ShutterMode::RollingTopToBottom => interpolate_pose(&self.pose_start, &self.pose_end, t.clamp(0.0, 1.0)),
        }
    }
}

/// Translation lerp and rotation slerp between two poses.
pub fn interpolate_pose(a: &Pose, b: &Pose, t: f64) -> Pose {
    let translation = a.translation.vector.lerp(&b.translation.vector, t);
    let rotation = a
        .rotation
        .try_slerp(&b.rotation, t, 1e-12)
        .unwrap_or(if t < 0.5 { a.rotation } else { b.rotation });
    Isometry3::from_parts(Translation3::from(translation), rotation)
}

/// Pose used for image row `row` (clamped to `[0, resolution_y]`).
pub fn pose_at_row(shutter: &ShutterSpec, row: f64, resolution_y: f64) -> Pose {
    shutter.pose_at_time(row / resolution_y)
}

/// World-to-camera pose for a camera at `eye` looking at `target`, with
/// `up` pointing toward the top of the image.
pub fn look_at(eye: &Vector3<f64>, target: &Vector3<f64>, up: &Vector3<f64>) -> Result<Pose> {
    let forward = (target - eye)
        .try_normalize(1e-12)
        .ok_or_else(|| Error::InvalidParameter("look_at eye and target coincide".into()))?;
    let down = -(up - forward * up.dot(&forward));
    let down = down
        .try_normalize(1e-12)
        .ok_or_else(|| Error::InvalidParameter("look_at up vector is parallel to view direction".into()))?;
    let right = down.cross(&forward);
    let rot = Matrix3::from_rows(&[right.transpose(), down.transpose(), forward.transpose()]);
    let rotation = UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(rot));
    let translation = -(rotation * eye);
    Ok(Isometry3::from_parts(Translation3::from(translation), rotation))
}

/// Result of projecting one world point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PointProjection {
    pub pixel: Vector2<f64>,
    /// Camera-space `z` under the pose that produced `pixel`.
    pub depth: f64,
    pub valid: bool,
}

impl PointProjection {
    fn invalid() -> Self {
        Self {
            pixel: Vector2::repeat(f64::NAN),
            depth: f64::NAN,
            valid: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CameraRig {
    pub intrinsics: Intrinsics,
    pub shutter: ShutterSpec,
}

impl CameraRig {
    pub fn new(intrinsics: Intrinsics, shutter: ShutterSpec) -> Self {
        Self { intrinsics, shutter }
    }

    pub fn width(&self) -> usize {
        self.intrinsics.resolution.0 as usize
    }

    pub fn height(&self) -> usize {
        self.intrinsics.resolution.1 as usize
    }

    pub fn pose_at_row(&self, row: f64) -> Pose {
        pose_at_row(&self.shutter, row, self.intrinsics.resolution.1 as f64)
    }

    /// Camera center in world space at normalized exposure time `t`.
    pub fn center_at_time(&self, t: f64) -> Vector3<f64> {
        self.shutter
            .pose_at_time(t)
            .inverse_transform_point(&Point3::origin())
            .coords
    }

    fn project_with_pose(&self, pose: &Pose, x_world: &Vector3<f64>) -> PointProjection {
        let p_cam = pose.transform_point(&Point3::from(*x_world)).coords;
        match self.intrinsics.project(&p_cam) {
            Some(pixel) => PointProjection {
                pixel,
                depth: p_cam.z,
                valid: true,
            },
            None => PointProjection::invalid(),
        }
    }

    /// Projects a world point to pixels. Under a rolling shutter the exposure
    /// row is found by fixed-point iteration starting from mid-exposure.
    pub fn project_point(&self, x_world: &Vector3<f64>) -> PointProjection {
        match self.shutter.mode {
            ShutterMode::Global => self.project_with_pose(&self.shutter.pose_start, x_world),
            ShutterMode::RollingTopToBottom => {
                let height = self.intrinsics.resolution.1 as f64;
                let mut proj = self.project_with_pose(&self.pose_at_row(0.5 * height), x_world);
                for _ in 0..self.shutter.rs_iterations {
                    if !proj.valid {
                        return proj;
                    }
                    proj = self.project_with_pose(&self.pose_at_row(proj.pixel.y), x_world);
                }
                proj
            }
        }
    }

    /// Projects with the exposure-start pose only, ignoring the shutter.
    pub fn project_point_static(&self, x_world: &Vector3<f64>) -> PointProjection {
        self.project_with_pose(&self.shutter.pose_start, x_world)
    }

    /// World-space ray through `pixel`, using the pose of the pixel's row.
    pub fn pixel_to_ray(&self, pixel: &Vector2<f64>) -> Result<Ray> {
        let dir_cam = self.intrinsics.unproject(pixel)?;
        let pose = self.pose_at_row(pixel.y);
        let origin = pose.inverse_transform_point(&Point3::origin()).coords;
        let direction = pose.inverse_transform_vector(&dir_cam);
        Ray::new(origin, direction)
    }
}
