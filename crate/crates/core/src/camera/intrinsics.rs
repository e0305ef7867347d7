//! Lens models: ideal pinhole, Brown–Conrady radial/tangential, and the
//! equidistant fisheye `r = f θ_d(θ)`.

use nalgebra::{Matrix2, Vector2, Vector3};

use super::NEAR_PLANE;
use crate::{Error, Result};

/// Largest off-axis angle accepted by the fisheye model.
pub const FISHEYE_MAX_THETA: f64 = 0.75 * std::f64::consts::PI;

const UNDISTORT_MAX_ITERS: usize = 10;
const UNDISTORT_TOL: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum IntrinsicsModel {
    Pinhole,
    PinholeRadial {
        k1: f64,
        k2: f64,
        k3: f64,
        p1: f64,
        p2: f64,
    },
    FisheyeEquidistant {
        k: [f64; 4],
    },
}

impl IntrinsicsModel {
    pub fn name(&self) -> &'static str {
        match self {
            IntrinsicsModel::Pinhole => "pinhole",
            IntrinsicsModel::PinholeRadial { .. } => "pinhole_radial",
            IntrinsicsModel::FisheyeEquidistant { .. } => "fisheye_equidistant",
        }
    }

    /// True for a pinhole, or a radial model whose coefficients are all zero.
    pub fn is_ideal_pinhole(&self) -> bool {
        match *self {
            IntrinsicsModel::Pinhole => true,
            IntrinsicsModel::PinholeRadial { k1, k2, k3, p1, p2 } => [k1, k2, k3, p1, p2].iter().all(|c| *c == 0.0),
            IntrinsicsModel::FisheyeEquidistant { .. } => false,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Intrinsics {
    pub model: IntrinsicsModel,
    pub focal: Vector2<f64>,
    pub principal_point: Vector2<f64>,
    /// `(width, height)` in pixels.
    pub resolution: (u32, u32),
}

impl Intrinsics {
    pub fn new(
        model: IntrinsicsModel,
        focal: Vector2<f64>,
        principal_point: Vector2<f64>,
        resolution: (u32, u32),
    ) -> Result<Self> {
        if !(focal.x > 0.0 && focal.y > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "focal lengths must be positive, got {focal:?}"
            )));
        }
        if resolution.0 < 1 || resolution.1 < 1 {
            return Err(Error::InvalidParameter("resolution must be at least 1x1".into()));
        }
        let (w, h) = (resolution.0 as f64, resolution.1 as f64);
        if !(0.0..=w).contains(&principal_point.x) || !(0.0..=h).contains(&principal_point.y) {
            return Err(Error::InvalidParameter(format!(
                "principal point ({}, {}) lies outside the {}x{} image",
                principal_point.x, principal_point.y, resolution.0, resolution.1
            )));
        }
        Ok(Self {
            model,
            focal,
            principal_point,
            resolution,
        })
    }

    /// Camera-space point to pixel, `None` when the model cannot image it.
    pub fn project(&self, p: &Vector3<f64>) -> Option<Vector2<f64>> {
        let normalized = match self.model {
            IntrinsicsModel::PinholeRadial { k1, k2, k3, p1, p2 } if !self.model.is_ideal_pinhole() => {
                if p.z <= NEAR_PLANE {
                    return None;
                }
                distort_radial(&Vector2::new(p.x / p.z, p.y / p.z), k1, k2, k3, p1, p2)
            }
            IntrinsicsModel::Pinhole | IntrinsicsModel::PinholeRadial { .. } => {
                if p.z <= NEAR_PLANE {
                    return None;
                }
                Vector2::new(p.x / p.z, p.y / p.z)
            }
            IntrinsicsModel::FisheyeEquidistant { k } => {
                if p.norm() <= NEAR_PLANE {
                    return None;
                }
                let r_xy = (p.x * p.x + p.y * p.y).sqrt();
                let theta = r_xy.atan2(p.z);
                if theta >= FISHEYE_MAX_THETA {
                    return None;
                }
                if r_xy == 0.0 {
                    Vector2::zeros()
                } else {
                    let theta_d = fisheye_distort(theta, &k);
                    Vector2::new(p.x, p.y) * (theta_d / r_xy)
                }
            }
        };
        Some(normalized.component_mul(&self.focal) + self.principal_point)
    }

    /// Unit camera-space direction imaged at `pixel`.
    pub fn unproject(&self, pixel: &Vector2<f64>) -> Result<Vector3<f64>> {
        let m = (pixel - self.principal_point).component_div(&self.focal);
        let fail = || Error::Undistortion { x: pixel.x, y: pixel.y };
        let dir = match self.model {
            IntrinsicsModel::Pinhole => Vector3::new(m.x, m.y, 1.0),
            IntrinsicsModel::PinholeRadial { k1, k2, k3, p1, p2 } => {
                let u = undistort_radial(&m, k1, k2, k3, p1, p2).ok_or_else(fail)?;
                Vector3::new(u.x, u.y, 1.0)
            }
            IntrinsicsModel::FisheyeEquidistant { k } => {
                let theta_d = m.norm();
                if theta_d == 0.0 {
                    Vector3::z()
                } else {
                    let theta = fisheye_undistort(theta_d, &k).ok_or_else(fail)?;
                    if theta >= FISHEYE_MAX_THETA {
                        return Err(fail());
                    }
                    let s = theta.sin() / theta_d;
                    Vector3::new(m.x * s, m.y * s, theta.cos())
                }
            }
        };
        Ok(dir.normalize())
    }
}

fn distort_radial(n: &Vector2<f64>, k1: f64, k2: f64, k3: f64, p1: f64, p2: f64) -> Vector2<f64> {
    let (x, y) = (n.x, n.y);
    let r2 = x * x + y * y;
    let radial = 1.0 + r2 * (k1 + r2 * (k2 + r2 * k3));
    Vector2::new(
        x * radial + 2.0 * p1 * x * y + p2 * (r2 + 2.0 * x * x),
        y * radial + p1 * (r2 + 2.0 * y * y) + 2.0 * p2 * x * y,
    )
}

fn distort_radial_jacobian(n: &Vector2<f64>, k1: f64, k2: f64, k3: f64, p1: f64, p2: f64) -> Matrix2<f64> {
    let (x, y) = (n.x, n.y);
    let r2 = x * x + y * y;
    let radial = 1.0 + r2 * (k1 + r2 * (k2 + r2 * k3));
    let d_radial = k1 + r2 * (2.0 * k2 + 3.0 * k3 * r2);
    let cross = 2.0 * x * y * d_radial + 2.0 * p1 * x + 2.0 * p2 * y;
    Matrix2::new(
        radial + 2.0 * x * x * d_radial + 2.0 * p1 * y + 6.0 * p2 * x,
        cross,
        cross,
        radial + 2.0 * y * y * d_radial + 6.0 * p1 * y + 2.0 * p2 * x,
    )
}

/// Newton iteration on the 2D distortion map, starting at the distorted point.
fn undistort_radial(d: &Vector2<f64>, k1: f64, k2: f64, k3: f64, p1: f64, p2: f64) -> Option<Vector2<f64>> {
    let mut u = *d;
    for _ in 0..UNDISTORT_MAX_ITERS {
        let residual = distort_radial(&u, k1, k2, k3, p1, p2) - d;
        if residual.norm() < UNDISTORT_TOL {
            return Some(u);
        }
        let step = distort_radial_jacobian(&u, k1, k2, k3, p1, p2).lu().solve(&residual)?;
        u -= step;
    }
    let residual = distort_radial(&u, k1, k2, k3, p1, p2) - d;
    (residual.norm() < UNDISTORT_TOL).then_some(u)
}

fn fisheye_distort(theta: f64, k: &[f64; 4]) -> f64 {
    let t2 = theta * theta;
    theta * (1.0 + t2 * (k[0] + t2 * (k[1] + t2 * (k[2] + t2 * k[3]))))
}

fn fisheye_undistort(theta_d: f64, k: &[f64; 4]) -> Option<f64> {
    if k.iter().all(|c| *c == 0.0) {
        return Some(theta_d);
    }
    let mut theta = theta_d;
    for _ in 0..UNDISTORT_MAX_ITERS {
        let residual = fisheye_distort(theta, k) - theta_d;
        if residual.abs() < UNDISTORT_TOL {
            return Some(theta);
        }
        let t2 = theta * theta;
        let deriv = 1.0 + t2 * (3.0 * k[0] + t2 * (5.0 * k[1] + t2 * (7.0 * k[2] + t2 * 9.0 * k[3])));
        if deriv.abs() < 1e-12 {
            return None;
        }
        theta -= residual / deriv;
    }
    ((fisheye_distort(theta, k) - theta_d).abs() < UNDISTORT_TOL).then_some(theta)
}
