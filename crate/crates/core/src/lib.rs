//! Differentiable volumetric Gaussian-particle renderer.
//!
//! Particles are projected to screen-space conics with the unscented transform
//! (sigma points pushed through an arbitrary, possibly time-dependent camera),
//! then evaluated in 3D at their maximum response along each pixel ray and
//! composited front to back. The crate also carries the EWA linearization and a
//! Monte-Carlo projection for comparison, the analytic adjoint of the renderer,
//! a small Adam-based fitting loop, and the projection-quality benchmark.

// Range checks are written `!(x > 0.0)` so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod camera;
mod error;
pub mod gradcheck;
pub mod image;
pub mod math;
pub mod optim;
pub mod particles;
pub mod projection;
pub mod raster;
pub mod scene_file;

pub use camera::{CameraRig, Intrinsics, IntrinsicsModel, ShutterMode, ShutterSpec};
pub use error::{Error, Result};
pub use image::Image;
pub use particles::{GaussianParticle, KernelSpec, RadianceCoeffs, Ray};
pub use projection::{Conic2D, UTParams};
pub use raster::{FrameBuffer, RenderOptions, SortMode};
