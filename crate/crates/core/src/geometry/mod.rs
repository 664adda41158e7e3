//! Rigid-body geometry shared by every stage: vectors, unit quaternions, SE(3)
//! transforms with lazily collapsed chains, the pinhole camera model and frusta.

mod camera;
mod frustum;
mod quaternion;
mod transform;
mod vector;

pub use camera::{pixel_ray, project_point, CameraIntrinsics, MIN_DEPTH};
pub use frustum::Frustum;
pub use quaternion::{UnitQuaternion, UNIT_NORM_TOLERANCE};
pub use transform::{compose, evaluate_chain, interpolate_pose, RigidTransform, TransformChain};
pub use vector::Vec3;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("quaternion ({w}, {x}, {y}, {z}) cannot be normalized")]
    DegenerateQuaternion { w: f64, x: f64, y: f64, z: f64 },
    #[error("quaternion norm {norm} is not within 1e-9 of 1")]
    NotUnitQuaternion { norm: f64 },
    #[error("rotation axis has zero length")]
    ZeroAxis,
    #[error("interpolation parameter {0} outside [0, 1]")]
    InterpolationOutOfRange(f64),
    #[error("invalid intrinsics fx={fx} fy={fy} cx={cx} cy={cy} size={width}x{height}")]
    InvalidIntrinsics { fx: f64, fy: f64, cx: f64, cy: f64, width: u32, height: u32 },
    #[error("invalid frustum: {0}")]
    InvalidFrustum(String),
}

/// Wraps an angle into `(-π, π]`.
pub fn wrap_angle(a: f64) -> f64 {
    use std::f64::consts::{PI, TAU};
    let mut r = a.rem_euclid(TAU);
    if r > PI {
        r -= TAU;
    }
    r
}
