use serde::{Deserialize, Serialize};

use super::{GeometryError, Vec3};

/// Points closer than this along the optical axis are treated as behind the camera.
pub const MIN_DEPTH: f64 = 1e-3;

/// Pinhole intrinsics. Camera frame convention: +z forward, +x right, +y down.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawIntrinsics", into = "RawIntrinsics")]
pub struct CameraIntrinsics {
    fx: f64,
    fy: f64,
    cx: f64,
    cy: f64,
    width: u32,
    height: u32,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawIntrinsics {
    fx: f64,
    fy: f64,
    cx: f64,
    cy: f64,
    width: u32,
    height: u32,
}

impl TryFrom<RawIntrinsics> for CameraIntrinsics {
    type Error = GeometryError;
    fn try_from(r: RawIntrinsics) -> Result<Self, Self::Error> {
        CameraIntrinsics::new(r.fx, r.fy, r.cx, r.cy, r.width, r.height)
    }
}

impl From<CameraIntrinsics> for RawIntrinsics {
    fn from(c: CameraIntrinsics) -> Self {
        RawIntrinsics { fx: c.fx, fy: c.fy, cx: c.cx, cy: c.cy, width: c.width, height: c.height }
    }
}

impl CameraIntrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, width: u32, height: u32) -> Result<Self, GeometryError> {
        let ok = fx > 0.0
            && fy > 0.0
            && fx.is_finite()
            && fy.is_finite()
            && width > 0
            && height > 0
            && cx > 0.0
            && cx < width as f64
            && cy > 0.0
            && cy < height as f64;
        if !ok {
            return Err(GeometryError::InvalidIntrinsics { fx, fy, cx, cy, width, height });
        }
        Ok(CameraIntrinsics { fx, fy, cx, cy, width, height })
    }

    pub fn fx(&self) -> f64 {
        self.fx
    }
    pub fn fy(&self) -> f64 {
        self.fy
    }
    pub fn cx(&self) -> f64 {
        self.cx
    }
    pub fn cy(&self) -> f64 {
        self.cy
    }
    pub fn width(&self) -> u32 {
        self.width
    }
    pub fn height(&self) -> u32 {
        self.height
    }

    /// Pinhole projection without the image-bounds test. `None` only when the point is
    /// not in front of the camera.
    pub fn project_unbounded(&self, p: Vec3) -> Option<(f64, f64)> {
        if !(p.z > MIN_DEPTH) {
            return None;
        }
        Some((self.fx * p.x / p.z + self.cx, self.fy * p.y / p.z + self.cy))
    }

    pub fn contains_pixel(&self, u: f64, v: f64) -> bool {
        u >= 0.0 && u < self.width as f64 && v >= 0.0 && v < self.height as f64
    }

    /// Unit ray through pixel `(u, v)`; pixels outside the image are allowed.
    pub fn pixel_ray(&self, u: f64, v: f64) -> Vec3 {
        let d = Vec3::new((u - self.cx) / self.fx, (v - self.cy) / self.fy, 1.0);
        d / d.norm()
    }
}

/// Projects a camera-frame point to pixel coordinates; `None` when it is behind the
/// camera or falls outside `[0, width) × [0, height)`.
pub fn project_point(intr: &CameraIntrinsics, p_cam: Vec3) -> Option<(f64, f64)> {
    let (u, v) = intr.project_unbounded(p_cam)?;
    intr.contains_pixel(u, v).then_some((u, v))
}

pub fn pixel_ray(intr: &CameraIntrinsics, u: f64, v: f64) -> Vec3 {
    intr.pixel_ray(u, v)
}
