//! Camera detections lifted to 3D frustums with LiDAR depth, and their association
//! into tracked objects.

mod munkres;
mod objects;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::aggregation::PointCloudBatch;
use crate::dataset::{Detection2D, SensorId, Timestamp};
use crate::geometry::{project_point, CameraIntrinsics, Frustum, GeometryError, RigidTransform, Vec3};

pub use munkres::{munkres_assign, CostMatrix};
pub use objects::{aggregate_objects, FusedObject, ObjectTracker, GATED_COST};

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct FusionConfig {
    /// Relative half-depth of the frustum cutout around the measured distance.
    pub depth_margin: f64,
    /// Association gate, meters.
    pub gate: f64,
    /// Seconds an object survives without a matching detection.
    pub ttl: f64,
    /// Weight of the measurement when updating a matched centroid.
    pub smoothing: f64,
    pub history_length: usize,
    /// Largest RGB-to-IR time offset, seconds, for transferring detections.
    pub ir_match_tolerance_s: f64,
}

impl Default for FusionConfig {
    fn default() -> Self {
        FusionConfig { depth_margin: 0.1, gate: 5.0, ttl: 2.0, smoothing: 0.5, history_length: 20, ir_match_tolerance_s: 0.1 }
    }
}

impl FusionConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.depth_margin > 0.0 && self.depth_margin < 1.0) {
            return Err("fusion.depth_margin must lie in (0, 1)".into());
        }
        if !(self.gate > 0.0 && self.gate.is_finite()) {
            return Err("fusion.gate must be positive".into());
        }
        if !(self.ttl >= 0.0 && self.ttl.is_finite()) {
            return Err("fusion.ttl must be non-negative".into());
        }
        if !(self.smoothing > 0.0 && self.smoothing <= 1.0) {
            return Err("fusion.smoothing must lie in (0, 1]".into());
        }
        if self.history_length < 2 {
            return Err("fusion.history_length must be at least 2".into());
        }
        if !(self.ir_match_tolerance_s >= 0.0 && self.ir_match_tolerance_s.is_finite()) {
            return Err("fusion.ir_match_tolerance_s must be non-negative".into());
        }
        Ok(())
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FusionError {
    #[error("depth must be positive, got {0}")]
    NonPositiveDepth(f64),
    #[error("invalid cost matrix: {0}")]
    InvalidCost(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectedPoint {
    pub u: f64,
    pub v: f64,
    /// Camera-frame z, meters.
    pub depth: f64,
}

/// Projects every batch into the camera given by `camera_pose` (local → camera).
///
/// Each batch's collapsed chain is composed with the camera pose once and applied to
/// its points; points behind the camera or outside the image are dropped.
pub fn project_cloud_to_camera(
    batches: &[PointCloudBatch],
    camera_pose: &RigidTransform,
    intr: &CameraIntrinsics,
) -> Vec<ProjectedPoint> {
    let mut out = Vec::new();
    for b in batches {
        out.extend(b.transformed_points(camera_pose).filter_map(|p| {
            project_point(intr, p.position).map(|(u, v)| ProjectedPoint { u, v, depth: p.position.z })
        }));
    }
    out
}

/// Depths of the projected points inside `bbox` (closed boundary).
pub fn depths_in_bbox(projected: &[ProjectedPoint], bbox: &Detection2D) -> Vec<f64> {
    projected.iter().filter(|p| bbox.contains(p.u, p.v)).map(|p| p.depth).collect()
}

pub fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    Some(if n % 2 == 1 { values[n / 2] } else { 0.5 * (values[n / 2 - 1] + values[n / 2]) })
}

/// Median depth of the points falling inside `bbox`; even counts average the two
/// middle values.
pub fn median_depth_in_bbox(projected: &[ProjectedPoint], bbox: &Detection2D) -> Option<f64> {
    median(&mut depths_in_bbox(projected, bbox))
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrustumDetection {
    /// Local frame.
    pub frustum: Frustum,
    pub class_id: u32,
    pub confidence: f64,
    /// Range along the bbox-center ray at which the camera-frame depth equals the
    /// measured median depth.
    pub distance: f64,
    pub bbox: Detection2D,
    pub source: SensorId,
    pub source_timestamp: Timestamp,
}

impl FrustumDetection {
    /// The point at `distance` along the bbox-center ray.
    pub fn center_point(&self) -> Vec3 {
        self.frustum.point_on_axis(self.distance)
    }
}

/// Builds the 3D frustum of a detection.
///
/// `camera_pose_inv` maps camera to local frame. The measured `depth` is a camera-frame
/// z value; it is converted to a range along the bbox-center ray, and the frustum is cut
/// at that range scaled by `1 ∓ depth_margin`.
pub fn detection_to_frustum(
    det: &Detection2D,
    intr: &CameraIntrinsics,
    camera_pose_inv: &RigidTransform,
    depth: f64,
    depth_margin: f64,
    source: SensorId,
    source_timestamp: Timestamp,
) -> Result<FrustumDetection, FusionError> {
    if !(depth > 0.0 && depth.is_finite()) {
        return Err(FusionError::NonPositiveDepth(depth));
    }
    let (cu, cv) = det.center();
    let axis_cam = intr.pixel_ray(cu, cv);
    let distance = depth / axis_cam.z;
    let corners_cam = [
        intr.pixel_ray(det.x_min, det.y_min),
        intr.pixel_ray(det.x_max, det.y_min),
        intr.pixel_ray(det.x_max, det.y_max),
        intr.pixel_ray(det.x_min, det.y_max),
    ];
    let frustum = Frustum::new(
        camera_pose_inv.translation,
        corners_cam.map(|c| camera_pose_inv.apply_vector(c)),
        camera_pose_inv.apply_vector(axis_cam),
        distance * (1.0 - depth_margin),
        distance * (1.0 + depth_margin),
    )?;
    Ok(FrustumDetection {
        frustum,
        class_id: det.class_id,
        confidence: det.confidence,
        distance,
        bbox: *det,
        source,
        source_timestamp,
    })
}
