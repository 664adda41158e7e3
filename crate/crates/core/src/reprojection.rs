//! Detection transfer between cameras through the object's frontal plane, and sparse
//! depth rendering of the aggregated cloud.

use thiserror::Error;

use crate::aggregation::PointCloudBatch;
use crate::dataset::{Detection2D, Timestamp};
use crate::fusion::FrustumDetection;
use crate::geometry::{CameraIntrinsics, RigidTransform, Vec3, MIN_DEPTH};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReprojectionError {
    #[error("timeline is empty")]
    EmptyTimeline,
    #[error("quad is degenerate: {0}")]
    DegenerateQuad(String),
}

/// Index of the entry closest to `t` in a sorted timeline; ties go to the earlier entry.
pub fn nearest_frame(timeline: &[Timestamp], t: Timestamp) -> Result<usize, ReprojectionError> {
    if timeline.is_empty() {
        return Err(ReprojectionError::EmptyTimeline);
    }
    let i = timeline.partition_point(|x| *x < t);
    if i == 0 {
        return Ok(0);
    }
    if i == timeline.len() {
        return Ok(i - 1);
    }
    let before = t.0 - timeline[i - 1].0;
    let after = timeline[i].0 - t.0;
    Ok(if before <= after { i - 1 } else { i })
}

/// Planar quadrilateral in the local frame, corners in image order (TL, TR, BR, BL).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrontalPlaneQuad {
    corners: [Vec3; 4],
    pub class_id: u32,
    pub confidence: f64,
}

impl FrontalPlaneQuad {
    pub fn new(corners: [Vec3; 4], class_id: u32, confidence: f64) -> Result<Self, ReprojectionError> {
        let [a, b, c, d] = corners;
        let n = (c - a).cross(d - b);
        let area = 0.5 * n.norm();
        if !(area > 0.0 && area.is_finite()) {
            return Err(ReprojectionError::DegenerateQuad(format!("area {area}")));
        }
        let n = n / n.norm();
        let centroid = (a + b + c + d) / 4.0;
        let off = corners.iter().map(|p| (*p - centroid).dot(n).abs()).fold(0.0, f64::max);
        if off > 1e-6 {
            return Err(ReprojectionError::DegenerateQuad(format!("corners off-plane by {off} m")));
        }
        Ok(FrontalPlaneQuad { corners, class_id, confidence })
    }

    pub fn corners(&self) -> &[Vec3; 4] {
        &self.corners
    }
}

/// The frustum's corner rays cut by the plane through the point at `distance` along the
/// bbox-center ray, perpendicular to that ray.
pub fn frustum_frontal_plane(fr: &FrustumDetection) -> FrontalPlaneQuad {
    FrontalPlaneQuad::new(fr.frustum.cut(fr.distance), fr.class_id, fr.confidence)
        .expect("a valid frustum cut at positive range is a planar non-degenerate quad")
}

fn clip_to_front(poly: &[Vec3]) -> Vec<Vec3> {
    let mut out = Vec::with_capacity(poly.len() + 2);
    for i in 0..poly.len() {
        let p = poly[i];
        let q = poly[(i + 1) % poly.len()];
        let p_in = p.z >= MIN_DEPTH;
        let q_in = q.z >= MIN_DEPTH;
        if p_in {
            out.push(p);
        }
        if p_in != q_in {
            let s = (MIN_DEPTH - p.z) / (q.z - p.z);
            let mut x = p.lerp(q, s);
            x.z = MIN_DEPTH;
            out.push(x);
        }
    }
    out
}

/// Projects `quad` into the camera `target_pose` (local → camera) and returns the
/// axis-aligned hull of the visible part, clipped to the image.
///
/// The part of the quad behind the camera is cut away before projection, so a quad that
/// straddles the image plane still yields the hull of its visible portion.
pub fn reproject_quad(quad: &FrontalPlaneQuad, target_pose: &RigidTransform, intr: &CameraIntrinsics) -> Option<Detection2D> {
    let cam: Vec<Vec3> = quad.corners.iter().map(|c| target_pose.apply(*c)).collect();
    let visible = clip_to_front(&cam);
    if visible.is_empty() {
        return None;
    }
    let (mut x0, mut y0, mut x1, mut y1) = (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
    for p in &visible {
        let (u, v) = intr.project_unbounded(Vec3::new(p.x, p.y, p.z.max(MIN_DEPTH * (1.0 + 1e-12))))?;
        x0 = x0.min(u);
        y0 = y0.min(v);
        x1 = x1.max(u);
        y1 = y1.max(v);
    }
    let (w, h) = (intr.width() as f64, intr.height() as f64);
    let det = Detection2D {
        x_min: x0.clamp(0.0, w),
        y_min: y0.clamp(0.0, h),
        x_max: x1.clamp(0.0, w),
        y_max: y1.clamp(0.0, h),
        class_id: quad.class_id,
        confidence: quad.confidence,
    };
    (det.x_min < det.x_max && det.y_min < det.y_max).then_some(det)
}

/// Per-pixel depth in meters, row-major; 0 means no data.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthImage {
    width: u32,
    height: u32,
    data: Vec<f64>,
}

impl DepthImage {
    pub fn new(width: u32, height: u32) -> Self {
        DepthImage { width, height, data: vec![0.0; width as usize * height as usize] }
    }

    pub fn from_data(width: u32, height: u32, data: Vec<f64>) -> Option<Self> {
        (data.len() == width as usize * height as usize && data.iter().all(|d| d.is_finite() && *d >= 0.0))
            .then_some(DepthImage { width, height, data })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, x: u32, y: u32) -> f64 {
        self.data[y as usize * self.width as usize + x as usize]
    }

    /// Keeps the smaller of the stored and the new depth.
    pub fn splat_min(&mut self, x: u32, y: u32, depth: f64) {
        let cell = &mut self.data[y as usize * self.width as usize + x as usize];
        if *cell == 0.0 || depth < *cell {
            *cell = depth;
        }
    }

    pub fn covered_pixels(&self) -> usize {
        self.data.iter().filter(|d| **d > 0.0).count()
    }
}

/// Renders the cloud into a depth image of `intr`'s resolution. Each point lands on its
/// nearest pixel; collisions keep the nearest depth.
pub fn render_depth_image(batches: &[PointCloudBatch], camera_pose: &RigidTransform, intr: &CameraIntrinsics) -> DepthImage {
    let mut img = DepthImage::new(intr.width(), intr.height());
    for b in batches {
        for p in b.transformed_points(camera_pose) {
            let Some((u, v)) = intr.project_unbounded(p.position) else { continue };
            let (x, y) = (u.round(), v.round());
            if x < 0.0 || y < 0.0 || x >= intr.width() as f64 || y >= intr.height() as f64 {
                continue;
            }
            img.splat_min(x as u32, y as u32, p.position.z);
        }
    }
    img
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{LidarPoint, SensorId, SensorKind};
    use crate::fusion::detection_to_frustum;
    use crate::geometry::{TransformChain, UnitQuaternion};

    fn intr() -> CameraIntrinsics {
        CameraIntrinsics::new(500.0, 500.0, 320.0, 240.0, 640, 480).unwrap()
    }

    fn ts(v: &[u64]) -> Vec<Timestamp> {
        v.iter().map(|x| Timestamp(*x)).collect()
    }

    fn frustum_det(b: Detection2D, depth: f64) -> FrustumDetection {
        detection_to_frustum(
            &b,
            &intr(),
            &RigidTransform::IDENTITY,
            depth,
            0.1,
            SensorId::new(SensorKind::CameraRgbLeft),
            Timestamp(0),
        )
        .unwrap()
    }

    fn bbox(x0: f64, y0: f64, x1: f64, y1: f64) -> Detection2D {
        Detection2D { x_min: x0, y_min: y0, x_max: x1, y_max: y1, class_id: 4, confidence: 0.5 }
    }

    #[test]
    fn nearest_frame_rules() {
        let tl = ts(&[10, 20, 30]);
        assert_eq!(nearest_frame(&tl, Timestamp(20)), Ok(1));
        assert_eq!(nearest_frame(&tl, Timestamp(15)), Ok(0));
        assert_eq!(nearest_frame(&tl, Timestamp(16)), Ok(1));
        assert_eq!(nearest_frame(&tl, Timestamp(0)), Ok(0));
        assert_eq!(nearest_frame(&tl, Timestamp(99)), Ok(2));
        assert_eq!(nearest_frame(&[], Timestamp(1)), Err(ReprojectionError::EmptyTimeline));
        assert_eq!(nearest_frame(&ts(&[5, 5, 9]), Timestamp(5)), Ok(0));
    }

    #[test]
    fn centered_frontal_plane_is_square() {
        let q = frustum_frontal_plane(&frustum_det(bbox(270.0, 190.0, 370.0, 290.0), 10.0));
        let c = q.corners();
        assert!((c[0] - Vec3::new(-1.0, -1.0, 10.0)).norm() < 1e-9);
        assert!((c[2] - Vec3::new(1.0, 1.0, 10.0)).norm() < 1e-9);
        assert_eq!(q.class_id, 4);
    }

    #[test]
    fn frontal_plane_at_near_matches_near_cut() {
        let mut fd = frustum_det(bbox(100.0, 50.0, 200.0, 150.0), 8.0);
        fd.distance = fd.frustum.near();
        let q = frustum_frontal_plane(&fd);
        let cut = fd.frustum.cut(fd.frustum.near());
        for (a, b) in q.corners().iter().zip(cut.iter()) {
            assert!((*a - *b).norm() < 1e-12);
        }
    }

    #[test]
    fn round_trip_reprojection() {
        let b = bbox(100.5, 50.25, 200.0, 150.75);
        let q = frustum_frontal_plane(&frustum_det(b, 8.0));
        let r = reproject_quad(&q, &RigidTransform::IDENTITY, &intr()).unwrap();
        for (x, y) in [(r.x_min, b.x_min), (r.y_min, b.y_min), (r.x_max, b.x_max), (r.y_max, b.y_max)] {
            assert!((x - y).abs() < 1e-6);
        }
    }

    #[test]
    fn quad_behind_camera_rejected() {
        let q = frustum_frontal_plane(&frustum_det(bbox(270.0, 190.0, 370.0, 290.0), 10.0));
        let turn = RigidTransform::from_rotation(UnitQuaternion::from_euler(0.0, std::f64::consts::PI, 0.0));
        assert_eq!(reproject_quad(&q, &turn, &intr()), None);
    }

    #[test]
    fn partially_visible_quad_is_clipped() {
        let q = frustum_frontal_plane(&frustum_det(bbox(600.0, 190.0, 700.0, 290.0), 10.0));
        let r = reproject_quad(&q, &RigidTransform::IDENTITY, &intr()).unwrap();
        assert_eq!(r.x_max, 640.0);
        assert!((r.x_min - 600.0).abs() < 1e-6);
    }

    #[test]
    fn straddling_quad_keeps_visible_part() {
        let q = FrontalPlaneQuad::new(
            [Vec3::new(-1.0, -1.0, -2.0), Vec3::new(1.0, -1.0, -2.0), Vec3::new(1.0, 1.0, 10.0), Vec3::new(-1.0, 1.0, 10.0)],
            0,
            1.0,
        )
        .unwrap();
        let r = reproject_quad(&q, &RigidTransform::IDENTITY, &intr()).unwrap();
        assert_eq!(r.y_min, 0.0);
        assert!((r.y_max - 290.0).abs() < 1e-9);
    }

    #[test]
    fn degenerate_quads_rejected() {
        assert!(FrontalPlaneQuad::new([Vec3::ZERO; 4], 0, 1.0).is_err());
        assert!(FrontalPlaneQuad::new([Vec3::ZERO, Vec3::X, Vec3::new(1.0, 1.0, 1.0), Vec3::Y], 0, 1.0).is_err());
    }

    #[test]
    fn depth_z_buffer() {
        let b = PointCloudBatch::new(
            vec![
                LidarPoint::new(Vec3::new(0.0, 0.0, 5.0), 0.0),
                LidarPoint::new(Vec3::new(0.0, 0.0, 3.0), 0.0),
                LidarPoint::new(Vec3::new(0.0, 0.0, 4.0), 0.0),
                LidarPoint::new(Vec3::new(100.0, 0.0, 1.0), 0.0),
            ],
            TransformChain::new(),
            Timestamp(0),
            SensorId::new(SensorKind::LidarLeft),
        );
        let img = render_depth_image(&[b], &RigidTransform::IDENTITY, &intr());
        assert_eq!(img.get(320, 240), 3.0);
        assert_eq!(img.covered_pixels(), 1);
        assert_eq!(render_depth_image(&[], &RigidTransform::IDENTITY, &intr()).covered_pixels(), 0);
    }
}
