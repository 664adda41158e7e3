#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};

use atlas_fusion::calibration::{camera_to_body_rotation, Calibrations, SensorCalibration};
use atlas_fusion::dataset::{DatasetReader, SensorPacket};
use atlas_fusion::geometry::{wrap_angle, CameraIntrinsics, RigidTransform, Vec3};
use atlas_fusion::positioning::{geodetic_to_local, local_to_geodetic, Anchor, LocalPosition, PoseEstimator, PositioningConfig};
use atlas_fusion::scenario::{ground_truth_state, ScenarioSpec, TruthState};
use sha2::{Digest, Sha256};

pub fn intrinsics() -> CameraIntrinsics {
    CameraIntrinsics::new(600.0, 600.0, 320.0, 240.0, 640, 480).unwrap()
}

/// Camera mounted at `t` in the body frame looking along body +x.
pub fn forward_camera(t: Vec3) -> RigidTransform {
    RigidTransform::new(camera_to_body_rotation(), t)
}

pub fn empty_calibrations() -> Calibrations {
    Calibrations::new()
}

pub fn calibrations_for(spec: &ScenarioSpec) -> Calibrations {
    spec.sensors
        .iter()
        .map(|(label, s)| {
            let ext = s.extrinsic.to_transform().unwrap();
            let cal = match s.intrinsics {
                Some(i) => SensorCalibration::camera(ext, i),
                None => SensorCalibration::lidar(ext),
            };
            (label.clone(), cal)
        })
        .collect()
}

/// One positioning output paired with the ground truth at the same instant, the truth
/// expressed in the estimator's own anchored frame.
pub struct PoseSample {
    pub t: f64,
    pub estimate: LocalPosition,
    pub truth_position: Vec3,
    pub truth: TruthState,
}

/// Feeds the GNSS and IMU streams of a generated dataset through a [`PoseEstimator`].
pub fn replay_positioning(spec: &ScenarioSpec, root: &Path, cfg: PositioningConfig) -> Vec<PoseSample> {
    let scenario_anchor = Anchor::new(spec.anchor.latitude, spec.anchor.longitude, spec.anchor.altitude);
    let reader = DatasetReader::open(root, &empty_calibrations()).unwrap();
    let mut est = PoseEstimator::new(cfg);
    let mut out = Vec::new();
    for packet in reader {
        let pose = match packet.unwrap() {
            SensorPacket::Gnss(_, g) => est.on_gnss(&g).unwrap(),
            SensorPacket::Imu(_, i) => est.on_imu(&i).unwrap(),
            _ => continue,
        };
        let Some(anchor) = est.anchor() else { continue };
        let t = (pose.timestamp.0 - spec.start_time_ns) as f64 * 1e-9;
        let truth = ground_truth_state(spec, t.min(spec.duration)).unwrap();
        let (lat, lon, alt) = local_to_geodetic(&scenario_anchor, truth.pose.translation);
        out.push(PoseSample { t, estimate: pose, truth_position: geodetic_to_local(&anchor, lat, lon, alt), truth });
    }
    out
}

pub fn yaw_error_deg(s: &PoseSample) -> f64 {
    wrap_angle(s.estimate.orientation.yaw() - s.truth.pose.rotation.yaw()).abs().to_degrees()
}

fn collect_files(root: &Path, dir: &Path, out: &mut Vec<PathBuf>) {
    let mut entries: Vec<_> = fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).collect();
    entries.sort();
    for p in entries {
        if p.is_dir() {
            collect_files(root, &p, out);
        } else {
            out.push(p.strip_prefix(root).unwrap().to_path_buf());
        }
    }
}

/// `(relative path, sha256)` of every file below `root`, sorted by path.
pub fn tree_digest(root: &Path) -> Vec<(String, String)> {
    let mut files = Vec::new();
    collect_files(root, root, &mut files);
    files
        .into_iter()
        .map(|rel| {
            let bytes = fs::read(root.join(&rel)).unwrap();
            let hex: String = Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect();
            (rel.to_string_lossy().into_owned(), hex)
        })
        .collect()
}
