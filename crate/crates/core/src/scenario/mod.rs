//! Synthetic recordings with closed-form ground truth.
//!
//! A [`ScenarioSpec`] describes an agent trajectory, a static scene of boxes and planes,
//! sensor rates, calibrations and noise. [`generate_scenario`] writes a dataset in the
//! layout read by [`crate::dataset::DatasetReader`] together with `truth.csv`
//! (agent poses), `truth_objects.csv` (box centroids) and a ready-to-run
//! `pipeline.yaml`.

mod generate;
mod scene;

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use generate::{generate_scenario, GenerationReport};
pub use scene::{Scene, SceneBox, ScenePlane};

use crate::config::SensorSection;
use crate::dataset::{Detection2D, LidarPoint, SensorKind};
use crate::geometry::{CameraIntrinsics, RigidTransform, UnitQuaternion, Vec3, MIN_DEPTH};

/// Gravity used for synthetic specific force, m/s².
pub const GRAVITY: f64 = 9.81;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error("time {t} s outside [0, {duration}] s")]
    OutOfRange { t: f64, duration: f64 },
    #[error("scenario parse error{}: {message}", line.map(|l| format!(" at line {l}")).unwrap_or_default())]
    Parse { line: Option<usize>, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Trajectory {
    Stationary,
    ConstantVelocity { velocity: [f64; 3] },
    /// Starts at the origin heading along +x and turns left for positive rates.
    Circle { radius: f64, angular_rate: f64 },
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct AnchorSpec {
    pub latitude: f64,
    pub longitude: f64,
    pub altitude: f64,
}

impl Default for AnchorSpec {
    fn default() -> Self {
        AnchorSpec { latitude: 49.2, longitude: 16.6, altitude: 300.0 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseSpec {
    /// Per-axis GNSS position noise (1σ), meters.
    pub gnss_sigma: f64,
    pub gnss_azimuth_sigma_deg: f64,
    pub imu_accel_sigma: f64,
    pub imu_gyro_sigma: f64,
    pub lidar_range_sigma: f64,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        NoiseSpec { gnss_sigma: 0.02, gnss_azimuth_sigma_deg: 0.0, imu_accel_sigma: 0.0, imu_gyro_sigma: 0.0, lidar_range_sigma: 0.0 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct LidarModel {
    pub rings: usize,
    /// Horizontal samples per revolution.
    pub columns: usize,
    pub vertical_fov_deg: [f64; 2],
    pub max_range: f64,
    /// Seconds per revolution; defaults to the scan period.
    pub sweep_duration: Option<f64>,
}

impl Default for LidarModel {
    fn default() -> Self {
        LidarModel { rings: 16, columns: 360, vertical_fov_deg: [-15.0, 15.0], max_range: 100.0, sweep_duration: None }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    #[serde(default)]
    pub seed: u64,
    pub duration: f64,
    #[serde(default = "default_start_ns")]
    pub start_time_ns: u64,
    #[serde(default)]
    pub anchor: AnchorSpec,
    pub trajectory: Trajectory,
    /// Hz per sensor label; omitted sensors use 10 Hz (IMU 100 Hz).
    #[serde(default)]
    pub rates: BTreeMap<String, f64>,
    #[serde(default)]
    pub noise: NoiseSpec,
    /// Whether GNSS fixes carry an azimuth.
    #[serde(default = "default_true")]
    pub gnss_azimuth: bool,
    #[serde(default)]
    pub lidar: LidarModel,
    /// LiDARs and cameras to simulate, keyed by label.
    #[serde(default)]
    pub sensors: BTreeMap<String, SensorSection>,
    #[serde(default)]
    pub scene: Scene,
    /// Gray level of the placeholder camera frames.
    #[serde(default = "default_fill")]
    pub camera_fill: u8,
}

fn default_start_ns() -> u64 {
    1_000_000_000
}

fn default_true() -> bool {
    true
}

fn default_fill() -> u8 {
    128
}

/// Kinematic ground truth at one instant, local frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruthState {
    /// Body to local.
    pub pose: RigidTransform,
    pub velocity: Vec3,
    pub acceleration: Vec3,
    /// Body-frame angular rate, rad/s.
    pub angular_rate: Vec3,
}

/// Sensor-frame points of one sweep with the scenario time (seconds) of each point.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedScan {
    pub points: Vec<LidarPoint>,
    pub times: Vec<f64>,
}

impl ScenarioSpec {
    pub fn new(duration: f64, trajectory: Trajectory) -> Self {
        ScenarioSpec {
            seed: 0,
            duration,
            start_time_ns: default_start_ns(),
            anchor: AnchorSpec::default(),
            trajectory,
            rates: BTreeMap::new(),
            noise: NoiseSpec::default(),
            gnss_azimuth: true,
            lidar: LidarModel::default(),
            sensors: BTreeMap::new(),
            scene: Scene::default(),
            camera_fill: default_fill(),
        }
    }

    pub fn from_yaml(text: &str) -> Result<Self, ScenarioError> {
        let spec: ScenarioSpec = serde_yaml::from_str(text)
            .map_err(|e| ScenarioError::Parse { line: e.location().map(|l| l.line()), message: e.to_string() })?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self, ScenarioError> {
        ScenarioSpec::from_yaml(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let bad = |m: String| Err(ScenarioError::Invalid(m));
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return bad(format!("duration must be positive, got {}", self.duration));
        }
        for (label, r) in &self.rates {
            if SensorKind::from_label(label).is_none() {
                return bad(format!("rates: unknown sensor `{label}`"));
            }
            if !(*r > 0.0 && r.is_finite()) {
                return bad(format!("rates.{label} must be positive"));
            }
        }
        for (label, s) in &self.sensors {
            let kind = SensorKind::from_label(label).ok_or_else(|| ScenarioError::Invalid(format!("sensors: unknown sensor `{label}`")))?;
            if !(kind.is_lidar() || kind.is_camera()) {
                return bad(format!("sensors.{label}: only LiDARs and cameras are configured here"));
            }
            if kind.is_camera() && s.intrinsics.is_none() {
                return bad(format!("sensors.{label}: cameras need intrinsics"));
            }
            s.extrinsic.to_transform().map_err(|m| ScenarioError::Invalid(format!("sensors.{label}.extrinsic: {m}")))?;
        }
        match self.trajectory {
            Trajectory::Circle { radius, angular_rate } if !(radius > 0.0 && angular_rate != 0.0 && angular_rate.is_finite()) => {
                return bad("circle needs radius > 0 and a non-zero angular_rate".into());
            }
            Trajectory::ConstantVelocity { velocity } if !velocity.iter().all(|v| v.is_finite()) => {
                return bad("velocity must be finite".into());
            }
            _ => {}
        }
        let l = &self.lidar;
        if l.rings == 0 || l.columns == 0 || !(l.max_range > 0.0) || l.vertical_fov_deg[0] > l.vertical_fov_deg[1] {
            return bad("lidar model needs rings, columns, max_range > 0 and an ordered vertical fov".into());
        }
        if let Some(s) = l.sweep_duration {
            if !(s > 0.0) {
                return bad("lidar.sweep_duration must be positive".into());
            }
        }
        for (i, p) in self.scene.planes.iter().enumerate() {
            if Vec3::from_array(p.normal).normalized().is_none() {
                return bad(format!("scene.planes[{i}] has a zero normal"));
            }
        }
        for (i, b) in self.scene.boxes.iter().enumerate() {
            if (0..3).any(|k| !(b.min[k] < b.max[k])) {
                return bad(format!("scene.boxes[{i}] needs min < max on every axis"));
            }
        }
        Ok(())
    }

    pub fn rate(&self, kind: SensorKind) -> f64 {
        self.rates.get(kind.label()).copied().unwrap_or(if kind == SensorKind::Imu { 100.0 } else { 10.0 })
    }

    pub fn sweep_duration(&self, kind: SensorKind) -> f64 {
        self.lidar.sweep_duration.unwrap_or(1.0 / self.rate(kind))
    }

    /// Scenario seconds of every sample of a sensor running at `rate` Hz.
    pub fn sample_times(&self, rate: f64) -> Vec<f64> {
        (0..)
            .map(|k| k as f64 / rate)
            .take_while(|t| *t <= self.duration + 1e-9)
            .map(|t| t.min(self.duration))
            .collect()
    }

    pub fn timestamp_ns(&self, t: f64) -> u64 {
        self.start_time_ns + (t * 1e9).round() as u64
    }

    pub fn extrinsic(&self, label: &str) -> Option<RigidTransform> {
        self.sensors.get(label).and_then(|s| s.extrinsic.to_transform().ok())
    }

    /// Deterministic generator for one stream: independent of which other streams exist.
    pub fn stream_rng(&self, label: &str) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(stream_seed(self.seed, label))
    }
}

/// 64-bit FNV-1a over the master seed bytes followed by the stream label.
pub fn stream_seed(master: u64, label: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in master.to_le_bytes().iter().chain(label.as_bytes()) {
        h ^= *b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

pub fn ground_truth_state(spec: &ScenarioSpec, t: f64) -> Result<TruthState, ScenarioError> {
    if !(t >= 0.0 && t <= spec.duration) {
        return Err(ScenarioError::OutOfRange { t, duration: spec.duration });
    }
    Ok(match spec.trajectory {
        Trajectory::Stationary => TruthState {
            pose: RigidTransform::IDENTITY,
            velocity: Vec3::ZERO,
            acceleration: Vec3::ZERO,
            angular_rate: Vec3::ZERO,
        },
        Trajectory::ConstantVelocity { velocity } => {
            let v = Vec3::from_array(velocity);
            let yaw = if v.x.hypot(v.y) > 0.0 { v.y.atan2(v.x) } else { 0.0 };
            TruthState {
                pose: RigidTransform::new(UnitQuaternion::from_yaw(yaw), v * t),
                velocity: v,
                acceleration: Vec3::ZERO,
                angular_rate: Vec3::ZERO,
            }
        }
        Trajectory::Circle { radius: r, angular_rate: w } => {
            let s = w.signum();
            let phi = w.abs() * t;
            let (sp, cp) = phi.sin_cos();
            let speed = r * w.abs();
            TruthState {
                pose: RigidTransform::new(UnitQuaternion::from_yaw(w * t), Vec3::new(r * sp, s * r * (1.0 - cp), 0.0)),
                velocity: Vec3::new(speed * cp, s * speed * sp, 0.0),
                acceleration: Vec3::new(-r * w * w * sp, s * r * w * w * cp, 0.0),
                angular_rate: Vec3::new(0.0, 0.0, w),
            }
        }
    })
}

/// Body-to-local pose at scenario time `t` (seconds from start).
pub fn ground_truth_pose(spec: &ScenarioSpec, t: f64) -> Result<RigidTransform, ScenarioError> {
    Ok(ground_truth_state(spec, t)?.pose)
}

fn ring_elevations(model: &LidarModel) -> Vec<f64> {
    let [lo, hi] = model.vertical_fov_deg.map(f64::to_radians);
    if model.rings == 1 {
        return vec![0.5 * (lo + hi)];
    }
    (0..model.rings).map(|i| lo + (hi - lo) * i as f64 / (model.rings - 1) as f64).collect()
}

/// Ray-casts one sweep from the continuously moving sensor.
///
/// Column `j` of `J` fires at `start + (j + 0.5)/J · sweep` with azimuth
/// `-2π (j + 0.5)/J` in the sensor frame (clockwise seen from above, starting straight
/// ahead). Within a column the rings fire bottom to top. Rays without a hit produce no
/// point. When `rng` is given, Gaussian range noise of `noise.lidar_range_sigma` is added.
pub fn simulate_scan(
    spec: &ScenarioSpec,
    extrinsic: &RigidTransform,
    start: f64,
    sweep: f64,
    mut rng: Option<&mut ChaCha8Rng>,
) -> Result<SimulatedScan, ScenarioError> {
    let model = &spec.lidar;
    let elev = ring_elevations(model);
    let cols = model.columns;
    let noise = Normal::new(0.0, spec.noise.lidar_range_sigma.max(0.0)).map_err(|e| ScenarioError::Invalid(e.to_string()))?;
    let mut out = SimulatedScan { points: Vec::new(), times: Vec::new() };
    for j in 0..cols {
        let frac = (j as f64 + 0.5) / cols as f64;
        let t = start + frac * sweep;
        let sensor_to_local = ground_truth_pose(spec, t)?.then_after(extrinsic);
        let az = -2.0 * PI * frac;
        for e in &elev {
            let dir_s = Vec3::new(e.cos() * az.cos(), e.cos() * az.sin(), e.sin());
            let dir_l = sensor_to_local.apply_vector(dir_s);
            let Some(mut range) = spec.scene.cast(sensor_to_local.translation, dir_l, model.max_range) else { continue };
            if let Some(r) = rng.as_deref_mut() {
                if spec.noise.lidar_range_sigma > 0.0 {
                    range += noise.sample(r);
                }
            }
            out.points.push(LidarPoint::new(dir_s * range, 1.0));
            out.times.push(t);
        }
    }
    Ok(out)
}

/// Ground-truth detections: projected hull of every box fully in front of the camera,
/// clipped to the image. `camera_to_local` maps camera-frame points to the local frame.
pub fn project_boxes(scene: &Scene, camera_to_local: &RigidTransform, intr: &CameraIntrinsics) -> Vec<Detection2D> {
    let local_to_cam = camera_to_local.inverse();
    let (w, h) = (intr.width() as f64, intr.height() as f64);
    scene
        .boxes
        .iter()
        .filter_map(|b| {
            let mut hull = (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
            for c in b.corners() {
                let p = local_to_cam.apply(c);
                if p.z <= MIN_DEPTH {
                    return None;
                }
                let (u, v) = intr.project_unbounded(p)?;
                hull = (hull.0.min(u), hull.1.min(v), hull.2.max(u), hull.3.max(v));
            }
            let det = Detection2D {
                x_min: hull.0.clamp(0.0, w),
                y_min: hull.1.clamp(0.0, h),
                x_max: hull.2.clamp(0.0, w),
                y_max: hull.3.clamp(0.0, h),
                class_id: b.class_id,
                confidence: 1.0,
            };
            (det.x_min < det.x_max && det.y_min < det.y_max).then_some(det)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: Vec3, b: Vec3) -> bool {
        (a - b).norm() < 1e-9
    }

    #[test]
    fn stationary_is_identity() {
        let s = ScenarioSpec::new(5.0, Trajectory::Stationary);
        assert_eq!(ground_truth_pose(&s, 3.7).unwrap(), RigidTransform::IDENTITY);
    }

    #[test]
    fn constant_velocity_translation() {
        let s = ScenarioSpec::new(5.0, Trajectory::ConstantVelocity { velocity: [10.0, 0.0, 0.0] });
        let p = ground_truth_pose(&s, 2.0).unwrap();
        assert!(close(p.translation, Vec3::new(20.0, 0.0, 0.0)));
        assert!(p.rotation.angle_to(&UnitQuaternion::IDENTITY) < 1e-12);
    }

    #[test]
    fn circle_antipode_after_half_turn() {
        let w = 0.1;
        let s = ScenarioSpec::new(100.0, Trajectory::Circle { radius: 10.0, angular_rate: w });
        let p = ground_truth_pose(&s, PI / w).unwrap();
        assert!(close(p.translation, Vec3::new(0.0, 20.0, 0.0)));
        assert!((p.rotation.yaw().abs() - PI).abs() < 1e-9);
        // a quarter turn at t = π/(2ω)
        let q = ground_truth_pose(&s, PI / (2.0 * w)).unwrap();
        assert!(close(q.translation, Vec3::new(10.0, 10.0, 0.0)));
    }

    #[test]
    fn circle_kinematics_are_consistent() {
        for w in [0.3, -0.3] {
            let s = ScenarioSpec::new(30.0, Trajectory::Circle { radius: 25.0, angular_rate: w });
            let h = 1e-5;
            for t in [1.0, 7.5, 20.0] {
                let a = ground_truth_state(&s, t).unwrap();
                let b = ground_truth_state(&s, t + h).unwrap();
                let fd = (b.pose.translation - a.pose.translation) / h;
                assert!((fd - a.velocity).norm() < 1e-3);
                let fa = (b.velocity - a.velocity) / h;
                assert!((fa - a.acceleration).norm() < 1e-3);
                let heading = a.velocity.y.atan2(a.velocity.x);
                assert!(crate::geometry::wrap_angle(heading - a.pose.rotation.yaw()).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn out_of_range_time_rejected() {
        let s = ScenarioSpec::new(5.0, Trajectory::Stationary);
        assert!(matches!(ground_truth_pose(&s, 5.1), Err(ScenarioError::OutOfRange { .. })));
        assert!(ground_truth_pose(&s, -0.1).is_err());
    }

    #[test]
    fn stream_seeds_differ_by_label() {
        assert_ne!(stream_seed(1, "gnss"), stream_seed(1, "imu"));
        assert_ne!(stream_seed(1, "gnss"), stream_seed(2, "gnss"));
        assert_eq!(stream_seed(7, "imu"), stream_seed(7, "imu"));
    }

    #[test]
    fn moving_scan_sees_wall_approach() {
        let mut s = ScenarioSpec::new(1.0, Trajectory::ConstantVelocity { velocity: [10.0, 0.0, 0.0] });
        s.lidar = LidarModel { rings: 1, columns: 360, vertical_fov_deg: [0.0, 0.0], max_range: 200.0, sweep_duration: None };
        s.scene.planes.push(ScenePlane { point: [30.0, 0.0, 0.0], normal: [-1.0, 0.0, 0.0] });
        let scan = simulate_scan(&s, &RigidTransform::IDENTITY, 0.0, 0.1, None).unwrap();
        let first = scan.points.first().unwrap().position;
        let last = scan.points.last().unwrap().position;
        assert!((first.x - last.x - 10.0 * 0.1 * 359.0 / 360.0).abs() < 1e-9);
        assert_eq!(scan.points.len(), scan.times.len());
        assert!(scan.times.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn yaml_spec_parses_and_rejects_typos() {
        let text = "duration: 2\ntrajectory: {type: circle, radius: 10, angular_rate: 0.1}\nscene:\n  boxes:\n    - {min: [9, -1, -1], max: [11, 1, 1], class_id: 2}\n";
        let s = ScenarioSpec::from_yaml(text).unwrap();
        assert_eq!(s.scene.boxes[0].class_id, 2);
        assert_eq!(s.rate(SensorKind::Imu), 100.0);
        assert!(ScenarioSpec::from_yaml(&format!("{text}sead: 3\n")).is_err());
        assert!(ScenarioSpec::from_yaml("duration: 0\ntrajectory: {type: stationary}\n").is_err());
    }

    #[test]
    fn box_projection_visible_and_hidden() {
        let intr = CameraIntrinsics::new(500.0, 500.0, 320.0, 240.0, 640, 480).unwrap();
        let scene = Scene {
            boxes: vec![
                SceneBox { min: [-1.0, -1.0, 9.0], max: [1.0, 1.0, 11.0], class_id: 3 },
                SceneBox { min: [-1.0, -1.0, -11.0], max: [1.0, 1.0, -9.0], class_id: 4 },
            ],
            planes: vec![],
        };
        let d = project_boxes(&scene, &RigidTransform::IDENTITY, &intr);
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].class_id, 3);
        assert!((d[0].x_min - (320.0 - 500.0 / 9.0)).abs() < 1e-9);
    }
}
