mod common;

use std::fs;

use atlas_fusion::dataset::{DatasetReader, SensorPacket};
use atlas_fusion::geometry::{RigidTransform, Vec3};
use atlas_fusion::scenario::{
    generate_scenario, ground_truth_pose, ground_truth_state, simulate_scan, stream_seed, LidarModel, ScenarioError,
    ScenarioSpec, ScenePlane, Trajectory,
};
use proptest::prelude::*;

fn spec_yaml(extra: &str) -> String {
    format!(
        r#"
seed: 3
duration: 1.5
trajectory: {{type: circle, radius: 15, angular_rate: 0.4}}
noise: {{gnss_sigma: 0.05, imu_accel_sigma: 0.01, imu_gyro_sigma: 0.001, lidar_range_sigma: 0.02}}
lidar: {{rings: 8, columns: 120}}
sensors:
  lidar_left:
    extrinsic: {{translation: [0.5, 0.4, 1.6], rpy_deg: [0, 0, 0]}}
{extra}
scene:
  planes: [{{point: [0, 0, -1.5], normal: [0, 0, 1]}}]
  boxes: [{{min: [8, -1, -1.5], max: [10, 1, 0.5], class_id: 2}}]
"#
    )
}

#[test]
fn regeneration_is_byte_identical() {
    let spec = ScenarioSpec::from_yaml(&spec_yaml("")).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let a = generate_scenario(&spec, &dir.path().join("a")).unwrap();
    let b = generate_scenario(&spec, &dir.path().join("b")).unwrap();
    assert_eq!(a, b);
    assert_eq!(common::tree_digest(&dir.path().join("a")), common::tree_digest(&dir.path().join("b")));
}

#[test]
fn adding_a_sensor_leaves_other_streams_unchanged() {
    let camera = "  camera_rgb_left:\n    extrinsic: {translation: [1, 0, 1.4], rpy_deg: [-90, 0, -90]}\n    intrinsics: {fx: 300, fy: 300, cx: 80, cy: 60, width: 160, height: 120}";
    let dir = tempfile::tempdir().unwrap();
    generate_scenario(&ScenarioSpec::from_yaml(&spec_yaml("")).unwrap(), &dir.path().join("a")).unwrap();
    generate_scenario(&ScenarioSpec::from_yaml(&spec_yaml(camera)).unwrap(), &dir.path().join("b")).unwrap();
    for f in ["gnss/pose.csv", "imu/imu.csv", "lidar_left/timestamps.csv", "lidar_left/scans/000003.ply", "truth.csv"] {
        assert_eq!(fs::read(dir.path().join("a").join(f)).unwrap(), fs::read(dir.path().join("b").join(f)).unwrap(), "{f}");
    }
    assert!(dir.path().join("b/camera_rgb_left").is_dir());
    assert_ne!(stream_seed(3, "gnss"), stream_seed(3, "imu"));
}

#[test]
fn generated_streams_read_back_in_order() {
    let spec = ScenarioSpec::from_yaml(&spec_yaml("")).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let report = generate_scenario(&spec, dir.path()).unwrap();
    let reader = DatasetReader::open(dir.path(), &common::calibrations_for(&spec)).unwrap();
    let mut last = 0;
    let mut n = 0;
    for p in reader {
        let p = p.unwrap();
        assert!(p.timestamp().0 >= last);
        last = p.timestamp().0;
        n += 1;
    }
    assert_eq!(n, report.total());
    assert_eq!(report.record_counts["gnss"], 16);
    assert_eq!(report.record_counts["imu"], 151);
}

#[test]
fn stationary_scans_repeat_exactly() {
    let mut spec = ScenarioSpec::from_yaml(&spec_yaml("")).unwrap();
    spec.trajectory = Trajectory::Stationary;
    spec.noise.lidar_range_sigma = 0.0;
    let dir = tempfile::tempdir().unwrap();
    generate_scenario(&spec, dir.path()).unwrap();
    let reader = DatasetReader::open(dir.path(), &common::calibrations_for(&spec)).unwrap();
    let scans: Vec<_> = reader
        .filter_map(|p| match p.unwrap() {
            SensorPacket::Lidar(s) => Some(s.points),
            _ => None,
        })
        .collect();
    assert!(scans.len() >= 10);
    assert!(!scans[0].is_empty());
    assert!(scans.iter().all(|s| *s == scans[0]));
}

#[test]
fn raw_sweep_smears_a_wall_by_the_distance_driven() {
    let mut spec = ScenarioSpec::new(1.0, Trajectory::ConstantVelocity { velocity: [10.0, 0.0, 0.0] });
    spec.lidar = LidarModel { rings: 1, columns: 360, vertical_fov_deg: [0.0, 0.0], max_range: 100.0, sweep_duration: Some(0.1) };
    spec.scene.planes = vec![ScenePlane { point: [30.0, 0.0, 0.0], normal: [-1.0, 0.0, 0.0] }];
    let scan = simulate_scan(&spec, &RigidTransform::IDENTITY, 0.0, 0.1, None).unwrap();
    let first = scan.points.first().unwrap().position.x;
    let last = scan.points.last().unwrap().position.x;
    assert!(((first - last) - 1.0).abs() <= 0.01, "mismatch {}", first - last);
}

#[test]
fn trajectory_examples() {
    let cv = ScenarioSpec::new(5.0, Trajectory::ConstantVelocity { velocity: [10.0, 0.0, 0.0] });
    assert!(ground_truth_pose(&cv, 2.0).unwrap().translation.distance(Vec3::new(20.0, 0.0, 0.0)) < 1e-12);

    let circle = ScenarioSpec::new(40.0, Trajectory::Circle { radius: 10.0, angular_rate: 0.1 });
    let half_turn = std::f64::consts::PI / 0.1;
    let s = ground_truth_state(&circle, half_turn).unwrap();
    assert!(s.pose.translation.distance(Vec3::new(0.0, 20.0, 0.0)) < 1e-9);
    assert!((s.velocity.norm() - 1.0).abs() < 1e-12);
    assert!((s.pose.rotation.yaw().abs() - std::f64::consts::PI).abs() < 1e-9);

    assert!(matches!(ground_truth_state(&cv, 5.5), Err(ScenarioError::OutOfRange { .. })));
    assert!(matches!(ground_truth_state(&cv, -0.1), Err(ScenarioError::OutOfRange { .. })));
}

#[test]
fn invalid_specs_are_rejected() {
    assert!(matches!(ScenarioSpec::from_yaml("duration: 1\ntrajectory: {type: warp}"), Err(ScenarioError::Parse { .. })));
    assert!(matches!(ScenarioSpec::from_yaml("duration: 1\nbogus: 2\ntrajectory: {type: stationary}"), Err(ScenarioError::Parse { .. })));
    let mut spec = ScenarioSpec::new(1.0, Trajectory::Circle { radius: 0.0, angular_rate: 1.0 });
    assert!(matches!(spec.validate(), Err(ScenarioError::Invalid(_))));
    spec.trajectory = Trajectory::Stationary;
    spec.duration = 0.0;
    assert!(matches!(spec.validate(), Err(ScenarioError::Invalid(_))));
}

proptest! {
    #[test]
    fn circle_velocity_is_the_derivative_of_position(r in 1.0..100.0f64, w in -1.0..1.0f64, t in 0.01..9.99f64) {
        prop_assume!(w.abs() > 1e-3);
        let spec = ScenarioSpec::new(10.0, Trajectory::Circle { radius: r, angular_rate: w });
        let h = 1e-5;
        let a = ground_truth_state(&spec, t - h).unwrap().pose.translation;
        let b = ground_truth_state(&spec, t + h).unwrap().pose.translation;
        let s = ground_truth_state(&spec, t).unwrap();
        prop_assert!(((b - a) / (2.0 * h) - s.velocity).norm() < 1e-5 * (1.0 + r));
        // heading follows the velocity
        let yaw = s.velocity.y.atan2(s.velocity.x);
        let d = (s.pose.rotation.yaw() - yaw + std::f64::consts::PI).rem_euclid(std::f64::consts::TAU) - std::f64::consts::PI;
        prop_assert!(d.abs() < 1e-9);
    }
}
