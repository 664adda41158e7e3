use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const SPEC: &str = r#"
seed: 5
duration: 2
trajectory: {type: constant_velocity, velocity: [4, 0, 0]}
lidar: {rings: 8, columns: 180, max_range: 60}
sensors:
  lidar_left:
    extrinsic: {translation: [0.5, 0, 1.6], rpy_deg: [0, 0, 0]}
  camera_rgb_left:
    extrinsic: {translation: [1, 0, 1.4], rpy_deg: [-90, 0, -90]}
    intrinsics: {fx: 300, fy: 300, cx: 160, cy: 120, width: 320, height: 240}
  camera_ir:
    extrinsic: {translation: [1, 0, 1.4], rpy_deg: [-90, 0, -90]}
    intrinsics: {fx: 300, fy: 300, cx: 160, cy: 120, width: 320, height: 240}
scene:
  planes: [{point: [0, 0, -0.3], normal: [0, 0, 1]}]
  boxes: [{min: [15, -1, -0.3], max: [17, 1, 1.2], class_id: 2}]
"#;

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_atlas-fuse")).args(args).output().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Generates the test dataset under `root/data` and returns its config path.
fn generate(root: &Path) -> std::path::PathBuf {
    let spec = root.join("spec.yaml");
    fs::write(&spec, SPEC).unwrap();
    let out = bin(&["gen", "--spec", s(&spec), "--out", s(&root.join("data"))]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    root.join("data/pipeline.yaml")
}

#[test]
fn gen_then_run_succeeds() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = generate(dir.path());
    let out_dir = dir.path().join("result");
    let out = bin(&["run", "--config", s(&cfg), "--output", s(&out_dir), "--snapshot-every", "0.5"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("processed"), "{stdout}");
    for f in ["trajectory.csv", "objects.csv", "failcheck.csv"] {
        assert!(out_dir.join(f).is_file(), "{f}");
    }
    assert!(fs::read_dir(&out_dir).unwrap().any(|e| e.unwrap().file_name().to_string_lossy().ends_with(".ply")));
    assert_eq!(fs::read_dir(out_dir.join("depth")).unwrap().count(), 21);
}

#[test]
fn until_and_disable_limit_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = generate(dir.path());
    let out_dir = dir.path().join("result");
    // scenario time starts at 1 s, so this keeps the first half second
    let out = bin(&["run", "--config", s(&cfg), "--output", s(&out_dir), "--until", "1500000000", "--disable", "depth,ir_transfer", "-v"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(fs::read_dir(out_dir.join("depth")).unwrap().count(), 0);
    let rows = fs::read_to_string(out_dir.join("trajectory.csv")).unwrap();
    let last: u64 = rows.lines().last().unwrap().split(',').next().unwrap().parse().unwrap();
    assert!(last <= 1_500_000_000);
}

#[test]
fn config_problems_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let missing = bin(&["run", "--config", s(&dir.path().join("absent.yaml"))]);
    assert_eq!(missing.status.code(), Some(1));

    let bad = dir.path().join("bad.yaml");
    fs::write(&bad, "dataset: {path: .}\nfusion: {gate: -1}\n").unwrap();
    let out = bin(&["run", "--config", s(&bad)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("gate"));

    let cfg = generate(dir.path());
    assert_eq!(bin(&["run", "--config", s(&cfg), "--disable", "warp_drive"]).status.code(), Some(1));
    assert_eq!(bin(&["run"]).status.code(), Some(1));

    let bad_spec = dir.path().join("bad_spec.yaml");
    fs::write(&bad_spec, "duration: -1\ntrajectory: {type: stationary}\n").unwrap();
    assert_eq!(bin(&["gen", "--spec", s(&bad_spec), "--out", s(&dir.path().join("x"))]).status.code(), Some(1));
}

#[test]
fn data_problems_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.yaml");
    fs::write(&cfg, format!("dataset: {{path: {}}}\noutput: {}\n", s(&dir.path().join("empty")), s(&dir.path().join("o")))).unwrap();
    fs::create_dir(dir.path().join("empty")).unwrap();
    let out = bin(&["run", "--config", s(&cfg)]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));

    let cfg = generate(dir.path());
    fs::write(dir.path().join("data/imu/imu.csv"), "timestamp_ns,oops\n1,2\n").unwrap();
    assert_eq!(bin(&["run", "--config", s(&cfg), "--output", s(&dir.path().join("o2"))]).status.code(), Some(2));
}
