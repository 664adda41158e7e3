use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand_distr::{Distribution, Normal};

use super::{ground_truth_state, project_boxes, simulate_scan, ScenarioError, ScenarioSpec, GRAVITY};
use crate::config::{ConfigFile, DatasetSection};
use crate::dataset::{DatasetWriter, GnssPacket, ImuPacket, SensorKind, Timestamp};
use crate::fail_check::FailCheckConfig;
use crate::geometry::Vec3;
use crate::positioning::{local_to_geodetic, yaw_to_heading, Anchor, PositioningConfig};

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GenerationReport {
    /// Records written per sensor label.
    pub record_counts: BTreeMap<String, usize>,
}

impl GenerationReport {
    pub fn total(&self) -> usize {
        self.record_counts.values().sum()
    }
}

fn normal(sigma: f64) -> Result<Normal<f64>, ScenarioError> {
    Normal::new(0.0, sigma.max(0.0)).map_err(|e| ScenarioError::Invalid(e.to_string()))
}

fn noisy_vec(n: &Normal<f64>, sigma: f64, rng: &mut rand_chacha::ChaCha8Rng) -> Vec3 {
    if sigma > 0.0 {
        Vec3::new(n.sample(rng), n.sample(rng), n.sample(rng))
    } else {
        Vec3::ZERO
    }
}

/// Writes the full synthetic dataset for `spec` below `out_root`.
pub fn generate_scenario(spec: &ScenarioSpec, out_root: &Path) -> Result<GenerationReport, ScenarioError> {
    spec.validate()?;
    let mut writer = DatasetWriter::create(out_root)?;
    let mut report = GenerationReport::default();
    let anchor = Anchor::new(spec.anchor.latitude, spec.anchor.longitude, spec.anchor.altitude);
    let ts = |t: f64| Timestamp(spec.timestamp_ns(t));

    let gnss_label = SensorKind::GnssPose.label();
    let mut rng = spec.stream_rng(gnss_label);
    let pos_noise = normal(spec.noise.gnss_sigma)?;
    let az_noise = normal(spec.noise.gnss_azimuth_sigma_deg)?;
    let gnss_times = spec.sample_times(spec.rate(SensorKind::GnssPose));
    for &t in &gnss_times {
        let s = ground_truth_state(spec, t)?;
        let p = s.pose.translation + noisy_vec(&pos_noise, spec.noise.gnss_sigma, &mut rng);
        let (latitude, longitude, altitude) = local_to_geodetic(&anchor, p);
        let azimuth = spec.gnss_azimuth.then(|| {
            let mut h = yaw_to_heading(s.pose.rotation.yaw()).to_degrees();
            if spec.noise.gnss_azimuth_sigma_deg > 0.0 {
                h += az_noise.sample(&mut rng);
            }
            let h = h.rem_euclid(360.0);
            if h >= 360.0 { 0.0 } else { h }
        });
        writer.write_gnss(&GnssPacket { timestamp: ts(t), latitude, longitude, altitude, azimuth })?;
    }
    report.record_counts.insert(gnss_label.into(), gnss_times.len());

    let imu_label = SensorKind::Imu.label();
    let mut rng = spec.stream_rng(imu_label);
    let acc_noise = normal(spec.noise.imu_accel_sigma)?;
    let gyro_noise = normal(spec.noise.imu_gyro_sigma)?;
    let imu_times = spec.sample_times(spec.rate(SensorKind::Imu));
    let mut truth = fs::File::create(out_root.join("truth.csv")).map(std::io::BufWriter::new)?;
    writeln!(truth, "timestamp_ns,px,py,pz,qw,qx,qy,qz,vx,vy,vz")?;
    for &t in &imu_times {
        let s = ground_truth_state(spec, t)?;
        let q = s.pose.rotation;
        let specific_force = q.inverse().rotate(s.acceleration + Vec3::new(0.0, 0.0, GRAVITY));
        writer.write_imu(&ImuPacket {
            timestamp: ts(t),
            linear_acceleration: specific_force + noisy_vec(&acc_noise, spec.noise.imu_accel_sigma, &mut rng),
            angular_velocity: s.angular_rate + noisy_vec(&gyro_noise, spec.noise.imu_gyro_sigma, &mut rng),
            absolute_orientation: q,
        })?;
        let [qw, qx, qy, qz] = q.to_array();
        let (p, v) = (s.pose.translation, s.velocity);
        writeln!(truth, "{},{},{},{},{},{},{},{},{},{},{}", ts(t).0, p.x, p.y, p.z, qw, qx, qy, qz, v.x, v.y, v.z)?;
    }
    truth.flush()?;
    report.record_counts.insert(imu_label.into(), imu_times.len());

    for (label, sensor) in &spec.sensors {
        let kind = SensorKind::from_label(label).expect("validated label");
        let extrinsic = sensor.extrinsic.to_transform().map_err(ScenarioError::Invalid)?;
        let rate = spec.rate(kind);
        let mut count = 0;
        if kind.is_lidar() {
            writer.ensure_lidar(kind)?;
            let mut rng = spec.stream_rng(label);
            let sweep = spec.sweep_duration(kind);
            for start in spec.sample_times(rate) {
                if start + sweep > spec.duration + 1e-9 {
                    break;
                }
                let scan = simulate_scan(spec, &extrinsic, start, sweep, Some(&mut rng))?;
                writer.write_lidar_scan(kind, ts(start), ts(start + sweep), &scan.points)?;
                count += 1;
            }
        } else {
            writer.ensure_camera(kind)?;
            let intr = sensor.intrinsics.expect("validated camera intrinsics");
            for t in spec.sample_times(rate) {
                let cam_to_local = ground_truth_state(spec, t)?.pose.then_after(&extrinsic);
                let dets = project_boxes(&spec.scene, &cam_to_local, &intr);
                writer.write_camera_frame(kind, ts(t), intr.width(), intr.height(), spec.camera_fill, &dets)?;
                count += 1;
            }
        }
        report.record_counts.insert(label.clone(), count);
    }
    writer.finish()?;

    let mut objects = fs::File::create(out_root.join("truth_objects.csv")).map(std::io::BufWriter::new)?;
    writeln!(objects, "object_index,class_id,cx,cy,cz")?;
    for (i, b) in spec.scene.boxes.iter().enumerate() {
        let c = b.centroid();
        writeln!(objects, "{i},{},{},{},{}", b.class_id, c.x, c.y, c.z)?;
    }
    objects.flush()?;

    fs::write(out_root.join("pipeline.yaml"), suggested_config(spec))?;
    log::info!("generated {} records under {}", report.total(), out_root.display());
    Ok(report)
}

/// Pipeline configuration matching the generated sensors, rates and noise.
pub fn suggested_config(spec: &ScenarioSpec) -> String {
    let mut fail_check = FailCheckConfig::default();
    fail_check.expected_period_ms.clear();
    let mut labels = vec![SensorKind::GnssPose.label().to_string(), SensorKind::Imu.label().to_string()];
    labels.extend(spec.sensors.keys().cloned());
    for l in labels {
        let kind = SensorKind::from_label(&l).expect("validated label");
        fail_check.expected_period_ms.insert(l, 1000.0 / spec.rate(kind));
    }
    fail_check.lidar_min_points = (spec.lidar.rings * spec.lidar.columns / 20).max(1);
    let positioning = PositioningConfig { gnss_sigma: spec.noise.gnss_sigma, ..PositioningConfig::default() };
    let file = ConfigFile {
        dataset: DatasetSection { path: Some(PathBuf::from(".")) },
        output: Some(PathBuf::from("out")),
        sensors: spec.sensors.clone(),
        positioning,
        fail_check,
        ..ConfigFile::default()
    };
    serde_yaml::to_string(&file).expect("config serializes")
}
