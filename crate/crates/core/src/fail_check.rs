//! Per-sensor plausibility tracking.
//!
//! Every packet is inspected for anomalies (gaps, saturated or non-finite IMU samples,
//! blank or unreadable frames, sparse or malformed LiDAR scans). Each anomaly halves
//! the sensor's reliability score; between anomalies the score recovers toward 1 with
//! an exponential half-life:
//!
//! ```text
//! score(t) = 1 - (1 - score(t0)) * 0.5^((t - t0) / half_life)
//! ```

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{SensorId, SensorKind, SensorPacket, Timestamp};

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct FailCheckConfig {
    /// Nominal packet period per sensor label, milliseconds. Sensors without an entry
    /// are not gap-checked.
    pub expected_period_ms: BTreeMap<String, f64>,
    pub gap_factor: f64,
    pub imu_accel_saturation: f64,
    pub lidar_min_points: usize,
    pub decay_half_life_s: f64,
}

impl Default for FailCheckConfig {
    fn default() -> Self {
        let expected_period_ms = [
            (SensorKind::GnssPose, 100.0),
            (SensorKind::Imu, 10.0),
            (SensorKind::LidarLeft, 100.0),
            (SensorKind::LidarRight, 100.0),
            (SensorKind::CameraRgbLeft, 100.0),
            (SensorKind::CameraRgbRight, 100.0),
            (SensorKind::CameraIr, 100.0),
        ]
        .into_iter()
        .map(|(k, v)| (k.label().to_string(), v))
        .collect();
        FailCheckConfig {
            expected_period_ms,
            gap_factor: 3.0,
            imu_accel_saturation: 150.0,
            lidar_min_points: 1000,
            decay_half_life_s: 10.0,
        }
    }
}

impl FailCheckConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.gap_factor > 0.0) {
            return Err("fail_check.gap_factor must be positive".into());
        }
        if !(self.imu_accel_saturation > 0.0) {
            return Err("fail_check.imu_accel_saturation must be positive".into());
        }
        if self.lidar_min_points == 0 {
            return Err("fail_check.lidar_min_points must be positive".into());
        }
        if !(self.decay_half_life_s > 0.0) {
            return Err("fail_check.decay_half_life_s must be positive".into());
        }
        for (k, v) in &self.expected_period_ms {
            if !(*v > 0.0) {
                return Err(format!("fail_check.expected_period_ms.{k} must be positive"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Anomaly {
    Gap { gap_ns: u64, expected_ns: u64 },
    ImuSaturated { axis: char, value: f64 },
    NonFinite { field: &'static str },
    BlankImage,
    UnreadableImage,
    SparseScan { points: usize, min_points: usize },
    InvalidScanTiming,
}

impl fmt::Display for Anomaly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Anomaly::Gap { gap_ns, expected_ns } => write!(f, "gap of {gap_ns} ns (expected period {expected_ns} ns)"),
            Anomaly::ImuSaturated { axis, value } => write!(f, "acceleration {axis} = {value} saturated"),
            Anomaly::NonFinite { field } => write!(f, "non-finite {field}"),
            Anomaly::BlankImage => f.write_str("all-zero image"),
            Anomaly::UnreadableImage => f.write_str("unreadable image"),
            Anomaly::SparseScan { points, min_points } => write!(f, "scan has {points} points (< {min_points})"),
            Anomaly::InvalidScanTiming => f.write_str("scan end not after start"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReliabilityScore {
    pub value: f64,
    pub last_update: Timestamp,
}

#[derive(Debug, Error, PartialEq)]
pub enum FailCheckError {
    #[error("sensor {0} is not registered with the fail checker")]
    UnknownSensor(String),
}

#[derive(Debug, Clone)]
struct SensorHealth {
    score: f64,
    score_time: Timestamp,
    last_packet: Option<Timestamp>,
}

#[derive(Debug, Clone)]
pub struct FailChecker {
    config: FailCheckConfig,
    sensors: BTreeMap<SensorId, SensorHealth>,
}

impl FailChecker {
    pub fn new(config: FailCheckConfig) -> Self {
        FailChecker { config, sensors: BTreeMap::new() }
    }

    pub fn register(&mut self, sensor: SensorId) {
        self.sensors
            .entry(sensor)
            .or_insert(SensorHealth { score: 1.0, score_time: Timestamp(0), last_packet: None });
    }

    pub fn sensors(&self) -> impl Iterator<Item = &SensorId> {
        self.sensors.keys()
    }

    fn recovered(&self, h: &SensorHealth, now: Timestamp) -> f64 {
        if h.score >= 1.0 {
            return 1.0;
        }
        let dt = now.seconds_since(h.score_time).max(0.0);
        let gap = (1.0 - h.score) * 0.5f64.powf(dt / self.config.decay_half_life_s);
        (1.0 - gap).clamp(0.0, 1.0)
    }

    /// Inspects one packet, updates the sender's score and returns what was found.
    /// Unregistered senders are registered on first sight.
    pub fn ingest(&mut self, packet: &SensorPacket) -> Vec<Anomaly> {
        let sensor = packet.sensor().clone();
        let now = packet.timestamp();
        self.register(sensor.clone());
        let mut anomalies = Vec::new();

        let last = self.sensors[&sensor].last_packet;
        if let (Some(prev), Some(period_ms)) = (last, self.config.expected_period_ms.get(&sensor.label)) {
            let gap_ns = now.0.saturating_sub(prev.0);
            let expected_ns = (period_ms * 1e6).round() as u64;
            if gap_ns as f64 > self.config.gap_factor * expected_ns as f64 {
                anomalies.push(Anomaly::Gap { gap_ns, expected_ns });
            }
        }

        match packet {
            SensorPacket::Imu(_, p) => {
                let a = p.linear_acceleration;
                let w = p.angular_velocity;
                if !a.is_finite() {
                    anomalies.push(Anomaly::NonFinite { field: "linear_acceleration" });
                } else {
                    for (axis, v) in [('x', a.x), ('y', a.y), ('z', a.z)] {
                        if v.abs() >= self.config.imu_accel_saturation {
                            anomalies.push(Anomaly::ImuSaturated { axis, value: v });
                            break;
                        }
                    }
                }
                if !w.is_finite() {
                    anomalies.push(Anomaly::NonFinite { field: "angular_velocity" });
                }
                let q = p.absolute_orientation.to_array();
                if !q.iter().all(|v| v.is_finite()) {
                    anomalies.push(Anomaly::NonFinite { field: "absolute_orientation" });
                }
            }
            SensorPacket::Gnss(_, p) => {
                if !(p.latitude.is_finite() && p.longitude.is_finite() && p.altitude.is_finite()) {
                    anomalies.push(Anomaly::NonFinite { field: "position" });
                }
            }
            SensorPacket::Camera(frame) => match frame.image {
                None => anomalies.push(Anomaly::UnreadableImage),
                Some(img) if img.all_zero => anomalies.push(Anomaly::BlankImage),
                Some(_) => {}
            },
            SensorPacket::Lidar(scan) => {
                if scan.end_timestamp <= scan.start_timestamp {
                    anomalies.push(Anomaly::InvalidScanTiming);
                }
                if scan.points.len() < self.config.lidar_min_points {
                    anomalies.push(Anomaly::SparseScan {
                        points: scan.points.len(),
                        min_points: self.config.lidar_min_points,
                    });
                }
            }
        }

        let h = &self.sensors[&sensor];
        let mut score = self.recovered(h, now);
        let mut score_time = h.score_time;
        if !anomalies.is_empty() {
            score *= 0.5f64.powi(anomalies.len() as i32);
            score_time = now;
        } else if h.score < 1.0 {
            // rebase the recovery curve at `now`; the closed form is memoryless
            score_time = now;
        }
        let h = self.sensors.get_mut(&sensor).unwrap();
        h.score = score;
        h.score_time = score_time;
        h.last_packet = Some(last.map_or(now, |l| l.max(now)));
        anomalies
    }

    /// Score of `sensor` at `now`, including recovery since the last update.
    pub fn reliability(&self, sensor: &SensorId, now: Timestamp) -> Result<ReliabilityScore, FailCheckError> {
        let h = self
            .sensors
            .get(sensor)
            .ok_or_else(|| FailCheckError::UnknownSensor(sensor.label.clone()))?;
        Ok(ReliabilityScore { value: self.recovered(h, now), last_update: h.score_time })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{ImuPacket, LidarPoint, LidarScan};
    use crate::geometry::{UnitQuaternion, Vec3};

    fn imu(t_ms: u64, a: Vec3) -> SensorPacket {
        SensorPacket::Imu(
            SensorId::new(SensorKind::Imu),
            ImuPacket {
                timestamp: Timestamp(t_ms * 1_000_000),
                linear_acceleration: a,
                angular_velocity: Vec3::ZERO,
                absolute_orientation: UnitQuaternion::IDENTITY,
            },
        )
    }

    #[test]
    fn healthy_stream_keeps_full_score() {
        let mut fc = FailChecker::new(FailCheckConfig::default());
        for i in 0..100 {
            assert!(fc.ingest(&imu(i * 10, Vec3::new(0.0, 0.0, 9.81))).is_empty());
        }
        let s = fc.reliability(&SensorId::new(SensorKind::Imu), Timestamp(1_000_000_000)).unwrap();
        assert_eq!(s.value, 1.0);
    }

    #[test]
    fn saturation_halves_score() {
        let mut fc = FailChecker::new(FailCheckConfig::default());
        let a = fc.ingest(&imu(0, Vec3::new(1e6, 0.0, 9.81)));
        assert_eq!(a, vec![Anomaly::ImuSaturated { axis: 'x', value: 1e6 }]);
        let s = fc.reliability(&SensorId::new(SensorKind::Imu), Timestamp(0)).unwrap();
        assert_eq!(s.value, 0.5);
    }

    #[test]
    fn score_recovers_half_the_gap_per_half_life() {
        let mut fc = FailChecker::new(FailCheckConfig::default());
        fc.ingest(&imu(0, Vec3::new(1e6, 0.0, 0.0)));
        let id = SensorId::new(SensorKind::Imu);
        let s = fc.reliability(&id, Timestamp(10_000_000_000)).unwrap();
        assert!((s.value - 0.75).abs() < 1e-12);
        // queries are pure
        let again = fc.reliability(&id, Timestamp(10_000_000_000)).unwrap();
        assert_eq!(s, again);
    }

    #[test]
    fn recovery_is_consistent_across_healthy_packets() {
        let id = SensorId::new(SensorKind::Imu);
        let mut a = FailChecker::new(FailCheckConfig::default());
        a.ingest(&imu(0, Vec3::new(1e6, 0.0, 0.0)));
        let mut b = a.clone();
        for i in 1..=500 {
            b.ingest(&imu(i * 10, Vec3::ZERO));
        }
        let t = Timestamp(5_000_000_000);
        let sa = a.reliability(&id, t).unwrap().value;
        let sb = b.reliability(&id, t).unwrap().value;
        assert!((sa - sb).abs() < 1e-12);
    }

    #[test]
    fn sparse_scan_detected() {
        let mut fc = FailChecker::new(FailCheckConfig::default());
        let scan = SensorPacket::Lidar(LidarScan {
            sensor: SensorId::new(SensorKind::LidarLeft),
            start_timestamp: Timestamp(0),
            end_timestamp: Timestamp(100_000_000),
            points: vec![LidarPoint::new(Vec3::X, 0.0); 10],
        });
        assert_eq!(fc.ingest(&scan), vec![Anomaly::SparseScan { points: 10, min_points: 1000 }]);
    }

    #[test]
    fn gap_detected() {
        let mut fc = FailChecker::new(FailCheckConfig::default());
        assert!(fc.ingest(&imu(0, Vec3::ZERO)).is_empty());
        assert!(fc.ingest(&imu(30, Vec3::ZERO)).is_empty());
        let a = fc.ingest(&imu(61, Vec3::ZERO));
        assert_eq!(a, vec![Anomaly::Gap { gap_ns: 31_000_000, expected_ns: 10_000_000 }]);
    }

    #[test]
    fn non_finite_imu_flagged() {
        let mut fc = FailChecker::new(FailCheckConfig::default());
        let a = fc.ingest(&imu(0, Vec3::new(f64::NAN, 0.0, 0.0)));
        assert_eq!(a, vec![Anomaly::NonFinite { field: "linear_acceleration" }]);
    }

    #[test]
    fn unknown_sensor_is_an_error() {
        let fc = FailChecker::new(FailCheckConfig::default());
        assert_eq!(
            fc.reliability(&SensorId::new(SensorKind::CameraIr), Timestamp(0)),
            Err(FailCheckError::UnknownSensor("camera_ir".into()))
        );
    }
}
