use atlas_fusion::dataset::{ImuPacket, LidarPoint, LidarScan, SensorId, SensorKind, SensorPacket, Timestamp};
use atlas_fusion::fail_check::{Anomaly, FailCheckConfig, FailCheckError, FailChecker};
use atlas_fusion::geometry::{UnitQuaternion, Vec3};
use proptest::prelude::*;

fn imu(t_ms: u64, a: Vec3) -> SensorPacket {
    SensorPacket::Imu(
        SensorId::new(SensorKind::Imu),
        ImuPacket { timestamp: Timestamp(t_ms * 1_000_000), linear_acceleration: a, angular_velocity: Vec3::ZERO, absolute_orientation: UnitQuaternion::IDENTITY },
    )
}

fn scan(t_ms: u64, n: usize) -> SensorPacket {
    SensorPacket::Lidar(LidarScan {
        sensor: SensorId::new(SensorKind::LidarLeft),
        start_timestamp: Timestamp(t_ms * 1_000_000),
        end_timestamp: Timestamp((t_ms + 100) * 1_000_000),
        points: vec![LidarPoint::new(Vec3::X, 1.0); n],
    })
}

#[test]
fn sparse_scan_and_gap_are_flagged() {
    let mut fc = FailChecker::new(FailCheckConfig::default());
    assert_eq!(fc.ingest(&scan(0, 10)), vec![Anomaly::SparseScan { points: 10, min_points: 1000 }]);
    assert!(fc.ingest(&scan(100, 2000)).is_empty());
    // 500 ms after a 100 ms sensor is beyond the 3x gap factor
    assert!(fc.ingest(&scan(600, 2000)).iter().any(|a| matches!(a, Anomaly::Gap { .. })));
}

#[test]
fn unknown_sensor_is_an_error() {
    let fc = FailChecker::new(FailCheckConfig::default());
    let id = SensorId::new(SensorKind::CameraIr);
    assert_eq!(fc.reliability(&id, Timestamp(0)), Err(FailCheckError::UnknownSensor("camera_ir".into())));
}

#[test]
fn half_life_recovery() {
    let mut fc = FailChecker::new(FailCheckConfig { decay_half_life_s: 2.0, ..FailCheckConfig::default() });
    fc.ingest(&imu(0, Vec3::new(0.0, 1e6, 0.0)));
    let id = SensorId::new(SensorKind::Imu);
    assert_eq!(fc.reliability(&id, Timestamp(0)).unwrap().value, 0.5);
    assert!((fc.reliability(&id, Timestamp(2_000_000_000)).unwrap().value - 0.75).abs() < 1e-12);
    assert!((fc.reliability(&id, Timestamp(4_000_000_000)).unwrap().value - 0.875).abs() < 1e-12);
}

proptest! {
    #[test]
    fn score_stays_in_unit_interval(
        events in prop::collection::vec((1u64..60, prop::bool::weighted(0.3)), 1..200),
        probe in 0u64..20_000,
    ) {
        let mut fc = FailChecker::new(FailCheckConfig::default());
        let id = SensorId::new(SensorKind::Imu);
        fc.register(id.clone());
        let mut t = 0;
        let mut prev = 1.0;
        for (dt, bad) in events {
            t += dt;
            let now = Timestamp(t * 1_000_000);
            let a = if bad { Vec3::new(f64::NAN, 0.0, 9.81) } else { Vec3::new(0.0, 0.0, 9.81) };
            let before = fc.reliability(&id, now).unwrap().value;
            let found = fc.ingest(&imu(t, a));
            let s = fc.reliability(&id, now).unwrap().value;
            prop_assert!((0.0..=1.0).contains(&s));
            // every anomaly halves the recovered score
            prop_assert!((s - before * 0.5f64.powi(found.len() as i32)).abs() <= 1e-12);
            prev = s;
        }
        let later = fc.reliability(&id, Timestamp((t + probe) * 1_000_000)).unwrap().value;
        prop_assert!(later >= prev - 1e-12 && later <= 1.0);
    }
}
