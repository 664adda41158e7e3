use std::fmt;
use std::path::PathBuf;

use crate::geometry::{UnitQuaternion, Vec3};

/// Nanoseconds since the recording epoch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Timestamp(pub u64);

impl Timestamp {
    pub const NANOS_PER_SEC: u64 = 1_000_000_000;

    pub fn from_secs_f64(s: f64) -> Self {
        Timestamp((s * Self::NANOS_PER_SEC as f64).round().max(0.0) as u64)
    }

    pub fn as_nanos(self) -> u64 {
        self.0
    }

    pub fn as_secs_f64(self) -> f64 {
        self.0 as f64 / Self::NANOS_PER_SEC as f64
    }

    /// Signed difference `self - earlier` in seconds.
    pub fn seconds_since(self, earlier: Timestamp) -> f64 {
        (self.0 as i128 - earlier.0 as i128) as f64 / Self::NANOS_PER_SEC as f64
    }

    pub fn saturating_sub_secs(self, s: f64) -> Timestamp {
        let d = (s * Self::NANOS_PER_SEC as f64).round() as u64;
        Timestamp(self.0.saturating_sub(d))
    }

    pub fn add_secs(self, s: f64) -> Timestamp {
        Timestamp::from_secs_f64(self.as_secs_f64() + s)
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}ns", self.0)
    }
}

/// Physical sensor slot. Declaration order is the multiplexer tie-break rank.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SensorKind {
    GnssPose,
    Imu,
    LidarLeft,
    LidarRight,
    CameraRgbLeft,
    CameraRgbRight,
    CameraIr,
}

impl SensorKind {
    pub const ALL: [SensorKind; 7] = [
        SensorKind::GnssPose,
        SensorKind::Imu,
        SensorKind::LidarLeft,
        SensorKind::LidarRight,
        SensorKind::CameraRgbLeft,
        SensorKind::CameraRgbRight,
        SensorKind::CameraIr,
    ];

    /// Directory name of the sensor inside a dataset root.
    pub fn label(self) -> &'static str {
        match self {
            SensorKind::GnssPose => "gnss",
            SensorKind::Imu => "imu",
            SensorKind::LidarLeft => "lidar_left",
            SensorKind::LidarRight => "lidar_right",
            SensorKind::CameraRgbLeft => "camera_rgb_left",
            SensorKind::CameraRgbRight => "camera_rgb_right",
            SensorKind::CameraIr => "camera_ir",
        }
    }

    pub fn from_label(label: &str) -> Option<SensorKind> {
        SensorKind::ALL.into_iter().find(|k| k.label() == label)
    }

    pub fn rank(self) -> usize {
        self as usize
    }

    pub fn is_lidar(self) -> bool {
        matches!(self, SensorKind::LidarLeft | SensorKind::LidarRight)
    }

    pub fn is_camera(self) -> bool {
        matches!(self, SensorKind::CameraRgbLeft | SensorKind::CameraRgbRight | SensorKind::CameraIr)
    }

    pub fn is_rgb_camera(self) -> bool {
        matches!(self, SensorKind::CameraRgbLeft | SensorKind::CameraRgbRight)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SensorId {
    pub kind: SensorKind,
    pub label: String,
}

impl SensorId {
    pub fn new(kind: SensorKind) -> Self {
        SensorId { kind, label: kind.label().to_string() }
    }
}

impl fmt::Display for SensorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GnssPacket {
    pub timestamp: Timestamp,
    pub latitude: f64,
    pub longitude: f64,
    pub altitude: f64,
    /// Degrees clockwise from true north, `None` when the receiver has no heading.
    pub azimuth: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImuPacket {
    pub timestamp: Timestamp,
    /// Specific force in the sensor frame (gravity included), m/s².
    pub linear_acceleration: Vec3,
    /// rad/s
    pub angular_velocity: Vec3,
    pub absolute_orientation: UnitQuaternion,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LidarPoint {
    pub position: Vec3,
    pub intensity: f64,
}

impl LidarPoint {
    pub fn new(position: Vec3, intensity: f64) -> Self {
        LidarPoint { position, intensity }
    }
}

/// One sweep of a rotating LiDAR; `points` are in acquisition order.
#[derive(Debug, Clone, PartialEq)]
pub struct LidarScan {
    pub sensor: SensorId,
    pub start_timestamp: Timestamp,
    pub end_timestamp: Timestamp,
    pub points: Vec<LidarPoint>,
}

/// Axis-aligned 2D bounding box produced by an image detector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Detection2D {
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
    pub class_id: u32,
    pub confidence: f64,
}

impl Detection2D {
    pub fn center(&self) -> (f64, f64) {
        (0.5 * (self.x_min + self.x_max), 0.5 * (self.y_min + self.y_max))
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    /// Closed-boundary containment.
    pub fn contains(&self, u: f64, v: f64) -> bool {
        u >= self.x_min && u <= self.x_max && v >= self.y_min && v <= self.y_max
    }

    pub fn is_well_formed(&self) -> bool {
        self.x_min < self.x_max
            && self.y_min < self.y_max
            && (0.0..=1.0).contains(&self.confidence)
            && [self.x_min, self.y_min, self.x_max, self.y_max].iter().all(|v| v.is_finite())
    }

    pub fn intersects_image(&self, width: u32, height: u32) -> bool {
        self.x_max > 0.0 && self.y_max > 0.0 && self.x_min < width as f64 && self.y_min < height as f64
    }
}

/// Decoded facts about a frame image; pixel data is dropped after inspection.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FrameImage {
    pub width: u32,
    pub height: u32,
    pub all_zero: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CameraFrame {
    pub sensor: SensorId,
    pub timestamp: Timestamp,
    /// Zero-based index of the frame within its camera stream.
    pub sequence: u64,
    pub image_path: PathBuf,
    /// `None` when the frame was built without reading its image.
    pub image: Option<FrameImage>,
    pub detections: Vec<Detection2D>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SensorPacket {
    Gnss(SensorId, GnssPacket),
    Imu(SensorId, ImuPacket),
    Lidar(LidarScan),
    Camera(CameraFrame),
}

impl SensorPacket {
    pub fn sensor(&self) -> &SensorId {
        match self {
            SensorPacket::Gnss(id, _) | SensorPacket::Imu(id, _) => id,
            SensorPacket::Lidar(scan) => &scan.sensor,
            SensorPacket::Camera(frame) => &frame.sensor,
        }
    }

    /// Ordering key. LiDAR scans are keyed on their end time, when the sweep is complete.
    pub fn timestamp(&self) -> Timestamp {
        match self {
            SensorPacket::Gnss(_, p) => p.timestamp,
            SensorPacket::Imu(_, p) => p.timestamp,
            SensorPacket::Lidar(scan) => scan.end_timestamp,
            SensorPacket::Camera(frame) => frame.timestamp,
        }
    }
}
