use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Deserialize;

use super::ply::read_ply;
use super::{
    CameraFrame, DatasetError, Detection2D, FrameImage, GnssPacket, ImuPacket, LidarScan, SensorId, SensorPacket,
    Timestamp,
};
use crate::geometry::{CameraIntrinsics, UnitQuaternion, Vec3};

/// A single sensor's record stream.
pub trait SensorStream {
    fn sensor(&self) -> &SensorId;

    /// Timestamp of the next record without consuming it; `None` when exhausted.
    fn peek_timestamp(&self) -> Option<Timestamp>;

    /// Consumes and materializes the next record, reading its payload from disk if any.
    fn next_packet(&mut self) -> Result<Option<SensorPacket>, DatasetError>;

    /// Total number of records in the stream, consumed or not.
    fn record_count(&self) -> usize;
}

/// In-memory stream over ready-made packets; timestamps must be non-decreasing.
#[derive(Debug)]
pub struct MemoryStream {
    sensor: SensorId,
    packets: Vec<SensorPacket>,
    cursor: usize,
}

impl MemoryStream {
    pub fn new(sensor: SensorId, packets: Vec<SensorPacket>) -> Result<Self, DatasetError> {
        check_monotone(&sensor, packets.iter().map(|p| p.timestamp()))?;
        Ok(MemoryStream { sensor, packets, cursor: 0 })
    }
}

impl SensorStream for MemoryStream {
    fn sensor(&self) -> &SensorId {
        &self.sensor
    }
    fn peek_timestamp(&self) -> Option<Timestamp> {
        self.packets.get(self.cursor).map(|p| p.timestamp())
    }
    fn next_packet(&mut self) -> Result<Option<SensorPacket>, DatasetError> {
        let p = self.packets.get(self.cursor).cloned();
        if p.is_some() {
            self.cursor += 1;
        }
        Ok(p)
    }
    fn record_count(&self) -> usize {
        self.packets.len()
    }
}

fn check_monotone(sensor: &SensorId, ts: impl Iterator<Item = Timestamp>) -> Result<(), DatasetError> {
    let mut prev: Option<Timestamp> = None;
    for (i, t) in ts.enumerate() {
        if let Some(p) = prev {
            if t < p {
                return Err(DatasetError::Validation {
                    sensor: sensor.label.clone(),
                    row: i + 1,
                    message: format!("timestamp {} precedes previous {}", t.0, p.0),
                });
            }
        }
        prev = Some(t);
    }
    Ok(())
}

/// Reads a headed CSV into typed rows.
fn read_rows<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, DatasetError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| DatasetError::csv(path, &e))?;
    rdr.deserialize().map(|r| r.map_err(|e| DatasetError::csv(path, &e))).collect()
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct GnssRow {
    timestamp_ns: u64,
    latitude_deg: f64,
    longitude_deg: f64,
    altitude_m: f64,
    azimuth_deg: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ImuRow {
    timestamp_ns: u64,
    ax: f64,
    ay: f64,
    az: f64,
    gx: f64,
    gy: f64,
    gz: f64,
    qw: f64,
    qx: f64,
    qy: f64,
    qz: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct LidarIndexRow {
    timestamp_start_ns: u64,
    timestamp_end_ns: u64,
    filename: String,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CameraIndexRow {
    timestamp_ns: u64,
    filename: String,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct DetectionRow {
    timestamp_ns: u64,
    x_min: f64,
    y_min: f64,
    x_max: f64,
    y_max: f64,
    class_id: u32,
    confidence: f64,
}

pub(crate) fn load_gnss(sensor: SensorId, path: &Path) -> Result<MemoryStream, DatasetError> {
    let rows: Vec<GnssRow> = read_rows(path)?;
    let mut packets = Vec::with_capacity(rows.len());
    for (i, r) in rows.into_iter().enumerate() {
        let bad = |message: String| DatasetError::Validation { sensor: sensor.label.clone(), row: i + 1, message };
        if !(r.latitude_deg.abs() <= 90.0 && r.longitude_deg.abs() <= 180.0 && r.altitude_m.is_finite()) {
            return Err(bad(format!("position ({}, {}, {}) out of range", r.latitude_deg, r.longitude_deg, r.altitude_m)));
        }
        if let Some(a) = r.azimuth_deg {
            if !(0.0..360.0).contains(&a) {
                return Err(bad(format!("azimuth {a} outside [0, 360)")));
            }
        }
        packets.push(SensorPacket::Gnss(
            sensor.clone(),
            GnssPacket {
                timestamp: Timestamp(r.timestamp_ns),
                latitude: r.latitude_deg,
                longitude: r.longitude_deg,
                altitude: r.altitude_m,
                azimuth: r.azimuth_deg,
            },
        ));
    }
    MemoryStream::new(sensor, packets)
}

pub(crate) fn load_imu(sensor: SensorId, path: &Path) -> Result<MemoryStream, DatasetError> {
    let rows: Vec<ImuRow> = read_rows(path)?;
    let mut packets = Vec::with_capacity(rows.len());
    for (i, r) in rows.into_iter().enumerate() {
        let orientation = UnitQuaternion::new(r.qw, r.qx, r.qy, r.qz).map_err(|e| DatasetError::Validation {
            sensor: sensor.label.clone(),
            row: i + 1,
            message: e.to_string(),
        })?;
        packets.push(SensorPacket::Imu(
            sensor.clone(),
            ImuPacket {
                timestamp: Timestamp(r.timestamp_ns),
                linear_acceleration: Vec3::new(r.ax, r.ay, r.az),
                angular_velocity: Vec3::new(r.gx, r.gy, r.gz),
                absolute_orientation: orientation,
            },
        ));
    }
    MemoryStream::new(sensor, packets)
}

struct LidarIndex {
    start: Timestamp,
    end: Timestamp,
    path: PathBuf,
}

/// Scan index read at open; point bodies are read on emission.
pub struct LidarStream {
    sensor: SensorId,
    index: Vec<LidarIndex>,
    cursor: usize,
}

impl LidarStream {
    pub(crate) fn open(sensor: SensorId, dir: &Path) -> Result<Self, DatasetError> {
        let rows: Vec<LidarIndexRow> = read_rows(&dir.join("timestamps.csv"))?;
        let mut index = Vec::with_capacity(rows.len());
        for (i, r) in rows.into_iter().enumerate() {
            if r.timestamp_end_ns <= r.timestamp_start_ns {
                return Err(DatasetError::Validation {
                    sensor: sensor.label.clone(),
                    row: i + 1,
                    message: format!("scan end {} not after start {}", r.timestamp_end_ns, r.timestamp_start_ns),
                });
            }
            index.push(LidarIndex {
                start: Timestamp(r.timestamp_start_ns),
                end: Timestamp(r.timestamp_end_ns),
                path: dir.join("scans").join(&r.filename),
            });
        }
        check_monotone(&sensor, index.iter().map(|r| r.start))?;
        check_monotone(&sensor, index.iter().map(|r| r.end))?;
        Ok(LidarStream { sensor, index, cursor: 0 })
    }
}

impl SensorStream for LidarStream {
    fn sensor(&self) -> &SensorId {
        &self.sensor
    }
    fn peek_timestamp(&self) -> Option<Timestamp> {
        self.index.get(self.cursor).map(|r| r.end)
    }
    fn next_packet(&mut self) -> Result<Option<SensorPacket>, DatasetError> {
        let Some(rec) = self.index.get(self.cursor) else { return Ok(None) };
        self.cursor += 1;
        let points = read_ply(&rec.path).map_err(|e| DatasetError::Payload {
            sensor: self.sensor.label.clone(),
            timestamp: rec.end,
            message: format!("{}: {e}", rec.path.display()),
        })?;
        Ok(Some(SensorPacket::Lidar(LidarScan {
            sensor: self.sensor.clone(),
            start_timestamp: rec.start,
            end_timestamp: rec.end,
            points,
        })))
    }
    fn record_count(&self) -> usize {
        self.index.len()
    }
}

struct CameraIndex {
    timestamp: Timestamp,
    path: PathBuf,
    detections: Vec<Detection2D>,
}

/// Frame index and detections read at open; images are decoded on emission.
pub struct CameraStream {
    sensor: SensorId,
    intrinsics: Option<CameraIntrinsics>,
    index: Vec<CameraIndex>,
    cursor: usize,
}

impl CameraStream {
    pub(crate) fn open(sensor: SensorId, dir: &Path, intrinsics: Option<CameraIntrinsics>) -> Result<Self, DatasetError> {
        let rows: Vec<CameraIndexRow> = read_rows(&dir.join("timestamps.csv"))?;
        let mut index: Vec<CameraIndex> = rows
            .into_iter()
            .map(|r| CameraIndex {
                timestamp: Timestamp(r.timestamp_ns),
                path: dir.join("frames").join(&r.filename),
                detections: Vec::new(),
            })
            .collect();
        check_monotone(&sensor, index.iter().map(|r| r.timestamp))?;

        let det_path = dir.join("detections.csv");
        if det_path.exists() {
            let rows: Vec<DetectionRow> = read_rows(&det_path)?;
            let mut by_ts: BTreeMap<u64, usize> = BTreeMap::new();
            for (i, f) in index.iter().enumerate() {
                by_ts.entry(f.timestamp.0).or_insert(i);
            }
            for (i, r) in rows.into_iter().enumerate() {
                let bad = |message: String| DatasetError::Validation {
                    sensor: format!("{}/detections", sensor.label),
                    row: i + 1,
                    message,
                };
                let det = Detection2D {
                    x_min: r.x_min,
                    y_min: r.y_min,
                    x_max: r.x_max,
                    y_max: r.y_max,
                    class_id: r.class_id,
                    confidence: r.confidence,
                };
                if !det.is_well_formed() {
                    return Err(bad(format!("malformed bounding box {det:?}")));
                }
                if let Some(intr) = &intrinsics {
                    if !det.intersects_image(intr.width(), intr.height()) {
                        return Err(bad("bounding box does not intersect the image".into()));
                    }
                }
                let frame = by_ts
                    .get(&r.timestamp_ns)
                    .ok_or_else(|| bad(format!("no frame with timestamp {}", r.timestamp_ns)))?;
                index[*frame].detections.push(det);
            }
        }
        Ok(CameraStream { sensor, intrinsics, index, cursor: 0 })
    }
}

impl SensorStream for CameraStream {
    fn sensor(&self) -> &SensorId {
        &self.sensor
    }
    fn peek_timestamp(&self) -> Option<Timestamp> {
        self.index.get(self.cursor).map(|r| r.timestamp)
    }
    fn next_packet(&mut self) -> Result<Option<SensorPacket>, DatasetError> {
        let Some(rec) = self.index.get(self.cursor) else { return Ok(None) };
        let sequence = self.cursor as u64;
        self.cursor += 1;
        let payload_err = |message: String| DatasetError::Payload {
            sensor: self.sensor.label.clone(),
            timestamp: rec.timestamp,
            message: format!("{}: {message}", rec.path.display()),
        };
        let img = image::open(&rec.path).map_err(|e| payload_err(e.to_string()))?;
        let (width, height) = (img.width(), img.height());
        if let Some(intr) = &self.intrinsics {
            if (width, height) != (intr.width(), intr.height()) {
                return Err(payload_err(format!(
                    "image is {width}x{height}, calibration expects {}x{}",
                    intr.width(),
                    intr.height()
                )));
            }
        }
        let all_zero = img.as_bytes().iter().all(|b| *b == 0);
        Ok(Some(SensorPacket::Camera(CameraFrame {
            sensor: self.sensor.clone(),
            timestamp: rec.timestamp,
            sequence,
            image_path: rec.path.clone(),
            image: Some(FrameImage { width, height, all_zero }),
            detections: rec.detections.clone(),
        })))
    }
    fn record_count(&self) -> usize {
        self.index.len()
    }
}
