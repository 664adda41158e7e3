//! Offline recording access.
//!
//! A dataset root holds one directory per sensor:
//!
//! ```text
//! gnss/pose.csv                  timestamp_ns,latitude_deg,longitude_deg,altitude_m,azimuth_deg
//! imu/imu.csv                    timestamp_ns,ax,ay,az,gx,gy,gz,qw,qx,qy,qz
//! lidar_<label>/timestamps.csv   timestamp_start_ns,timestamp_end_ns,filename
//! lidar_<label>/scans/*.ply
//! camera_<label>/timestamps.csv  timestamp_ns,filename
//! camera_<label>/frames/*.png
//! camera_<label>/detections.csv  timestamp_ns,x_min,y_min,x_max,y_max,class_id,confidence
//! ```
//!
//! Each sensor gets a [`SensorStream`]; [`DatasetReader`] merges them and always hands
//! out the packet of the stream with the smallest pending timestamp.

mod loaders;
pub mod ply;
mod types;
mod writer;

use std::path::{Path, PathBuf};

use thiserror::Error;

pub use loaders::{CameraStream, LidarStream, MemoryStream, SensorStream};
pub use writer::DatasetWriter;
pub use types::{
    CameraFrame, Detection2D, FrameImage, GnssPacket, ImuPacket, LidarPoint, LidarScan, SensorId, SensorKind,
    SensorPacket, Timestamp,
};

use crate::calibration::Calibrations;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("dataset at {root} is incomplete; missing: {}", missing.join(", "))]
    MissingComponents { root: PathBuf, missing: Vec<String> },
    #[error("{path}{}: {message}", line.map(|l| format!(" line {l}")).unwrap_or_default())]
    Csv { path: PathBuf, line: Option<u64>, message: String },
    #[error("sensor {sensor}, row {row}: {message}")]
    Validation { sensor: String, row: usize, message: String },
    #[error("sensor {sensor} at {timestamp}: {message}")]
    Payload { sensor: String, timestamp: Timestamp, message: String },
}

impl DatasetError {
    fn csv(path: &Path, e: &csv::Error) -> Self {
        DatasetError::Csv {
            path: path.to_path_buf(),
            line: e.position().map(|p| p.line()),
            message: e.to_string(),
        }
    }
}

/// Merges per-sensor streams into one globally time-ordered packet sequence.
///
/// Ties on timestamp go to the sensor kind declared first in [`SensorKind`] (GNSS, IMU,
/// LiDARs, cameras).
pub struct DatasetReader {
    streams: Vec<Box<dyn SensorStream>>,
}

impl std::fmt::Debug for DatasetReader {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DatasetReader").field("sensors", &self.sensors()).finish()
    }
}

impl DatasetReader {
    /// Builds a reader over arbitrary streams. Streams are ranked by sensor kind, then
    /// by label.
    pub fn from_streams(mut streams: Vec<Box<dyn SensorStream>>) -> Self {
        streams.sort_by(|a, b| a.sensor().cmp(b.sensor()));
        DatasetReader { streams }
    }

    /// Opens a dataset directory. LiDAR and camera directories need a calibration entry,
    /// and every calibrated sensor needs its directory.
    pub fn open(root: &Path, calibrations: &Calibrations) -> Result<Self, DatasetError> {
        let mut missing = Vec::new();
        if !root.is_dir() {
            return Err(DatasetError::MissingComponents {
                root: root.to_path_buf(),
                missing: vec![format!("dataset directory {}", root.display())],
            });
        }

        let mut streams: Vec<Box<dyn SensorStream>> = Vec::new();
        for kind in SensorKind::ALL {
            let id = SensorId::new(kind);
            let dir = root.join(kind.label());
            let calib = calibrations.get(kind.label());
            if !dir.is_dir() {
                if calib.is_some() {
                    missing.push(format!("{}/ (calibrated sensor)", kind.label()));
                }
                continue;
            }
            match kind {
                SensorKind::GnssPose | SensorKind::Imu => {
                    let file = if kind == SensorKind::GnssPose { "pose.csv" } else { "imu.csv" };
                    let path = dir.join(file);
                    if !path.is_file() {
                        missing.push(format!("{}/{file}", kind.label()));
                        continue;
                    }
                    let s = if kind == SensorKind::GnssPose {
                        loaders::load_gnss(id, &path)?
                    } else {
                        loaders::load_imu(id, &path)?
                    };
                    streams.push(Box::new(s));
                }
                _ => {
                    if !dir.join("timestamps.csv").is_file() {
                        missing.push(format!("{}/timestamps.csv", kind.label()));
                        continue;
                    }
                    let Some(calib) = calib else {
                        missing.push(format!("calibration for {}", kind.label()));
                        continue;
                    };
                    if kind.is_lidar() {
                        streams.push(Box::new(LidarStream::open(id, &dir)?));
                    } else {
                        if calib.intrinsics.is_none() {
                            missing.push(format!("intrinsics for {}", kind.label()));
                            continue;
                        }
                        streams.push(Box::new(CameraStream::open(id, &dir, calib.intrinsics)?));
                    }
                }
            }
        }
        for label in calibrations.keys() {
            if SensorKind::from_label(label).is_none() {
                missing.push(format!("{label}/ (unknown sensor label in calibration)"));
            }
        }
        if streams.is_empty() && missing.is_empty() {
            missing.push(
                "sensor streams (expected any of gnss/pose.csv, imu/imu.csv, lidar_<label>/timestamps.csv, camera_<label>/timestamps.csv)"
                    .into(),
            );
        }
        if !missing.is_empty() {
            return Err(DatasetError::MissingComponents { root: root.to_path_buf(), missing });
        }
        Ok(Self::from_streams(streams))
    }

    pub fn sensors(&self) -> Vec<SensorId> {
        self.streams.iter().map(|s| s.sensor().clone()).collect()
    }

    pub fn active_loaders(&self) -> usize {
        self.streams.len()
    }

    /// `(sensor, total records)` for every stream.
    pub fn record_counts(&self) -> Vec<(SensorId, usize)> {
        self.streams.iter().map(|s| (s.sensor().clone(), s.record_count())).collect()
    }

    /// Smallest pending timestamp over all streams.
    pub fn peek_timestamp(&self) -> Option<Timestamp> {
        self.streams.iter().filter_map(|s| s.peek_timestamp()).min()
    }

    /// Next packet in global order, `Ok(None)` at end of data.
    pub fn next_packet(&mut self) -> Result<Option<SensorPacket>, DatasetError> {
        let mut best: Option<(usize, Timestamp)> = None;
        for (i, s) in self.streams.iter().enumerate() {
            if let Some(t) = s.peek_timestamp() {
                // strict `<` keeps the earlier-ranked stream on ties
                if best.is_none_or(|(_, bt)| t < bt) {
                    best = Some((i, t));
                }
            }
        }
        match best {
            Some((i, _)) => self.streams[i].next_packet(),
            None => Ok(None),
        }
    }
}

impl Iterator for DatasetReader {
    type Item = Result<SensorPacket, DatasetError>;
    fn next(&mut self) -> Option<Self::Item> {
        self.next_packet().transpose()
    }
}

/// Opens the dataset referenced by a pipeline configuration.
pub fn open_dataset(config: &crate::config::PipelineConfig) -> Result<DatasetReader, DatasetError> {
    DatasetReader::open(&config.dataset_path, &config.sensors)
}
