//! Per-frame map state and the on-disk artifacts derived from it.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use image::{ImageBuffer, Luma};
use thiserror::Error;

use crate::dataset::{Detection2D, SensorId, Timestamp};
use crate::fail_check::Anomaly;
use crate::fusion::{FrustumDetection, FusedObject};
use crate::positioning::LocalPosition;
use crate::reprojection::DepthImage;

/// Latest-value store per category. Writes replace, reads never fail.
#[derive(Debug, Clone, Default)]
pub struct LocalMap {
    frustums: BTreeMap<SensorId, (Timestamp, Vec<FrustumDetection>)>,
    objects: Vec<FusedObject>,
    pose: Option<LocalPosition>,
}

impl LocalMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set_frustums(&mut self, camera: SensorId, at: Timestamp, frustums: Vec<FrustumDetection>) {
        self.frustums.insert(camera, (at, frustums));
    }

    pub fn get_frustums(&self, camera: &SensorId) -> &[FrustumDetection] {
        self.frustums.get(camera).map_or(&[], |(_, f)| f.as_slice())
    }

    pub fn frustums_timestamp(&self, camera: &SensorId) -> Option<Timestamp> {
        self.frustums.get(camera).map(|(t, _)| *t)
    }

    pub fn set_objects(&mut self, objects: Vec<FusedObject>) {
        self.objects = objects;
    }

    pub fn get_objects(&self) -> &[FusedObject] {
        &self.objects
    }

    pub fn set_pose(&mut self, pose: LocalPosition) {
        self.pose = Some(pose);
    }

    pub fn get_pose(&self) -> Option<&LocalPosition> {
        self.pose.as_ref()
    }
}

#[derive(Debug, Error)]
pub enum WriterError {
    #[error("{path}: {source}")]
    Io { path: String, source: io::Error },
    #[error("{path}: {message}")]
    Image { path: String, message: String },
    #[error("{path} line {line}: {message}")]
    Parse { path: String, line: usize, message: String },
}

impl WriterError {
    fn io(path: &Path, source: io::Error) -> Self {
        WriterError::Io { path: path.display().to_string(), source }
    }
}

/// One detection as a YOLO text line: `class cx cy w h`, normalized, six decimals.
pub fn yolo_line(det: &Detection2D, width: u32, height: u32) -> String {
    let (w, h) = (width as f64, height as f64);
    let (cx, cy) = det.center();
    format!("{} {:.6} {:.6} {:.6} {:.6}", det.class_id, cx / w, cy / h, det.width() / w, det.height() / h)
}

pub fn write_yolo_annotations(path: &Path, width: u32, height: u32, detections: &[Detection2D]) -> Result<(), WriterError> {
    let mut text = String::new();
    for d in detections {
        text.push_str(&yolo_line(d, width, height));
        text.push('\n');
    }
    std::fs::write(path, text).map_err(|e| WriterError::io(path, e))
}

/// Normalized YOLO box as read back from disk.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct YoloBox {
    pub class_id: u32,
    pub cx: f64,
    pub cy: f64,
    pub w: f64,
    pub h: f64,
}

impl YoloBox {
    pub fn to_detection(&self, width: u32, height: u32, confidence: f64) -> Detection2D {
        let (iw, ih) = (width as f64, height as f64);
        Detection2D {
            x_min: (self.cx - self.w / 2.0) * iw,
            y_min: (self.cy - self.h / 2.0) * ih,
            x_max: (self.cx + self.w / 2.0) * iw,
            y_max: (self.cy + self.h / 2.0) * ih,
            class_id: self.class_id,
            confidence,
        }
    }
}

pub fn parse_yolo_annotations(text: &str) -> Result<Vec<YoloBox>, String> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(i, line)| {
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != 5 {
                return Err(format!("line {}: expected 5 fields, got {}", i + 1, f.len()));
            }
            let num = |s: &str| s.parse::<f64>().map_err(|e| format!("line {}: {e}", i + 1));
            Ok(YoloBox {
                class_id: f[0].parse().map_err(|e| format!("line {}: {e}", i + 1))?,
                cx: num(f[1])?,
                cy: num(f[2])?,
                w: num(f[3])?,
                h: num(f[4])?,
            })
        })
        .collect()
}

pub fn read_yolo_annotations(path: &Path) -> Result<Vec<YoloBox>, WriterError> {
    let text = std::fs::read_to_string(path).map_err(|e| WriterError::io(path, e))?;
    parse_yolo_annotations(&text).map_err(|message| WriterError::Parse {
        path: path.display().to_string(),
        line: 0,
        message,
    })
}

/// Meters to the stored 16-bit millimeter sample, saturating at 65535.
pub fn depth_to_mm(depth: f64) -> u16 {
    (depth * 1000.0).round().clamp(0.0, u16::MAX as f64) as u16
}

pub fn write_depth_png(path: &Path, img: &DepthImage) -> Result<(), WriterError> {
    let buf: ImageBuffer<Luma<u16>, Vec<u16>> =
        ImageBuffer::from_vec(img.width(), img.height(), img.data().iter().map(|d| depth_to_mm(*d)).collect())
            .expect("buffer size matches image dimensions");
    buf.save_with_format(path, image::ImageFormat::Png).map_err(|e| WriterError::Image {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

/// Raw millimeter samples of a depth PNG, with its dimensions.
pub fn read_depth_png(path: &Path) -> Result<(u32, u32, Vec<u16>), WriterError> {
    let img = image::open(path).map_err(|e| WriterError::Image { path: path.display().to_string(), message: e.to_string() })?;
    let gray = img.into_luma16();
    Ok((gray.width(), gray.height(), gray.into_raw()))
}

/// Buffered CSV-like line writer with a fixed header.
pub struct LineWriter {
    path: String,
    out: BufWriter<File>,
}

impl LineWriter {
    pub fn create(path: &Path, header: &str) -> Result<Self, WriterError> {
        let file = File::create(path).map_err(|e| WriterError::io(path, e))?;
        let mut w = LineWriter { path: path.display().to_string(), out: BufWriter::new(file) };
        w.line(header)?;
        Ok(w)
    }

    pub fn line(&mut self, text: &str) -> Result<(), WriterError> {
        writeln!(self.out, "{text}").map_err(|source| WriterError::Io { path: self.path.clone(), source })
    }

    pub fn finish(mut self) -> Result<(), WriterError> {
        self.out.flush().map_err(|source| WriterError::Io { path: self.path.clone(), source })
    }
}

pub const TRAJECTORY_HEADER: &str = "timestamp_ns,px,py,pz,qw,qx,qy,qz,vx,vy,vz";
pub const OBJECTS_HEADER: &str = "timestamp_ns,object_id,class_id,cx,cy,cz,vx,vy,vz";
pub const FAILCHECK_HEADER: &str = "timestamp_ns,sensor_label,score,anomaly";

pub fn trajectory_row(p: &LocalPosition) -> String {
    let q = p.orientation.to_array();
    format!(
        "{},{:.6},{:.6},{:.6},{:.9},{:.9},{:.9},{:.9},{:.6},{:.6},{:.6}",
        p.timestamp.0,
        p.position.x,
        p.position.y,
        p.position.z,
        q[0],
        q[1],
        q[2],
        q[3],
        p.velocity.x,
        p.velocity.y,
        p.velocity.z
    )
}

pub fn object_row(at: Timestamp, o: &FusedObject) -> String {
    format!(
        "{},{},{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6}",
        at.0, o.id, o.class_id, o.centroid.x, o.centroid.y, o.centroid.z, o.velocity.x, o.velocity.y, o.velocity.z
    )
}

pub fn failcheck_row(at: Timestamp, sensor: &SensorId, score: f64, anomaly: &Anomaly) -> String {
    format!("{},{},{:.6},{}", at.0, sensor.label, score, anomaly.to_string().replace(',', ";"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn det(x0: f64, y0: f64, x1: f64, y1: f64, class_id: u32) -> Detection2D {
        Detection2D { x_min: x0, y_min: y0, x_max: x1, y_max: y1, class_id, confidence: 1.0 }
    }

    #[test]
    fn map_is_last_write_wins() {
        let mut m = LocalMap::new();
        let cam = crate::dataset::SensorId::new(crate::dataset::SensorKind::CameraRgbLeft);
        assert!(m.get_frustums(&cam).is_empty());
        assert!(m.get_objects().is_empty());
        assert!(m.get_pose().is_none());
        m.set_frustums(cam.clone(), Timestamp(1), vec![]);
        assert_eq!(m.frustums_timestamp(&cam), Some(Timestamp(1)));
        m.set_frustums(cam.clone(), Timestamp(2), vec![]);
        assert_eq!(m.frustums_timestamp(&cam), Some(Timestamp(2)));
    }

    #[test]
    fn yolo_lines() {
        assert_eq!(yolo_line(&det(0.0, 0.0, 640.0, 480.0, 2), 640, 480), "2 0.500000 0.500000 1.000000 1.000000");
        assert_eq!(yolo_line(&det(0.0, 0.0, 320.0, 240.0, 0), 640, 480), "0 0.250000 0.250000 0.500000 0.500000");
    }

    #[test]
    fn yolo_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.txt");
        write_yolo_annotations(&p, 640, 480, &[]).unwrap();
        assert_eq!(std::fs::read(&p).unwrap(), b"");
        let d = det(12.3, 45.6, 300.1, 200.2, 7);
        write_yolo_annotations(&p, 640, 480, &[d]).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(text.ends_with('\n') && !text.contains('\r'));
        let b = read_yolo_annotations(&p).unwrap();
        assert_eq!(b[0].class_id, 7);
        assert!((b[0].cx - d.center().0 / 640.0).abs() <= 5e-7);
        assert!((b[0].h - d.height() / 480.0).abs() <= 5e-7);
    }

    #[test]
    fn depth_encoding() {
        assert_eq!(depth_to_mm(10.0), 10000);
        assert_eq!(depth_to_mm(70.0), 65535);
        assert_eq!(depth_to_mm(0.0), 0);
    }

    #[test]
    fn depth_png_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.png");
        let img = DepthImage::from_data(3, 2, vec![0.0, 10.0, 1.234, 70.0, 0.001, 5.5]).unwrap();
        write_depth_png(&p, &img).unwrap();
        let (w, h, raw) = read_depth_png(&p).unwrap();
        assert_eq!((w, h), (3, 2));
        assert_eq!(raw, vec![0, 10000, 1234, 65535, 1, 5500]);
        let blank = dir.path().join("z.png");
        write_depth_png(&blank, &DepthImage::new(4, 4)).unwrap();
        assert!(read_depth_png(&blank).unwrap().2.iter().all(|v| *v == 0));
    }

    #[test]
    fn unwritable_path_is_io_error() {
        let r = write_yolo_annotations(Path::new("/nonexistent/dir/x.txt"), 1, 1, &[]);
        assert!(matches!(r, Err(WriterError::Io { .. })));
    }
}
