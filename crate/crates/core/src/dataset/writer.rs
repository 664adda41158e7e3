//! Writes recordings in the on-disk layout read by [`super::DatasetReader`].

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use image::{GrayImage, Luma, Rgb, RgbImage};

use super::ply::write_ply;
use super::{Detection2D, GnssPacket, ImuPacket, LidarPoint, SensorKind, Timestamp};

/// Incrementally writes one dataset root. Files are created on first use of each sensor.
pub struct DatasetWriter {
    root: PathBuf,
    gnss: Option<BufWriter<File>>,
    imu: Option<BufWriter<File>>,
    lidar: Vec<(SensorKind, BufWriter<File>, usize)>,
    cameras: Vec<CameraSink>,
}

struct CameraSink {
    kind: SensorKind,
    index: BufWriter<File>,
    detections: BufWriter<File>,
    frames: usize,
    cached_png: Option<(u32, u32, u8, Vec<u8>)>,
}

fn create_with_header(path: &Path, header: &str) -> io::Result<BufWriter<File>> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{header}")?;
    Ok(w)
}

impl DatasetWriter {
    pub fn create(root: &Path) -> io::Result<Self> {
        fs::create_dir_all(root)?;
        Ok(DatasetWriter { root: root.to_path_buf(), gnss: None, imu: None, lidar: Vec::new(), cameras: Vec::new() })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Creates the GNSS file even when no fix is ever written.
    pub fn ensure_gnss(&mut self) -> io::Result<()> {
        if self.gnss.is_none() {
            self.gnss = Some(create_with_header(
                &self.root.join("gnss/pose.csv"),
                "timestamp_ns,latitude_deg,longitude_deg,altitude_m,azimuth_deg",
            )?);
        }
        Ok(())
    }

    pub fn ensure_imu(&mut self) -> io::Result<()> {
        if self.imu.is_none() {
            self.imu = Some(create_with_header(
                &self.root.join("imu/imu.csv"),
                "timestamp_ns,ax,ay,az,gx,gy,gz,qw,qx,qy,qz",
            )?);
        }
        Ok(())
    }

    pub fn write_gnss(&mut self, p: &GnssPacket) -> io::Result<()> {
        self.ensure_gnss()?;
        let w = self.gnss.as_mut().unwrap();
        let az = p.azimuth.map(|a| format!("{a}")).unwrap_or_default();
        writeln!(w, "{},{},{},{},{}", p.timestamp.0, p.latitude, p.longitude, p.altitude, az)
    }

    pub fn write_imu(&mut self, p: &ImuPacket) -> io::Result<()> {
        self.ensure_imu()?;
        let w = self.imu.as_mut().unwrap();
        let (a, g, q) = (p.linear_acceleration, p.angular_velocity, p.absolute_orientation);
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{},{}",
            p.timestamp.0,
            a.x,
            a.y,
            a.z,
            g.x,
            g.y,
            g.z,
            q.w(),
            q.x(),
            q.y(),
            q.z()
        )
    }

    fn lidar_sink(&mut self, kind: SensorKind) -> io::Result<usize> {
        if let Some(i) = self.lidar.iter().position(|(k, _, _)| *k == kind) {
            return Ok(i);
        }
        let dir = self.root.join(kind.label());
        fs::create_dir_all(dir.join("scans"))?;
        let w = create_with_header(&dir.join("timestamps.csv"), "timestamp_start_ns,timestamp_end_ns,filename")?;
        self.lidar.push((kind, w, 0));
        Ok(self.lidar.len() - 1)
    }

    /// Creates the LiDAR directory and index even when no scan is ever written.
    pub fn ensure_lidar(&mut self, kind: SensorKind) -> io::Result<()> {
        self.lidar_sink(kind).map(|_| ())
    }

    pub fn write_lidar_scan(
        &mut self,
        kind: SensorKind,
        start: Timestamp,
        end: Timestamp,
        points: &[LidarPoint],
    ) -> io::Result<()> {
        let i = self.lidar_sink(kind)?;
        let name = format!("{:06}.ply", self.lidar[i].2);
        let path = self.root.join(kind.label()).join("scans").join(&name);
        write_ply(&path, points).map_err(|e| io::Error::other(e.to_string()))?;
        let (_, w, n) = &mut self.lidar[i];
        *n += 1;
        writeln!(w, "{},{},{}", start.0, end.0, name)
    }

    fn camera_sink(&mut self, kind: SensorKind) -> io::Result<usize> {
        if let Some(i) = self.cameras.iter().position(|c| c.kind == kind) {
            return Ok(i);
        }
        let dir = self.root.join(kind.label());
        fs::create_dir_all(dir.join("frames"))?;
        let index = create_with_header(&dir.join("timestamps.csv"), "timestamp_ns,filename")?;
        let detections = create_with_header(
            &dir.join("detections.csv"),
            "timestamp_ns,x_min,y_min,x_max,y_max,class_id,confidence",
        )?;
        self.cameras.push(CameraSink { kind, index, detections, frames: 0, cached_png: None });
        Ok(self.cameras.len() - 1)
    }

    pub fn ensure_camera(&mut self, kind: SensorKind) -> io::Result<()> {
        self.camera_sink(kind).map(|_| ())
    }

    /// Writes a flat frame filled with `fill` (8-bit gray for IR, 24-bit RGB otherwise)
    /// plus its detections.
    pub fn write_camera_frame(
        &mut self,
        kind: SensorKind,
        timestamp: Timestamp,
        width: u32,
        height: u32,
        fill: u8,
        detections: &[Detection2D],
    ) -> io::Result<()> {
        let i = self.camera_sink(kind)?;
        let name = format!("{:06}.png", self.cameras[i].frames);
        let path = self.root.join(kind.label()).join("frames").join(&name);
        let sink = &mut self.cameras[i];
        let stale = !matches!(&sink.cached_png, Some((w, h, f, _)) if (*w, *h, *f) == (width, height, fill));
        if stale {
            let mut buf = io::Cursor::new(Vec::new());
            if kind == SensorKind::CameraIr {
                GrayImage::from_pixel(width, height, Luma([fill])).write_to(&mut buf, image::ImageFormat::Png)
            } else {
                RgbImage::from_pixel(width, height, Rgb([fill; 3])).write_to(&mut buf, image::ImageFormat::Png)
            }
            .map_err(io::Error::other)?;
            sink.cached_png = Some((width, height, fill, buf.into_inner()));
        }
        fs::write(&path, &sink.cached_png.as_ref().unwrap().3)?;
        sink.frames += 1;
        writeln!(sink.index, "{},{}", timestamp.0, name)?;
        for d in detections {
            writeln!(
                sink.detections,
                "{},{},{},{},{},{},{}",
                timestamp.0, d.x_min, d.y_min, d.x_max, d.y_max, d.class_id, d.confidence
            )?;
        }
        Ok(())
    }

    pub fn finish(mut self) -> io::Result<()> {
        if let Some(w) = self.gnss.as_mut() {
            w.flush()?;
        }
        if let Some(w) = self.imu.as_mut() {
            w.flush()?;
        }
        for (_, w, _) in self.lidar.iter_mut() {
            w.flush()?;
        }
        for c in self.cameras.iter_mut() {
            c.index.flush()?;
            c.detections.flush()?;
        }
        Ok(())
    }
}
