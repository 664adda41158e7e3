//! Single-threaded packet loop: every packet from the time-ordered dataset is checked,
//! then dispatched to the section handling its sensor type.

use std::collections::{BTreeMap, VecDeque};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::aggregation::{downsample, split_into_batches, PointCloudAggregator};
use crate::calibration::SensorCalibration;
use crate::config::{PipelineConfig, Stage};
use crate::dataset::{
    open_dataset, ply, CameraFrame, DatasetError, DatasetReader, Detection2D, LidarScan, SensorId, SensorKind,
    SensorPacket, Timestamp,
};
use crate::fail_check::FailChecker;
use crate::fusion::{
    depths_in_bbox, detection_to_frustum, median, project_cloud_to_camera, FrustumDetection, ObjectTracker,
};
use crate::geometry::RigidTransform;
use crate::local_map::{
    failcheck_row, object_row, trajectory_row, write_depth_png, write_yolo_annotations, LineWriter, LocalMap,
    WriterError, FAILCHECK_HEADER, OBJECTS_HEADER, TRAJECTORY_HEADER,
};
use crate::positioning::PoseEstimator;
use crate::reprojection::{frustum_frontal_plane, nearest_frame, render_depth_image, reproject_quad};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error("{stage} failed on {sensor} packet at {timestamp}: {message}")]
    Stage { stage: Stage, sensor: String, timestamp: Timestamp, message: String },
    #[error("cannot prepare output {path}: {source}")]
    OutputDir { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Output(#[from] WriterError),
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunReport {
    /// Packets taken from the dataset, per sensor label.
    pub packets: BTreeMap<String, usize>,
    /// Packets a stage could not use (no pose yet, stage disabled, empty scan).
    pub skipped: BTreeMap<String, usize>,
    pub anomalies: BTreeMap<String, usize>,
    pub annotation_files: usize,
    pub depth_images: usize,
    pub snapshots: usize,
    pub trajectory_rows: usize,
    pub objects_created: u64,
    pub wall_time: Duration,
}

impl RunReport {
    pub fn total_packets(&self) -> usize {
        self.packets.values().sum()
    }

    pub fn total_anomalies(&self) -> usize {
        self.anomalies.values().sum()
    }
}

/// Processed RGB frame kept for detection transfer.
struct RgbFrame {
    timestamp: Timestamp,
    frustums: Vec<FrustumDetection>,
}

struct Outputs {
    root: PathBuf,
    trajectory: LineWriter,
    objects: LineWriter,
    failcheck: LineWriter,
}

impl Outputs {
    fn create(root: &Path) -> Result<Self, PipelineError> {
        for dir in [root.to_path_buf(), root.join("ir_annotations"), root.join("depth")] {
            std::fs::create_dir_all(&dir).map_err(|source| PipelineError::OutputDir { path: dir.clone(), source })?;
        }
        Ok(Outputs {
            root: root.to_path_buf(),
            trajectory: LineWriter::create(&root.join("trajectory.csv"), TRAJECTORY_HEADER)?,
            objects: LineWriter::create(&root.join("objects.csv"), OBJECTS_HEADER)?,
            failcheck: LineWriter::create(&root.join("failcheck.csv"), FAILCHECK_HEADER)?,
        })
    }

    fn finish(self) -> Result<(), PipelineError> {
        self.trajectory.finish()?;
        self.objects.finish()?;
        self.failcheck.finish()?;
        Ok(())
    }
}

struct Pipeline<'a> {
    cfg: &'a PipelineConfig,
    fail: FailChecker,
    estimator: PoseEstimator,
    aggregator: PointCloudAggregator,
    tracker: ObjectTracker,
    map: LocalMap,
    rgb_frames: BTreeMap<SensorId, VecDeque<RgbFrame>>,
    out: Outputs,
    report: RunReport,
    next_snapshot: Option<Timestamp>,
}

fn stage_error(stage: Stage, sensor: &SensorId, timestamp: Timestamp, e: impl ToString) -> PipelineError {
    PipelineError::Stage { stage, sensor: sensor.label.clone(), timestamp, message: e.to_string() }
}

/// Intersection over union of two boxes.
fn iou(a: &Detection2D, b: &Detection2D) -> f64 {
    let w = (a.x_max.min(b.x_max) - a.x_min.max(b.x_min)).max(0.0);
    let h = (a.y_max.min(b.y_max) - a.y_min.max(b.y_min)).max(0.0);
    let inter = w * h;
    let union = a.width() * a.height() + b.width() * b.height() - inter;
    if union > 0.0 { inter / union } else { 0.0 }
}

impl<'a> Pipeline<'a> {
    fn enabled(&self, s: Stage) -> bool {
        self.cfg.stages.enabled(s)
    }

    fn skip(&mut self, sensor: &SensorId, t: Timestamp, why: &str) {
        log::warn!("skipping {sensor} packet at {t}: {why}");
        *self.report.skipped.entry(sensor.label.clone()).or_default() += 1;
    }

    fn calibration(&self, sensor: &SensorId) -> &SensorCalibration {
        self.cfg.sensors.get(&sensor.label).expect("dataset only opens calibrated LiDARs and cameras")
    }

    fn handle(&mut self, packet: SensorPacket) -> Result<(), PipelineError> {
        let sensor = packet.sensor().clone();
        let t = packet.timestamp();
        *self.report.packets.entry(sensor.label.clone()).or_default() += 1;

        if self.enabled(Stage::FailCheck) {
            let anomalies = self.fail.ingest(&packet);
            if !anomalies.is_empty() {
                let score = self.fail.reliability(&sensor, t).map_err(|e| stage_error(Stage::FailCheck, &sensor, t, e))?;
                for a in &anomalies {
                    log::warn!("{sensor} at {t}: {a} (reliability {:.3})", score.value);
                    self.out.failcheck.line(&failcheck_row(t, &sensor, score.value, a))?;
                }
                *self.report.anomalies.entry(sensor.label.clone()).or_default() += anomalies.len();
            }
        }

        match packet {
            SensorPacket::Gnss(_, p) => {
                if !self.enabled(Stage::Positioning) {
                    return Ok(self.skip(&sensor, t, "positioning disabled"));
                }
                let pose = self.estimator.on_gnss(&p).map_err(|e| stage_error(Stage::Positioning, &sensor, t, e))?;
                self.record_pose(pose)?;
            }
            SensorPacket::Imu(_, p) => {
                if !self.enabled(Stage::Positioning) {
                    return Ok(self.skip(&sensor, t, "positioning disabled"));
                }
                let pose = self.estimator.on_imu(&p).map_err(|e| stage_error(Stage::Positioning, &sensor, t, e))?;
                if self.estimator.anchor().is_some() {
                    self.record_pose(pose)?;
                }
            }
            SensorPacket::Lidar(scan) => self.on_lidar(scan)?,
            SensorPacket::Camera(frame) if frame.sensor.kind == SensorKind::CameraIr => self.on_ir(frame)?,
            SensorPacket::Camera(frame) => self.on_rgb(frame)?,
        }
        self.maybe_snapshot(t)
    }

    fn record_pose(&mut self, pose: crate::positioning::LocalPosition) -> Result<(), PipelineError> {
        self.out.trajectory.line(&trajectory_row(&pose))?;
        self.report.trajectory_rows += 1;
        self.map.set_pose(pose);
        Ok(())
    }

    fn on_lidar(&mut self, scan: LidarScan) -> Result<(), PipelineError> {
        let (sensor, t) = (scan.sensor.clone(), scan.end_timestamp);
        if !self.enabled(Stage::Aggregation) {
            return Ok(self.skip(&sensor, t, "aggregation disabled"));
        }
        let (start, end) = match (
            self.estimator.estimate_pose_at(scan.start_timestamp),
            self.estimator.estimate_pose_at(scan.end_timestamp),
        ) {
            (Ok(a), Ok(b)) => (a, b),
            (Err(e), _) | (_, Err(e)) => return Ok(self.skip(&sensor, t, &format!("no pose for the sweep ({e})"))),
        };
        let reduced = downsample(&scan, self.cfg.aggregation.voxel_leaf).map_err(|e| stage_error(Stage::Aggregation, &sensor, t, e))?;
        if reduced.points.is_empty() {
            return Ok(self.skip(&sensor, t, "scan has no points"));
        }
        let extrinsic = self.calibration(&sensor).extrinsic;
        let batches = split_into_batches(
            &reduced,
            &start.to_transform(),
            &end.to_transform(),
            &extrinsic,
            self.cfg.aggregation.batch_count,
        )
        .map_err(|e| stage_error(Stage::Aggregation, &sensor, t, e))?;
        self.aggregator.insert_batches(batches);
        self.aggregator.evict_expired(t, self.cfg.aggregation.window);
        log::debug!("{sensor} at {t}: {} points kept, aggregate holds {}", reduced.points.len(), self.aggregator.point_count());
        Ok(())
    }

    /// Local-to-camera transform at `t`, or `None` when the pose history does not cover it.
    fn camera_pose(&self, sensor: &SensorId, t: Timestamp) -> Option<RigidTransform> {
        let pose = self.estimator.estimate_pose_at(t).ok()?;
        Some(pose.to_transform().then_after(&self.calibration(sensor).extrinsic).inverse())
    }

    fn on_rgb(&mut self, frame: CameraFrame) -> Result<(), PipelineError> {
        let (sensor, t) = (frame.sensor.clone(), frame.timestamp);
        if !self.enabled(Stage::Fusion) {
            return Ok(self.skip(&sensor, t, "fusion disabled"));
        }
        let Some(local_to_cam) = self.camera_pose(&sensor, t) else {
            return Ok(self.skip(&sensor, t, "pose history does not cover the frame"));
        };
        let intr = self.calibration(&sensor).intrinsics.expect("cameras are calibrated with intrinsics");
        let mut frustums = Vec::new();
        if !frame.detections.is_empty() {
            let projected = project_cloud_to_camera(self.aggregator.batches(), &local_to_cam, &intr);
            let cam_to_local = local_to_cam.inverse();
            for det in &frame.detections {
                let mut depths = depths_in_bbox(&projected, det);
                let support = depths.len();
                let Some(depth) = median(&mut depths) else {
                    log::debug!("{sensor} at {t}: no LiDAR support for class {} box", det.class_id);
                    continue;
                };
                log::debug!("{sensor} at {t}: class {} box at {depth:.3} m from {support} points", det.class_id);
                let fd = detection_to_frustum(det, &intr, &cam_to_local, depth, self.cfg.fusion.depth_margin, sensor.clone(), t)
                    .map_err(|e| stage_error(Stage::Fusion, &sensor, t, e))?;
                frustums.push(fd);
            }
        }
        let objects = self.tracker.update(&frustums, t).to_vec();
        for o in &objects {
            self.out.objects.line(&object_row(t, o))?;
        }
        self.report.objects_created = objects.iter().map(|o| o.id + 1).max().unwrap_or(0).max(self.report.objects_created);
        self.map.set_objects(objects);
        self.map.set_frustums(sensor.clone(), t, frustums.clone());

        let keep = self.cfg.fusion.ir_match_tolerance_s;
        let frames = self.rgb_frames.entry(sensor).or_default();
        frames.push_back(RgbFrame { timestamp: t, frustums });
        while frames.len() > 1 && t.seconds_since(frames[0].timestamp) > keep {
            frames.pop_front();
        }
        Ok(())
    }

    /// Boxes transferred from the nearest processed frame of every RGB camera.
    fn transferred_detections(&self, ir: &SensorId, t: Timestamp, local_to_ir: &RigidTransform) -> Vec<Detection2D> {
        let intr = self.calibration(ir).intrinsics.expect("cameras are calibrated with intrinsics");
        let mut out: Vec<Detection2D> = Vec::new();
        for (rgb, frames) in &self.rgb_frames {
            let timeline: Vec<Timestamp> = frames.iter().map(|f| f.timestamp).collect();
            let Ok(i) = nearest_frame(&timeline, t) else { continue };
            if t.seconds_since(timeline[i]).abs() > self.cfg.fusion.ir_match_tolerance_s {
                continue;
            }
            for fd in &frames[i].frustums {
                let Some(det) = reproject_quad(&frustum_frontal_plane(fd), local_to_ir, &intr) else { continue };
                // the same object seen by two RGB cameras is annotated once
                if out.iter().any(|o| o.class_id == det.class_id && iou(o, &det) >= 0.5) {
                    log::debug!("{ir} at {t}: dropping duplicate transfer from {rgb}");
                    continue;
                }
                out.push(det);
            }
        }
        out
    }

    fn on_ir(&mut self, frame: CameraFrame) -> Result<(), PipelineError> {
        let (sensor, t) = (frame.sensor.clone(), frame.timestamp);
        let (transfer, depth) = (self.enabled(Stage::IrTransfer), self.enabled(Stage::Depth));
        if !transfer && !depth {
            return Ok(self.skip(&sensor, t, "ir_transfer and depth disabled"));
        }
        let Some(local_to_ir) = self.camera_pose(&sensor, t) else {
            return Ok(self.skip(&sensor, t, "pose history does not cover the frame"));
        };
        let intr = self.calibration(&sensor).intrinsics.expect("cameras are calibrated with intrinsics");
        if transfer {
            let dets = self.transferred_detections(&sensor, t, &local_to_ir);
            let path = self.out.root.join("ir_annotations").join(format!("{:06}.txt", frame.sequence));
            write_yolo_annotations(&path, intr.width(), intr.height(), &dets)?;
            self.report.annotation_files += 1;
        }
        if depth {
            let img = render_depth_image(self.aggregator.batches(), &local_to_ir, &intr);
            let path = self.out.root.join("depth").join(format!("{:06}.png", frame.sequence));
            write_depth_png(&path, &img)?;
            self.report.depth_images += 1;
        }
        Ok(())
    }

    fn maybe_snapshot(&mut self, t: Timestamp) -> Result<(), PipelineError> {
        let (Some(every), true) = (self.cfg.snapshot_every, self.enabled(Stage::Aggregation)) else { return Ok(()) };
        let due = *self.next_snapshot.get_or_insert(t.add_secs(every));
        if t < due {
            return Ok(());
        }
        let path = self.out.root.join(format!("aggregated_{}.ply", t.0));
        ply::write_ply(&path, &self.aggregator.aggregated_world_cloud())
            .map_err(|e| WriterError::Image { path: path.display().to_string(), message: e.to_string() })?;
        self.report.snapshots += 1;
        let mut next = due;
        while next <= t {
            next = next.add_secs(every);
        }
        self.next_snapshot = Some(next);
        Ok(())
    }
}

/// Opens the configured dataset and processes it end to end.
pub fn run(config: &PipelineConfig) -> Result<RunReport, PipelineError> {
    let reader = open_dataset(config)?;
    run_with_reader(config, reader)
}

pub fn run_with_reader(config: &PipelineConfig, mut reader: DatasetReader) -> Result<RunReport, PipelineError> {
    let started = Instant::now();
    let mut fail = FailChecker::new(config.fail_check.clone());
    for s in reader.sensors() {
        fail.register(s.clone());
    }
    let mut p = Pipeline {
        cfg: config,
        fail,
        estimator: PoseEstimator::new(config.positioning.clone()),
        aggregator: PointCloudAggregator::new(),
        tracker: ObjectTracker::new(config.fusion.clone()),
        map: LocalMap::new(),
        rgb_frames: BTreeMap::new(),
        out: Outputs::create(&config.output_dir)?,
        report: RunReport::default(),
        next_snapshot: None,
    };
    for s in reader.sensors() {
        p.report.packets.insert(s.label.clone(), 0);
    }
    log::info!("processing {} from {} sensors", config.dataset_path.display(), reader.sensors().len());

    loop {
        if let (Some(until), Some(next)) = (config.until, reader.peek_timestamp()) {
            if next > until {
                log::info!("stopping at {next}: past --until {until}");
                break;
            }
        }
        let Some(packet) = reader.next_packet()? else { break };
        p.handle(packet)?;
    }
    let Pipeline { out, mut report, .. } = p;
    out.finish()?;
    report.wall_time = started.elapsed();
    log::info!(
        "done: {} packets, {} anomalies, {} annotation files, {} depth images in {:.2?}",
        report.total_packets(),
        report.total_anomalies(),
        report.annotation_files,
        report.depth_images,
        report.wall_time
    );
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(x0: f64, y0: f64, x1: f64, y1: f64) -> Detection2D {
        Detection2D { x_min: x0, y_min: y0, x_max: x1, y_max: y1, class_id: 0, confidence: 1.0 }
    }

    #[test]
    fn iou_cases() {
        assert_eq!(iou(&d(0.0, 0.0, 10.0, 10.0), &d(0.0, 0.0, 10.0, 10.0)), 1.0);
        assert_eq!(iou(&d(0.0, 0.0, 10.0, 10.0), &d(20.0, 0.0, 30.0, 10.0)), 0.0);
        assert!((iou(&d(0.0, 0.0, 10.0, 10.0), &d(5.0, 0.0, 15.0, 10.0)) - 1.0 / 3.0).abs() < 1e-12);
    }
}
