//! Rotating-LiDAR undistortion and time-windowed point-cloud aggregation.
//!
//! A scan is cut into `N` contiguous slices in acquisition order. Each slice becomes a
//! [`PointCloudBatch`] whose points stay in the sensor frame together with a lazy
//! transform chain `[pose(t_k), lidar→imu]`, where `pose(t_k)` is interpolated between
//! the agent poses at scan start and scan end at the slice's temporal midpoint.

use std::cell::OnceCell;
use std::collections::HashSet;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{LidarPoint, LidarScan, SensorId, Timestamp};
use crate::geometry::{compose, interpolate_pose, RigidTransform, TransformChain, Vec3};

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct AggregationConfig {
    pub batch_count: usize,
    /// Seconds of batches retained in the aggregate.
    pub window: f64,
    /// Voxel edge for downsampling, meters.
    pub voxel_leaf: f64,
}

impl Default for AggregationConfig {
    fn default() -> Self {
        AggregationConfig { batch_count: 16, window: 1.5, voxel_leaf: 0.2 }
    }
}

impl AggregationConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.batch_count < 1 {
            return Err("aggregation.batch_count must be at least 1".into());
        }
        if !(self.window > 0.0 && self.window.is_finite()) {
            return Err("aggregation.window must be positive".into());
        }
        if !(self.voxel_leaf > 0.0 && self.voxel_leaf.is_finite()) {
            return Err("aggregation.voxel_leaf must be positive".into());
        }
        Ok(())
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AggregationError {
    #[error("batch count must be at least 1, got {0}")]
    InvalidBatchCount(usize),
    #[error("scan from {0} has no points")]
    EmptyScan(String),
    #[error("voxel leaf must be positive, got {0}")]
    InvalidLeaf(f64),
}

/// Keeps the first point (in input order) of every occupied `leaf`-sized voxel.
pub fn voxel_downsample(points: &[LidarPoint], leaf: f64) -> Result<Vec<LidarPoint>, AggregationError> {
    if !(leaf > 0.0 && leaf.is_finite()) {
        return Err(AggregationError::InvalidLeaf(leaf));
    }
    let mut seen: HashSet<(i64, i64, i64)> = HashSet::with_capacity(points.len());
    Ok(points
        .iter()
        .filter(|p| {
            let key = (
                (p.position.x / leaf).floor() as i64,
                (p.position.y / leaf).floor() as i64,
                (p.position.z / leaf).floor() as i64,
            );
            seen.insert(key)
        })
        .copied()
        .collect())
}

pub fn downsample(scan: &LidarScan, leaf: f64) -> Result<LidarScan, AggregationError> {
    Ok(LidarScan { points: voxel_downsample(&scan.points, leaf)?, ..scan.clone() })
}

/// Sensor-frame points plus the unevaluated chain that places them in the local frame.
///
/// The collapsed chain is computed on first use and cached; the batch is never
/// mutated, so the cache never goes stale.
#[derive(Debug, Clone)]
pub struct PointCloudBatch {
    points: Arc<[LidarPoint]>,
    chain: TransformChain,
    batch_timestamp: Timestamp,
    source: SensorId,
    collapsed: OnceCell<RigidTransform>,
}

impl PointCloudBatch {
    pub fn new(points: Vec<LidarPoint>, chain: TransformChain, batch_timestamp: Timestamp, source: SensorId) -> Self {
        PointCloudBatch { points: points.into(), chain, batch_timestamp, source, collapsed: OnceCell::new() }
    }

    pub fn points(&self) -> &[LidarPoint] {
        &self.points
    }

    pub fn chain(&self) -> &TransformChain {
        &self.chain
    }

    pub fn batch_timestamp(&self) -> Timestamp {
        self.batch_timestamp
    }

    pub fn source(&self) -> &SensorId {
        &self.source
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn is_collapsed(&self) -> bool {
        self.collapsed.get().is_some()
    }

    pub fn collapsed_transform(&self) -> RigidTransform {
        *self.collapsed.get_or_init(|| self.chain.collapse())
    }

    /// Same points with `outer` applied after the existing chain.
    pub fn followed_by(&self, outer: RigidTransform) -> PointCloudBatch {
        PointCloudBatch {
            points: Arc::clone(&self.points),
            chain: self.chain.followed_by(outer),
            batch_timestamp: self.batch_timestamp,
            source: self.source.clone(),
            collapsed: OnceCell::new(),
        }
    }

    /// Points mapped through `outer ∘ chain`; every point is transformed exactly once.
    pub fn transformed_points(&self, outer: &RigidTransform) -> impl Iterator<Item = LidarPoint> + '_ {
        let t = compose(outer, &self.collapsed_transform());
        self.points.iter().map(move |p| LidarPoint::new(t.apply(p.position), p.intensity))
    }

    pub fn world_points(&self) -> impl Iterator<Item = LidarPoint> + '_ {
        self.transformed_points(&RigidTransform::IDENTITY)
    }
}

/// Cuts a scan into up to `n` contiguous slices with per-slice interpolated poses.
///
/// Slice `k` covers indices `[⌊k·M/n⌋, ⌊(k+1)·M/n⌋)` of the `M` points, so sizes
/// differ by at most one; empty slices (when `M < n`) are skipped. The slice pose is
/// sampled at the normalized index midpoint, which is `(k + 0.5)/n` whenever `n`
/// divides `M`.
pub fn split_into_batches(
    scan: &LidarScan,
    pose_prev: &RigidTransform,
    pose_now: &RigidTransform,
    lidar_to_imu: &RigidTransform,
    n: usize,
) -> Result<Vec<PointCloudBatch>, AggregationError> {
    if n < 1 {
        return Err(AggregationError::InvalidBatchCount(n));
    }
    let m = scan.points.len();
    if m == 0 {
        return Err(AggregationError::EmptyScan(scan.sensor.label.clone()));
    }
    let span = scan.end_timestamp.0.saturating_sub(scan.start_timestamp.0) as f64;
    let mut batches = Vec::with_capacity(n.min(m));
    for k in 0..n {
        let a = k * m / n;
        let b = (k + 1) * m / n;
        if a == b {
            continue;
        }
        let t = (a + b) as f64 / (2 * m) as f64;
        let pose = interpolate_pose(pose_prev, pose_now, t).expect("slice midpoint lies in [0, 1]");
        let chain = TransformChain::from_elements(vec![pose, *lidar_to_imu]);
        let ts = Timestamp(scan.start_timestamp.0 + (t * span).round() as u64);
        batches.push(PointCloudBatch::new(scan.points[a..b].to_vec(), chain, ts, scan.sensor.clone()));
    }
    Ok(batches)
}

/// Time-ordered store of batches from every LiDAR.
#[derive(Debug, Default)]
pub struct PointCloudAggregator {
    batches: Vec<PointCloudBatch>,
}

impl PointCloudAggregator {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds batches keeping the store sorted by batch timestamp (stable for ties).
    pub fn insert_batches(&mut self, batches: Vec<PointCloudBatch>) {
        for b in batches {
            let at = self.batches.partition_point(|x| x.batch_timestamp <= b.batch_timestamp);
            self.batches.insert(at, b);
        }
    }

    /// Drops every batch stamped before `now - window`; the boundary itself is kept.
    pub fn evict_expired(&mut self, now: Timestamp, window: f64) {
        let cutoff = now.saturating_sub_secs(window);
        self.batches.retain(|b| b.batch_timestamp >= cutoff);
    }

    pub fn batches(&self) -> &[PointCloudBatch] {
        &self.batches
    }

    pub fn len(&self) -> usize {
        self.batches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.batches.is_empty()
    }

    pub fn point_count(&self) -> usize {
        self.batches.iter().map(|b| b.len()).sum()
    }

    pub fn aggregated_world_cloud(&self) -> Vec<LidarPoint> {
        let mut out = Vec::with_capacity(self.point_count());
        for b in &self.batches {
            out.extend(b.world_points());
        }
        out
    }

    /// Positions only, for callers that ignore intensity.
    pub fn world_positions(&self) -> Vec<Vec3> {
        self.aggregated_world_cloud().into_iter().map(|p| p.position).collect()
    }
}
