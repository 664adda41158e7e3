//! Offline multi-sensor fusion: GNSS/IMU positioning, LiDAR undistortion and
//! aggregation, camera detection lifting, RGB-to-IR annotation transfer and depth
//! rendering, driven by a single-threaded time-ordered packet loop.

pub mod aggregation;
pub mod calibration;
pub mod config;
pub mod dataset;
pub mod fail_check;
pub mod fusion;
pub mod geometry;
pub mod local_map;
pub mod positioning;
pub mod reprojection;
pub mod scenario;
pub mod pipeline;
