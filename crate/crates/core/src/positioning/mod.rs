//! GNSS/IMU pose estimation in a local ENU frame anchored at the first GNSS fix.
//!
//! Position and velocity come from three independent [`Kalman1D`] filters (east, north,
//! up) predicted with gravity-free IMU acceleration and corrected with GNSS fixes.
//! Orientation is integrated from the gyro; roll and pitch are low-pass blended toward
//! the IMU's own absolute orientation, while yaw is corrected only through
//! [`fuse_heading`].

mod geodesy;
mod kalman;

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use geodesy::{
    ecef_to_geodetic, geodetic_to_ecef, geodetic_to_local, local_to_geodetic, wgs84_to_local, Anchor, WGS84_A,
    WGS84_E2, WGS84_F,
};
pub use kalman::Kalman1D;

use crate::dataset::{GnssPacket, ImuPacket, Timestamp};
use crate::geometry::{wrap_angle, RigidTransform, UnitQuaternion, Vec3};

/// Below this horizontal speed the velocity vector carries no usable heading.
pub const MIN_HEADING_SPEED: f64 = 0.5;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct PositioningConfig {
    /// m/s², subtracted from the vertical axis of the rotated specific force.
    pub gravity: f64,
    /// GNSS position noise (1σ), meters.
    pub gnss_sigma: f64,
    /// Process noise of the acceleration input (1σ), m/s².
    pub accel_sigma: f64,
    /// Initial velocity uncertainty (1σ) at the anchor fix, m/s.
    pub initial_velocity_sigma: f64,
    /// Per-sample roll/pitch low-pass factor toward the IMU orientation.
    pub rollpitch_blend_alpha: f64,
    /// Horizontal speed at and above which heading comes purely from velocity, m/s.
    pub heading_full_trust_speed: f64,
    /// Expected GNSS heading noise (1σ), degrees.
    pub gnss_heading_sigma: f64,
    /// Span of pose history kept for time queries, seconds.
    pub pose_history_length: f64,
}

impl Default for PositioningConfig {
    fn default() -> Self {
        PositioningConfig {
            gravity: 9.81,
            gnss_sigma: 0.02,
            accel_sigma: 0.2,
            initial_velocity_sigma: 10.0,
            rollpitch_blend_alpha: 0.02,
            heading_full_trust_speed: 5.0,
            gnss_heading_sigma: 3.0,
            pose_history_length: 10.0,
        }
    }
}

impl PositioningConfig {
    pub fn validate(&self) -> Result<(), String> {
        let positive = [
            ("positioning.gravity", self.gravity),
            ("positioning.heading_full_trust_speed", self.heading_full_trust_speed),
            ("positioning.pose_history_length", self.pose_history_length),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(format!("{name} must be positive, got {v}"));
            }
        }
        let non_negative = [
            ("positioning.gnss_sigma", self.gnss_sigma),
            ("positioning.accel_sigma", self.accel_sigma),
            ("positioning.initial_velocity_sigma", self.initial_velocity_sigma),
            ("positioning.gnss_heading_sigma", self.gnss_heading_sigma),
        ];
        for (name, v) in non_negative {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(format!("{name} must be non-negative, got {v}"));
            }
        }
        if !(self.rollpitch_blend_alpha > 0.0 && self.rollpitch_blend_alpha < 1.0) {
            return Err(format!(
                "positioning.rollpitch_blend_alpha must be in (0, 1), got {}",
                self.rollpitch_blend_alpha
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PositioningError {
    #[error("{stream} packet at {got} is older than the previous one at {previous}")]
    OutOfOrder { stream: &'static str, previous: Timestamp, got: Timestamp },
    #[error("non-finite IMU field `{0}`")]
    NonFinite(&'static str),
    #[error("no pose history yet (waiting for the first GNSS fix)")]
    EmptyHistory,
    #[error("requested {requested} outside pose history [{start}, {end}]")]
    OutOfHistory { requested: Timestamp, start: Timestamp, end: Timestamp },
}

/// Agent pose in the anchored local frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalPosition {
    pub timestamp: Timestamp,
    pub position: Vec3,
    /// Body (IMU) to local rotation.
    pub orientation: UnitQuaternion,
    pub velocity: Vec3,
}

impl LocalPosition {
    /// Body-to-local rigid transform.
    pub fn to_transform(&self) -> RigidTransform {
        RigidTransform::new(self.orientation, self.position)
    }
}

/// Compass heading (radians clockwise from north) of an ENU vector.
pub fn heading_of(v: Vec3) -> f64 {
    v.x.atan2(v.y)
}

/// Converts a compass heading into the ENU yaw of the body x axis.
pub fn heading_to_yaw(heading: f64) -> f64 {
    wrap_angle(std::f64::consts::FRAC_PI_2 - heading)
}

pub fn yaw_to_heading(yaw: f64) -> f64 {
    wrap_angle(std::f64::consts::FRAC_PI_2 - yaw)
}

/// Blends GNSS heading with the heading of the horizontal velocity.
///
/// The velocity weight grows linearly with speed and saturates at
/// `heading_full_trust_speed`; the blend is a weighted circular mean. Without a GNSS
/// heading the velocity heading is used above [`MIN_HEADING_SPEED`], otherwise
/// `previous` is kept. All headings are radians clockwise from north; the result lies
/// in `(-π, π]`.
pub fn fuse_heading(gnss_heading: Option<f64>, velocity: Vec3, previous: f64, cfg: &PositioningConfig) -> f64 {
    let speed = (velocity.x * velocity.x + velocity.y * velocity.y).sqrt();
    let h_v = heading_of(velocity);
    match gnss_heading {
        Some(h_g) => {
            let w = (speed / cfg.heading_full_trust_speed).clamp(0.0, 1.0);
            let s = w * h_v.sin() + (1.0 - w) * h_g.sin();
            let c = w * h_v.cos() + (1.0 - w) * h_g.cos();
            if s == 0.0 && c == 0.0 {
                return wrap_angle(previous);
            }
            wrap_angle(s.atan2(c))
        }
        None if speed > MIN_HEADING_SPEED => wrap_angle(h_v),
        None => wrap_angle(previous),
    }
}

/// Streaming GNSS/IMU pose estimator with a bounded, time-indexed pose history.
#[derive(Debug, Clone)]
pub struct PoseEstimator {
    cfg: PositioningConfig,
    anchor: Option<Anchor>,
    filters: [Kalman1D; 3],
    filter_time: Option<Timestamp>,
    orientation: UnitQuaternion,
    orientation_initialized: bool,
    last_imu: Option<Timestamp>,
    last_gnss: Option<Timestamp>,
    dynamic_accel: Vec3,
    history: VecDeque<LocalPosition>,
}

impl PoseEstimator {
    pub fn new(cfg: PositioningConfig) -> Self {
        let idle = Kalman1D::new(0.0, 0.0, [[0.0; 2]; 2], cfg.accel_sigma, cfg.gnss_sigma);
        PoseEstimator {
            cfg,
            anchor: None,
            filters: [idle; 3],
            filter_time: None,
            orientation: UnitQuaternion::IDENTITY,
            orientation_initialized: false,
            last_imu: None,
            last_gnss: None,
            dynamic_accel: Vec3::ZERO,
            history: VecDeque::new(),
        }
    }

    pub fn config(&self) -> &PositioningConfig {
        &self.cfg
    }

    pub fn anchor(&self) -> Option<Anchor> {
        self.anchor
    }

    pub fn filters(&self) -> &[Kalman1D; 3] {
        &self.filters
    }

    pub fn orientation(&self) -> UnitQuaternion {
        self.orientation
    }

    /// Most recent gravity-free acceleration in the local frame.
    pub fn dynamic_acceleration(&self) -> Vec3 {
        self.dynamic_accel
    }

    pub fn history(&self) -> &VecDeque<LocalPosition> {
        &self.history
    }

    fn position(&self) -> Vec3 {
        Vec3::new(self.filters[0].position(), self.filters[1].position(), self.filters[2].position())
    }

    fn velocity(&self) -> Vec3 {
        Vec3::new(self.filters[0].velocity(), self.filters[1].velocity(), self.filters[2].velocity())
    }

    fn current(&self, timestamp: Timestamp) -> LocalPosition {
        LocalPosition { timestamp, position: self.position(), orientation: self.orientation, velocity: self.velocity() }
    }

    fn push_history(&mut self, pose: LocalPosition) {
        match self.history.back() {
            Some(last) if last.timestamp == pose.timestamp => {
                *self.history.back_mut().unwrap() = pose;
            }
            Some(last) if last.timestamp > pose.timestamp => return,
            _ => self.history.push_back(pose),
        }
        let horizon = pose.timestamp.saturating_sub_secs(self.cfg.pose_history_length);
        while self.history.len() > 2 && self.history[1].timestamp <= horizon {
            self.history.pop_front();
        }
    }

    fn predict_to(&mut self, t: Timestamp) {
        if let Some(ft) = self.filter_time {
            if t > ft {
                let dt = t.seconds_since(ft);
                let a = self.dynamic_accel;
                for (axis, f) in self.filters.iter_mut().enumerate() {
                    f.predict(dt, a.component(axis));
                }
                self.filter_time = Some(t);
            }
        }
    }

    fn current_heading(&self) -> f64 {
        yaw_to_heading(self.orientation.yaw())
    }

    fn set_heading(&mut self, heading: f64) {
        let (roll, pitch, _) = self.orientation.to_euler();
        self.orientation = UnitQuaternion::from_euler(roll, pitch, heading_to_yaw(heading));
    }

    pub fn on_gnss(&mut self, packet: &GnssPacket) -> Result<LocalPosition, PositioningError> {
        if let Some(prev) = self.last_gnss {
            if packet.timestamp < prev {
                return Err(PositioningError::OutOfOrder { stream: "gnss", previous: prev, got: packet.timestamp });
            }
        }
        self.last_gnss = Some(packet.timestamp);

        match self.anchor {
            None => {
                let anchor = Anchor::from_fix(packet);
                self.anchor = Some(anchor);
                let p0 = wgs84_to_local(&anchor, packet);
                let pos_var = self.cfg.gnss_sigma * self.cfg.gnss_sigma;
                let vel_var = self.cfg.initial_velocity_sigma * self.cfg.initial_velocity_sigma;
                for axis in 0..3 {
                    self.filters[axis] = Kalman1D::new(
                        p0.component(axis),
                        0.0,
                        [[pos_var, 0.0], [0.0, vel_var]],
                        self.cfg.accel_sigma,
                        self.cfg.gnss_sigma,
                    );
                }
                self.filter_time = Some(packet.timestamp);
            }
            Some(anchor) => {
                let z = wgs84_to_local(&anchor, packet);
                // older-than-filter fixes are applied without rollback
                self.predict_to(packet.timestamp);
                for (axis, f) in self.filters.iter_mut().enumerate() {
                    f.correct(z.component(axis));
                }
            }
        }

        let gnss_heading = packet.azimuth.map(|a| wrap_angle(a.to_radians()));
        let fused = fuse_heading(gnss_heading, self.velocity(), self.current_heading(), &self.cfg);
        self.set_heading(fused);

        let pose = self.current(self.filter_time.unwrap_or(packet.timestamp));
        self.push_history(pose);
        Ok(pose)
    }

    pub fn on_imu(&mut self, packet: &ImuPacket) -> Result<LocalPosition, PositioningError> {
        if !packet.linear_acceleration.is_finite() {
            return Err(PositioningError::NonFinite("linear_acceleration"));
        }
        if !packet.angular_velocity.is_finite() {
            return Err(PositioningError::NonFinite("angular_velocity"));
        }
        if let Some(prev) = self.last_imu {
            if packet.timestamp < prev {
                return Err(PositioningError::OutOfOrder { stream: "imu", previous: prev, got: packet.timestamp });
            }
        }

        let (roll_ref, pitch_ref, _) = packet.absolute_orientation.to_euler();
        if !self.orientation_initialized {
            self.orientation = UnitQuaternion::from_euler(roll_ref, pitch_ref, self.orientation.yaw());
            self.orientation_initialized = true;
        } else {
            let dt = self.last_imu.map_or(0.0, |p| packet.timestamp.seconds_since(p));
            if dt > 0.0 {
                let dq = UnitQuaternion::from_rotation_vector(packet.angular_velocity * dt);
                self.orientation = self.orientation * dq;
            }
            let alpha = self.cfg.rollpitch_blend_alpha;
            let (roll, pitch, yaw) = self.orientation.to_euler();
            let roll = roll + alpha * wrap_angle(roll_ref - roll);
            let pitch = pitch + alpha * (pitch_ref - pitch);
            self.orientation = UnitQuaternion::from_euler(roll, pitch, yaw);
        }
        self.last_imu = Some(packet.timestamp);

        self.dynamic_accel =
            self.orientation.rotate(packet.linear_acceleration) - Vec3::new(0.0, 0.0, self.cfg.gravity);

        if self.anchor.is_none() {
            return Ok(self.current(packet.timestamp));
        }
        self.predict_to(packet.timestamp);
        let pose = self.current(self.filter_time.unwrap_or(packet.timestamp));
        self.push_history(pose);
        Ok(pose)
    }

    /// Pose at `t`, interpolated between the bracketing history entries.
    pub fn estimate_pose_at(&self, t: Timestamp) -> Result<LocalPosition, PositioningError> {
        let (first, last) = match (self.history.front(), self.history.back()) {
            (Some(f), Some(l)) => (f, l),
            _ => return Err(PositioningError::EmptyHistory),
        };
        if t < first.timestamp || t > last.timestamp {
            return Err(PositioningError::OutOfHistory { requested: t, start: first.timestamp, end: last.timestamp });
        }
        let i = self.history.partition_point(|p| p.timestamp < t);
        let hi = self.history[i];
        if hi.timestamp == t {
            return Ok(hi);
        }
        let lo = self.history[i - 1];
        let f = t.seconds_since(lo.timestamp) / hi.timestamp.seconds_since(lo.timestamp);
        Ok(LocalPosition {
            timestamp: t,
            position: lo.position.lerp(hi.position, f),
            orientation: lo.orientation.slerp(&hi.orientation, f),
            velocity: lo.velocity.lerp(hi.velocity, f),
        })
    }
}
