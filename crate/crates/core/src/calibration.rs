//! Per-sensor calibration: extrinsic pose of the sensor in the IMU (body) frame and, for
//! cameras, pinhole intrinsics.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::geometry::{CameraIntrinsics, RigidTransform, UnitQuaternion, Vec3};

/// Calibrations keyed by sensor directory label (`lidar_left`, `camera_ir`, ...).
pub type Calibrations = BTreeMap<String, SensorCalibration>;

#[derive(Debug, Clone, PartialEq)]
pub struct SensorCalibration {
    /// Maps sensor-frame points into the IMU frame.
    pub extrinsic: RigidTransform,
    pub intrinsics: Option<CameraIntrinsics>,
}

impl SensorCalibration {
    pub fn lidar(extrinsic: RigidTransform) -> Self {
        SensorCalibration { extrinsic, intrinsics: None }
    }

    pub fn camera(extrinsic: RigidTransform, intrinsics: CameraIntrinsics) -> Self {
        SensorCalibration { extrinsic, intrinsics: Some(intrinsics) }
    }
}

/// YAML form of a rigid transform.
///
/// Rotation is either a `[w, x, y, z]` quaternion or roll/pitch/yaw in degrees; giving
/// both is an error.
#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct TransformSpec {
    #[serde(default)]
    pub translation: [f64; 3],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rotation: Option<[f64; 4]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rpy_deg: Option<[f64; 3]>,
}

impl TransformSpec {
    pub fn to_transform(&self) -> Result<RigidTransform, String> {
        let rotation = match (self.rotation, self.rpy_deg) {
            (Some(_), Some(_)) => return Err("give either `rotation` or `rpy_deg`, not both".into()),
            (Some([w, x, y, z]), None) => UnitQuaternion::new(w, x, y, z).map_err(|e| e.to_string())?,
            (None, Some([r, p, y])) => UnitQuaternion::from_euler(r.to_radians(), p.to_radians(), y.to_radians()),
            (None, None) => UnitQuaternion::IDENTITY,
        };
        if !self.translation.iter().all(|v| v.is_finite()) {
            return Err("translation must be finite".into());
        }
        Ok(RigidTransform::new(rotation, Vec3::from_array(self.translation)))
    }

    pub fn from_transform(t: &RigidTransform) -> Self {
        TransformSpec {
            translation: t.translation.to_array(),
            rotation: Some(t.rotation.to_array()),
            rpy_deg: None,
        }
    }
}

/// Static rotation taking camera-frame vectors (+z forward, +x right, +y down) into a
/// body frame with +x forward, +y left, +z up.
pub fn camera_to_body_rotation() -> UnitQuaternion {
    // columns: cam x -> -body y, cam y -> -body z, cam z -> body x
    UnitQuaternion::from_euler(-std::f64::consts::FRAC_PI_2, 0.0, -std::f64::consts::FRAC_PI_2)
}
