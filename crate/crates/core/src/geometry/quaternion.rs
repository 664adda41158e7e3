use std::ops::Mul;

use super::{GeometryError, Vec3};

/// Tolerance on the norm of a quaternion accepted as "unit".
pub const UNIT_NORM_TOLERANCE: f64 = 1e-9;

/// Above this |dot| slerp degenerates to normalized lerp.
const SLERP_NLERP_THRESHOLD: f64 = 1.0 - 1e-9;

/// Rotation stored as a unit quaternion `w + xi + yj + zk`.
///
/// The constructor normalizes its input, so the stored value always has unit norm to
/// within rounding. Equality comparisons that should ignore the double cover go through
/// [`UnitQuaternion::canonical`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitQuaternion {
    w: f64,
    x: f64,
    y: f64,
    z: f64,
}

impl Default for UnitQuaternion {
    fn default() -> Self {
        Self::IDENTITY
    }
}

impl UnitQuaternion {
    pub const IDENTITY: UnitQuaternion = UnitQuaternion { w: 1.0, x: 0.0, y: 0.0, z: 0.0 };

    /// Builds a rotation from raw components, normalizing them.
    pub fn new(w: f64, x: f64, y: f64, z: f64) -> Result<Self, GeometryError> {
        let n = (w * w + x * x + y * y + z * z).sqrt();
        if !n.is_finite() || n < 1e-12 {
            return Err(GeometryError::DegenerateQuaternion { w, x, y, z });
        }
        Ok(UnitQuaternion { w: w / n, x: x / n, y: y / n, z: z / n })
    }

    /// Like [`UnitQuaternion::new`] but rejects inputs whose norm is not already 1 ± 1e-9.
    pub fn new_strict(w: f64, x: f64, y: f64, z: f64) -> Result<Self, GeometryError> {
        let n = (w * w + x * x + y * y + z * z).sqrt();
        if (n - 1.0).abs() > UNIT_NORM_TOLERANCE {
            return Err(GeometryError::NotUnitQuaternion { norm: n });
        }
        Self::new(w, x, y, z)
    }

    pub fn w(&self) -> f64 {
        self.w
    }
    pub fn x(&self) -> f64 {
        self.x
    }
    pub fn y(&self) -> f64 {
        self.y
    }
    pub fn z(&self) -> f64 {
        self.z
    }

    /// `[w, x, y, z]`
    pub fn to_array(&self) -> [f64; 4] {
        [self.w, self.x, self.y, self.z]
    }

    pub fn from_axis_angle(axis: Vec3, angle: f64) -> Result<Self, GeometryError> {
        let axis = axis.normalized().ok_or(GeometryError::ZeroAxis)?;
        let (s, c) = (angle * 0.5).sin_cos();
        Ok(UnitQuaternion { w: c, x: axis.x * s, y: axis.y * s, z: axis.z * s })
    }

    /// Rotation about +z by `yaw` radians.
    pub fn from_yaw(yaw: f64) -> Self {
        let (s, c) = (yaw * 0.5).sin_cos();
        UnitQuaternion { w: c, x: 0.0, y: 0.0, z: s }
    }

    /// Intrinsic z-y-x (yaw, pitch, roll) composition: `Rz(yaw) * Ry(pitch) * Rx(roll)`.
    pub fn from_euler(roll: f64, pitch: f64, yaw: f64) -> Self {
        let (sr, cr) = (roll * 0.5).sin_cos();
        let (sp, cp) = (pitch * 0.5).sin_cos();
        let (sy, cy) = (yaw * 0.5).sin_cos();
        UnitQuaternion {
            w: cr * cp * cy + sr * sp * sy,
            x: sr * cp * cy - cr * sp * sy,
            y: cr * sp * cy + sr * cp * sy,
            z: cr * cp * sy - sr * sp * cy,
        }
    }

    /// Inverse of [`UnitQuaternion::from_euler`]: returns `(roll, pitch, yaw)`.
    pub fn to_euler(&self) -> (f64, f64, f64) {
        let (w, x, y, z) = (self.w, self.x, self.y, self.z);
        let roll = (2.0 * (w * x + y * z)).atan2(1.0 - 2.0 * (x * x + y * y));
        let sinp = (2.0 * (w * y - z * x)).clamp(-1.0, 1.0);
        let pitch = sinp.asin();
        let yaw = (2.0 * (w * z + x * y)).atan2(1.0 - 2.0 * (y * y + z * z));
        (roll, pitch, yaw)
    }

    pub fn yaw(&self) -> f64 {
        self.to_euler().2
    }

    /// Exponential map of a rotation vector (axis × angle).
    pub fn from_rotation_vector(r: Vec3) -> Self {
        let theta = r.norm();
        let half = 0.5 * theta;
        // sin(θ/2)/θ, series near zero
        let k = if theta < 1e-8 { 0.5 - theta * theta / 48.0 } else { half.sin() / theta };
        let q = UnitQuaternion { w: half.cos(), x: r.x * k, y: r.y * k, z: r.z * k };
        q.renormalized()
    }

    /// Logarithm map; the returned rotation vector has angle in `[0, π]`.
    pub fn to_rotation_vector(&self) -> Vec3 {
        let q = self.canonical();
        let v = Vec3::new(q.x, q.y, q.z);
        let s = v.norm();
        if s < 1e-12 {
            return v * 2.0;
        }
        let angle = 2.0 * s.atan2(q.w);
        v * (angle / s)
    }

    /// Rotation angle in `[0, π]`.
    pub fn angle(&self) -> f64 {
        self.to_rotation_vector().norm()
    }

    /// Angle of the relative rotation between `self` and `other`, in `[0, π]`.
    pub fn angle_to(&self, other: &UnitQuaternion) -> f64 {
        (self.inverse() * *other).angle()
    }

    pub fn inverse(&self) -> Self {
        UnitQuaternion { w: self.w, x: -self.x, y: -self.y, z: -self.z }
    }

    /// Representative with `w ≥ 0`.
    pub fn canonical(&self) -> Self {
        if self.w < 0.0 {
            UnitQuaternion { w: -self.w, x: -self.x, y: -self.y, z: -self.z }
        } else {
            *self
        }
    }

    pub fn dot(&self, o: &UnitQuaternion) -> f64 {
        self.w * o.w + self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub(crate) fn renormalized(self) -> Self {
        let n = self.norm();
        UnitQuaternion { w: self.w / n, x: self.x / n, y: self.y / n, z: self.z / n }
    }

    pub fn rotate(&self, v: Vec3) -> Vec3 {
        // v' = v + 2w(u × v) + 2 u × (u × v)
        let u = Vec3::new(self.x, self.y, self.z);
        let t = u.cross(v) * 2.0;
        v + t * self.w + u.cross(t)
    }

    /// Row-major 3×3 rotation matrix.
    pub fn to_matrix(&self) -> [[f64; 3]; 3] {
        let (w, x, y, z) = (self.w, self.x, self.y, self.z);
        [
            [1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - w * z), 2.0 * (x * z + w * y)],
            [2.0 * (x * y + w * z), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - w * x)],
            [2.0 * (x * z - w * y), 2.0 * (y * z + w * x), 1.0 - 2.0 * (x * x + y * y)],
        ]
    }

    /// Spherical interpolation along the shorter arc. `t` is not range-checked here.
    pub fn slerp(&self, other: &UnitQuaternion, t: f64) -> Self {
        let mut b = *other;
        let mut d = self.dot(&b);
        if d < 0.0 {
            b = UnitQuaternion { w: -b.w, x: -b.x, y: -b.y, z: -b.z };
            d = -d;
        }
        if d > SLERP_NLERP_THRESHOLD {
            let q = UnitQuaternion {
                w: self.w + (b.w - self.w) * t,
                x: self.x + (b.x - self.x) * t,
                y: self.y + (b.y - self.y) * t,
                z: self.z + (b.z - self.z) * t,
            };
            return q.renormalized();
        }
        let theta = d.clamp(-1.0, 1.0).acos();
        let sin_theta = theta.sin();
        let wa = ((1.0 - t) * theta).sin() / sin_theta;
        let wb = (t * theta).sin() / sin_theta;
        UnitQuaternion {
            w: wa * self.w + wb * b.w,
            x: wa * self.x + wb * b.x,
            y: wa * self.y + wb * b.y,
            z: wa * self.z + wb * b.z,
        }
        .renormalized()
    }
}

impl Mul for UnitQuaternion {
    type Output = UnitQuaternion;

    /// Hamilton product; `(a * b).rotate(v) == a.rotate(b.rotate(v))`.
    fn mul(self, b: UnitQuaternion) -> UnitQuaternion {
        let a = self;
        UnitQuaternion {
            w: a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z,
            x: a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
            y: a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
            z: a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

    #[test]
    fn yaw_rotates_x_into_y() {
        let q = UnitQuaternion::from_yaw(FRAC_PI_2);
        let v = q.rotate(Vec3::X);
        assert!((v - Vec3::Y).norm() < 1e-12);
    }

    #[test]
    fn euler_round_trip() {
        let q = UnitQuaternion::from_euler(0.1, -0.2, 2.5);
        let (r, p, y) = q.to_euler();
        assert!((r - 0.1).abs() < 1e-12);
        assert!((p + 0.2).abs() < 1e-12);
        assert!((y - 2.5).abs() < 1e-12);
    }

    #[test]
    fn rotation_vector_round_trip() {
        let r = Vec3::new(0.3, -0.4, 1.2);
        let q = UnitQuaternion::from_rotation_vector(r);
        assert!((q.to_rotation_vector() - r).norm() < 1e-12);
        let tiny = Vec3::new(1e-10, 0.0, 0.0);
        assert!((UnitQuaternion::from_rotation_vector(tiny).to_rotation_vector() - tiny).norm() < 1e-18);
    }

    #[test]
    fn slerp_takes_short_arc() {
        let a = UnitQuaternion::from_yaw(0.0);
        let b = UnitQuaternion::from_yaw(FRAC_PI_2);
        let neg_b = UnitQuaternion::new(-b.w(), -b.x(), -b.y(), -b.z()).unwrap();
        let m = a.slerp(&neg_b, 0.5);
        assert!((m.yaw() - FRAC_PI_4).abs() < 1e-12);
    }

    #[test]
    fn slerp_near_identity_uses_nlerp() {
        let a = UnitQuaternion::IDENTITY;
        let b = UnitQuaternion::from_yaw(1e-6);
        let m = a.slerp(&b, 0.5);
        assert!((m.yaw() - 0.5e-6).abs() < 1e-12);
        assert!((m.norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn degenerate_quaternion_rejected() {
        assert!(UnitQuaternion::new(0.0, 0.0, 0.0, 0.0).is_err());
        assert!(UnitQuaternion::new_strict(2.0, 0.0, 0.0, 0.0).is_err());
        assert!(UnitQuaternion::new_strict(1.0, 0.0, 0.0, 0.0).is_ok());
    }

    #[test]
    fn angle_to_is_symmetric() {
        let a = UnitQuaternion::from_euler(0.2, 0.1, -0.3);
        let b = UnitQuaternion::from_euler(-0.1, 0.3, PI - 0.1);
        assert!((a.angle_to(&b) - b.angle_to(&a)).abs() < 1e-12);
    }
}
