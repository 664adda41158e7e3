use super::{GeometryError, RigidTransform, Vec3};

/// Pyramid with apex at `origin`, bounded laterally by the planes spanned by consecutive
/// corner rays and cut by two planes perpendicular to `axis` at `near` and `far`.
///
/// Corner order follows the image: top-left, top-right, bottom-right, bottom-left.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Frustum {
    origin: Vec3,
    corners: [Vec3; 4],
    axis: Vec3,
    near: f64,
    far: f64,
}

impl Frustum {
    pub fn new(origin: Vec3, corners: [Vec3; 4], axis: Vec3, near: f64, far: f64) -> Result<Self, GeometryError> {
        if !(near > 0.0 && near < far && far.is_finite()) {
            return Err(GeometryError::InvalidFrustum(format!("need 0 < near < far, got near={near} far={far}")));
        }
        let axis = axis
            .normalized()
            .ok_or_else(|| GeometryError::InvalidFrustum("zero-length axis".into()))?;
        let mut rays = [Vec3::ZERO; 4];
        for (dst, c) in rays.iter_mut().zip(corners.iter()) {
            *dst = c
                .normalized()
                .ok_or_else(|| GeometryError::InvalidFrustum("zero-length corner ray".into()))?;
            if dst.dot(axis) <= 0.0 {
                return Err(GeometryError::InvalidFrustum("corner ray points away from axis".into()));
            }
        }
        for i in 0..4 {
            for j in (i + 1)..4 {
                if rays[i].cross(rays[j]).norm() < 1e-12 {
                    return Err(GeometryError::InvalidFrustum(format!("corner rays {i} and {j} are parallel")));
                }
            }
        }
        Ok(Frustum { origin, corners: rays, axis, near, far })
    }

    pub fn origin(&self) -> Vec3 {
        self.origin
    }
    pub fn corners(&self) -> &[Vec3; 4] {
        &self.corners
    }
    pub fn axis(&self) -> Vec3 {
        self.axis
    }
    pub fn near(&self) -> f64 {
        self.near
    }
    pub fn far(&self) -> f64 {
        self.far
    }

    /// Point on the axis at `distance` from the origin.
    pub fn point_on_axis(&self, distance: f64) -> Vec3 {
        self.origin + self.axis * distance
    }

    /// Intersections of the corner rays with the plane perpendicular to the axis at
    /// `distance`.
    pub fn cut(&self, distance: f64) -> [Vec3; 4] {
        self.corners
            .map(|r| self.origin + r * (distance / r.dot(self.axis)))
    }

    /// Inclusive point-in-volume test with tolerance `eps` (meters).
    pub fn contains(&self, p: Vec3, eps: f64) -> bool {
        let d = p - self.origin;
        let s = d.dot(self.axis);
        if s < self.near - eps || s > self.far + eps {
            return false;
        }
        (0..4).all(|i| {
            let mut n = self.corners[i].cross(self.corners[(i + 1) % 4]);
            if n.dot(self.axis) < 0.0 {
                n = -n;
            }
            let n = n / n.norm();
            d.dot(n) >= -eps
        })
    }

    pub fn transformed(&self, t: &RigidTransform) -> Frustum {
        Frustum {
            origin: t.apply(self.origin),
            corners: self.corners.map(|c| t.apply_vector(c)),
            axis: t.apply_vector(self.axis),
            near: self.near,
            far: self.far,
        }
    }
}
