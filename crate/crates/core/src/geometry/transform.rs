use super::{GeometryError, UnitQuaternion, Vec3};

/// Proper rigid motion `p ↦ R p + t`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RigidTransform {
    pub rotation: UnitQuaternion,
    pub translation: Vec3,
}

impl RigidTransform {
    pub const IDENTITY: RigidTransform =
        RigidTransform { rotation: UnitQuaternion::IDENTITY, translation: Vec3::ZERO };

    pub fn new(rotation: UnitQuaternion, translation: Vec3) -> Self {
        RigidTransform { rotation, translation }
    }

    pub fn from_translation(translation: Vec3) -> Self {
        RigidTransform { rotation: UnitQuaternion::IDENTITY, translation }
    }

    pub fn from_rotation(rotation: UnitQuaternion) -> Self {
        RigidTransform { rotation, translation: Vec3::ZERO }
    }

    pub fn apply(&self, p: Vec3) -> Vec3 {
        self.rotation.rotate(p) + self.translation
    }

    /// Rotation only; for direction vectors.
    pub fn apply_vector(&self, v: Vec3) -> Vec3 {
        self.rotation.rotate(v)
    }

    pub fn inverse(&self) -> Self {
        let r = self.rotation.inverse();
        RigidTransform { rotation: r, translation: -r.rotate(self.translation) }
    }

    /// `self ∘ inner`: the result applies `inner` first, then `self`.
    pub fn then_after(&self, inner: &RigidTransform) -> Self {
        compose(self, inner)
    }

    /// Row-major homogeneous matrix.
    pub fn to_matrix(&self) -> [[f64; 4]; 4] {
        let r = self.rotation.to_matrix();
        let t = self.translation;
        [
            [r[0][0], r[0][1], r[0][2], t.x],
            [r[1][0], r[1][1], r[1][2], t.y],
            [r[2][0], r[2][1], r[2][2], t.z],
            [0.0, 0.0, 0.0, 1.0],
        ]
    }
}

/// Composition `a ∘ b`, i.e. `compose(a, b).apply(p) == a.apply(b.apply(p))`.
pub fn compose(a: &RigidTransform, b: &RigidTransform) -> RigidTransform {
    RigidTransform {
        rotation: (a.rotation * b.rotation).renormalized(),
        translation: a.rotation.rotate(b.translation) + a.translation,
    }
}

/// Pose interpolation: translation lerp, rotation slerp along the shorter arc.
pub fn interpolate_pose(
    p0: &RigidTransform,
    p1: &RigidTransform,
    t: f64,
) -> Result<RigidTransform, GeometryError> {
    if !(0.0..=1.0).contains(&t) {
        return Err(GeometryError::InterpolationOutOfRange(t));
    }
    if t == 0.0 {
        return Ok(*p0);
    }
    if t == 1.0 {
        return Ok(*p1);
    }
    Ok(RigidTransform {
        rotation: p0.rotation.slerp(&p1.rotation, t),
        translation: p0.translation.lerp(p1.translation, t),
    })
}

/// Ordered sequence of transforms evaluated lazily.
///
/// Elements are applied right to left: for a chain `[A, B]` a point is mapped by `B`
/// first and then by `A`. [`TransformChain::collapse`] folds the list into a single
/// transform so that a batch of points is touched exactly once.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TransformChain {
    elements: Vec<RigidTransform>,
}

impl TransformChain {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_elements(elements: Vec<RigidTransform>) -> Self {
        TransformChain { elements }
    }

    pub fn elements(&self) -> &[RigidTransform] {
        &self.elements
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    /// Appends `t` at the tail; it acts on points before every existing element.
    pub fn push_inner(&mut self, t: RigidTransform) {
        self.elements.push(t);
    }

    /// New chain with `outer` applied after the whole existing chain, e.g. a
    /// local-to-camera transform added on top of a sensor-to-local chain. `self` is left
    /// untouched.
    pub fn followed_by(&self, outer: RigidTransform) -> TransformChain {
        let mut elements = Vec::with_capacity(self.elements.len() + 1);
        elements.push(outer);
        elements.extend_from_slice(&self.elements);
        TransformChain { elements }
    }

    /// Left fold `((e0 ∘ e1) ∘ e2) ∘ …`.
    pub fn collapse(&self) -> RigidTransform {
        self.elements
            .iter()
            .fold(RigidTransform::IDENTITY, |acc, e| compose(&acc, e))
    }
}

/// Maps every point through the chain, collapsing it once first.
pub fn evaluate_chain(chain: &TransformChain, points: &[Vec3]) -> Vec<Vec3> {
    if chain.is_empty() {
        return points.to_vec();
    }
    let t = chain.collapse();
    points.iter().map(|p| t.apply(*p)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

    #[test]
    fn compose_with_identity() {
        let t = RigidTransform::new(UnitQuaternion::from_euler(0.1, 0.2, 0.3), Vec3::new(1.0, 2.0, 3.0));
        assert_eq!(compose(&RigidTransform::IDENTITY, &t).translation, t.translation);
        assert!(compose(&RigidTransform::IDENTITY, &t).rotation.angle_to(&t.rotation) < 1e-12);
    }

    #[test]
    fn pure_translations_add() {
        let a = RigidTransform::from_translation(Vec3::new(1.0, 0.0, 0.0));
        let b = RigidTransform::from_translation(Vec3::new(0.0, 2.0, 0.0));
        assert_eq!(compose(&a, &b).translation, Vec3::new(1.0, 2.0, 0.0));
    }

    #[test]
    fn inverse_round_trip() {
        let t = RigidTransform::new(UnitQuaternion::from_euler(-0.4, 0.7, 2.0), Vec3::new(-3.0, 5.0, 0.5));
        let p = Vec3::new(10.0, -2.0, 7.0);
        assert!((t.inverse().apply(t.apply(p)) - p).norm() < 1e-9);
    }

    #[test]
    fn interpolation_endpoints_and_midpoint() {
        let p0 = RigidTransform::IDENTITY;
        let p1 = RigidTransform::from_translation(Vec3::new(10.0, 0.0, 0.0));
        assert_eq!(interpolate_pose(&p0, &p1, 0.0).unwrap(), p0);
        assert_eq!(interpolate_pose(&p0, &p1, 1.0).unwrap(), p1);
        assert_eq!(interpolate_pose(&p0, &p1, 0.5).unwrap().translation, Vec3::new(5.0, 0.0, 0.0));
    }

    #[test]
    fn interpolation_halves_yaw() {
        // axis-angle halving: half of a 90° yaw is a 45° yaw about the same axis
        let p1 = RigidTransform::from_rotation(UnitQuaternion::from_yaw(FRAC_PI_2));
        let mid = interpolate_pose(&RigidTransform::IDENTITY, &p1, 0.5).unwrap();
        let rv = mid.rotation.to_rotation_vector();
        assert!((rv.z - FRAC_PI_4).abs() < 1e-9);
        assert!(rv.x.abs() < 1e-12 && rv.y.abs() < 1e-12);
    }

    #[test]
    fn interpolation_rejects_out_of_range() {
        let p = RigidTransform::IDENTITY;
        assert!(interpolate_pose(&p, &p, -0.01).is_err());
        assert!(interpolate_pose(&p, &p, 1.01).is_err());
        assert!(interpolate_pose(&p, &p, f64::NAN).is_err());
    }

    #[test]
    fn empty_chain_is_identity() {
        let pts = vec![Vec3::new(1.0, 2.0, 3.0), Vec3::new(-1.0, 0.0, 4.0)];
        assert_eq!(evaluate_chain(&TransformChain::new(), &pts), pts);
    }

    #[test]
    fn followed_by_does_not_mutate_source() {
        let base = TransformChain::from_elements(vec![RigidTransform::from_translation(Vec3::X)]);
        let before = base.collapse();
        let ext = base.followed_by(RigidTransform::from_translation(Vec3::Y));
        assert_eq!(base.collapse(), before);
        assert_eq!(ext.len(), 2);
        assert_eq!(ext.collapse().apply(Vec3::ZERO), Vec3::new(1.0, 1.0, 0.0));
    }
}
