use serde::{Deserialize, Serialize};

use crate::geometry::Vec3;

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SceneBox {
    pub min: [f64; 3],
    pub max: [f64; 3],
    #[serde(default)]
    pub class_id: u32,
}

impl SceneBox {
    pub fn centroid(&self) -> Vec3 {
        (Vec3::from_array(self.min) + Vec3::from_array(self.max)) * 0.5
    }

    pub fn corners(&self) -> [Vec3; 8] {
        let (a, b) = (self.min, self.max);
        let mut out = [Vec3::ZERO; 8];
        for (i, c) in out.iter_mut().enumerate() {
            *c = Vec3::new(
                if i & 1 == 0 { a[0] } else { b[0] },
                if i & 2 == 0 { a[1] } else { b[1] },
                if i & 4 == 0 { a[2] } else { b[2] },
            );
        }
        out
    }

    /// Entry distance of the ray `origin + s·dir` (`dir` unit) with `s > 0`.
    pub fn intersect(&self, origin: Vec3, dir: Vec3) -> Option<f64> {
        let (o, d) = (origin.to_array(), dir.to_array());
        let mut t0 = f64::NEG_INFINITY;
        let mut t1 = f64::INFINITY;
        for k in 0..3 {
            if d[k].abs() < 1e-15 {
                if o[k] < self.min[k] || o[k] > self.max[k] {
                    return None;
                }
                continue;
            }
            let a = (self.min[k] - o[k]) / d[k];
            let b = (self.max[k] - o[k]) / d[k];
            t0 = t0.max(a.min(b));
            t1 = t1.min(a.max(b));
        }
        if t1 < t0 || t1 <= 0.0 {
            return None;
        }
        // a ray starting inside the box hits its far face
        Some(if t0 > 0.0 { t0 } else { t1 })
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ScenePlane {
    pub point: [f64; 3],
    pub normal: [f64; 3],
}

impl ScenePlane {
    pub fn intersect(&self, origin: Vec3, dir: Vec3) -> Option<f64> {
        let n = Vec3::from_array(self.normal);
        let denom = n.dot(dir);
        if denom.abs() < 1e-12 {
            return None;
        }
        let s = n.dot(Vec3::from_array(self.point) - origin) / denom;
        (s > 0.0).then_some(s)
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct Scene {
    #[serde(default)]
    pub boxes: Vec<SceneBox>,
    #[serde(default)]
    pub planes: Vec<ScenePlane>,
}

impl Scene {
    /// Nearest hit distance along a unit ray, if any lies within `max_range`.
    pub fn cast(&self, origin: Vec3, dir: Vec3, max_range: f64) -> Option<f64> {
        self.boxes
            .iter()
            .filter_map(|b| b.intersect(origin, dir))
            .chain(self.planes.iter().filter_map(|p| p.intersect(origin, dir)))
            .filter(|s| *s <= max_range)
            .min_by(f64::total_cmp)
    }
}
