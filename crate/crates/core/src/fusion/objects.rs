use std::collections::VecDeque;

use crate::dataset::{SensorId, Timestamp};
use crate::geometry::Vec3;

use super::munkres::{munkres_assign, CostMatrix};
use super::{FrustumDetection, FusionConfig};

/// Cost assigned to pairs that fail class or distance gating.
pub const GATED_COST: f64 = 1e12;

#[derive(Debug, Clone, PartialEq)]
pub struct FusedObject {
    pub id: u64,
    pub centroid: Vec3,
    pub class_id: u32,
    pub velocity: Vec3,
    /// Strictly increasing timestamps, oldest first.
    pub history: VecDeque<(Timestamp, Vec3)>,
    pub last_seen: Timestamp,
    pub source: SensorId,
}

impl FusedObject {
    pub fn predicted_centroid(&self, now: Timestamp) -> Vec3 {
        self.centroid + self.velocity * now.seconds_since(self.last_seen)
    }
}

/// One association step.
///
/// Objects unseen for longer than `ttl` are dropped first. The survivors are matched to
/// `detections` by minimum total predicted-centroid distance; a pair is admissible only
/// when the classes agree and the distance is within `gate`. Unmatched detections
/// become new objects numbered from `next_id`. The result is sorted by id.
pub fn aggregate_objects(
    existing: Vec<FusedObject>,
    detections: &[FrustumDetection],
    now: Timestamp,
    cfg: &FusionConfig,
    next_id: &mut u64,
) -> Vec<FusedObject> {
    let mut objects: Vec<FusedObject> =
        existing.into_iter().filter(|o| now.seconds_since(o.last_seen) <= cfg.ttl).collect();

    let predicted: Vec<Vec3> = objects.iter().map(|o| o.predicted_centroid(now)).collect();
    let measured: Vec<Vec3> = detections.iter().map(|d| d.center_point()).collect();
    let mut data = Vec::with_capacity(objects.len() * detections.len());
    for (o, p) in objects.iter().zip(&predicted) {
        for (d, m) in detections.iter().zip(&measured) {
            let dist = p.distance(*m);
            let admissible = o.class_id == d.class_id && dist <= cfg.gate && dist.is_finite();
            data.push(if admissible { dist } else { GATED_COST });
        }
    }
    let costs = CostMatrix::new(objects.len(), detections.len(), data).expect("distances are finite and non-negative");
    let mut matched = vec![false; detections.len()];
    for (r, c) in munkres_assign(&costs) {
        if costs.get(r, c) >= GATED_COST {
            continue;
        }
        matched[c] = true;
        update_object(&mut objects[r], predicted[r], measured[c], now, cfg);
    }

    for (d, m) in detections.iter().zip(&measured).zip(&matched).filter(|(_, &hit)| !hit).map(|(x, _)| x) {
        objects.push(FusedObject {
            id: *next_id,
            centroid: *m,
            class_id: d.class_id,
            velocity: Vec3::ZERO,
            history: VecDeque::from([(now, *m)]),
            last_seen: now,
            source: d.source.clone(),
        });
        *next_id += 1;
    }
    objects.sort_by_key(|o| o.id);
    objects
}

fn update_object(o: &mut FusedObject, predicted: Vec3, measured: Vec3, now: Timestamp, cfg: &FusionConfig) {
    let centroid = predicted + (measured - predicted) * cfg.smoothing;
    match o.history.back() {
        Some(&(t, _)) if t == now => {
            o.history.pop_back();
        }
        Some(&(t, _)) if t > now => return,
        _ => {}
    }
    o.history.push_back((now, centroid));
    while o.history.len() > cfg.history_length.max(2) {
        o.history.pop_front();
    }
    o.velocity = match o.history.len() {
        n if n >= 2 => {
            let (t0, p0) = o.history[n - 2];
            let (t1, p1) = o.history[n - 1];
            (p1 - p0) / t1.seconds_since(t0)
        }
        _ => Vec3::ZERO,
    };
    o.centroid = centroid;
    o.last_seen = now;
}

/// Owns the fused-object list and the id counter across frames.
#[derive(Debug, Clone)]
pub struct ObjectTracker {
    config: FusionConfig,
    objects: Vec<FusedObject>,
    next_id: u64,
}

impl ObjectTracker {
    pub fn new(config: FusionConfig) -> Self {
        ObjectTracker { config, objects: Vec::new(), next_id: 0 }
    }

    pub fn update(&mut self, detections: &[FrustumDetection], now: Timestamp) -> &[FusedObject] {
        let existing = std::mem::take(&mut self.objects);
        self.objects = aggregate_objects(existing, detections, now, &self.config, &mut self.next_id);
        &self.objects
    }

    pub fn objects(&self) -> &[FusedObject] {
        &self.objects
    }
}
