use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{EntityId, Vec2};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: Vec2,
    pub max: Vec2,
}

impl Aabb {
    pub fn new(center: Vec2, size: Vec2) -> Self {
        let h = size * 0.5;
        Aabb {
            min: center - h,
            max: center + h,
        }
    }

    /// Bounds of a `size` box rotated by `angle` about its center.
    pub fn rotated(center: Vec2, size: Vec2, angle: f64) -> Self {
        if angle == 0.0 {
            return Aabb::new(center, size);
        }
        let (s, c) = angle.sin_cos();
        let (s, c) = (s.abs(), c.abs());
        let hx = c * size.x * 0.5 + s * size.y * 0.5;
        let hy = s * size.x * 0.5 + c * size.y * 0.5;
        Aabb {
            min: Vec2::new(center.x - hx, center.y - hy),
            max: Vec2::new(center.x + hx, center.y + hy),
        }
    }

    /// Strict overlap: touching edges do not count.
    pub fn overlaps(&self, o: &Aabb) -> bool {
        self.min.x < o.max.x && o.min.x < self.max.x && self.min.y < o.max.y && o.min.y < self.max.y
    }

    pub fn center(&self) -> Vec2 {
        (self.min + self.max) * 0.5
    }

    pub fn size(&self) -> Vec2 {
        self.max - self.min
    }
}

fn ordered(a: EntityId, b: EntityId) -> (EntityId, EntityId) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

/// Overlapping pairs by sweep and prune along x.
pub fn overlapping_pairs(boxes: &[(EntityId, Aabb)]) -> BTreeSet<(EntityId, EntityId)> {
    let mut sorted: Vec<&(EntityId, Aabb)> = boxes.iter().collect();
    sorted.sort_by(|a, b| a.1.min.x.total_cmp(&b.1.min.x).then(a.0.cmp(&b.0)));
    let mut active: Vec<&(EntityId, Aabb)> = Vec::new();
    let mut out = BTreeSet::new();
    for cur in sorted {
        active.retain(|a| a.1.max.x > cur.1.min.x);
        for a in &active {
            if a.1.overlaps(&cur.1) {
                out.insert(ordered(a.0, cur.0));
            }
        }
        active.push(cur);
    }
    out
}

/// All-pairs reference implementation.
pub fn overlapping_pairs_brute(boxes: &[(EntityId, Aabb)]) -> BTreeSet<(EntityId, EntityId)> {
    let mut out = BTreeSet::new();
    for (i, a) in boxes.iter().enumerate() {
        for b in &boxes[i + 1..] {
            if a.1.overlaps(&b.1) {
                out.insert(ordered(a.0, b.0));
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Phase {
    Begin,
    Continue,
    End,
}

/// Turns per-tick overlap sets into BEGIN/CONTINUE/END phases.
#[derive(Debug, Clone, Default)]
pub struct CollisionTracker {
    current: BTreeSet<(EntityId, EntityId)>,
}

impl CollisionTracker {
    pub fn update(&mut self, now: BTreeSet<(EntityId, EntityId)>) -> Vec<(EntityId, EntityId, Phase)> {
        let mut out = Vec::new();
        for p in self.current.union(&now) {
            let phase = match (self.current.contains(p), now.contains(p)) {
                (true, true) => Phase::Continue,
                (false, true) => Phase::Begin,
                _ => Phase::End,
            };
            out.push((p.0, p.1, phase));
        }
        self.current = now;
        out
    }

    pub fn overlapping(&self) -> &BTreeSet<(EntityId, EntityId)> {
        &self.current
    }
}
