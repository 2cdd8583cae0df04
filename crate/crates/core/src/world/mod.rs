//! The simulated 2D world: labeled entities, attachment hierarchy,
//! kinematics, collisions, prototypes and the camera.
//!
//! Coordinates are y-up; `position` is an entity's center.

mod collide;
mod proto;

use std::collections::{BTreeMap, BTreeSet};
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

pub use collide::{overlapping_pairs, overlapping_pairs_brute, Aabb, CollisionTracker, Phase};
pub use proto::{ProtoPart, Prototype};

pub type EntityId = u64;

/// Seconds per tick.
pub const DT: f64 = 1.0 / 60.0;

/// Number of ticks covering `secs`, rounded up.
pub fn ticks_for(secs: f64) -> u64 {
    let t = (secs / DT - 1e-9).ceil();
    if t > 0.0 {
        t as u64
    } else {
        0
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub fn new(x: f64, y: f64) -> Self {
        Vec2 { x, y }
    }

    pub fn length(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn dot(self, o: Vec2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    pub fn normalized(self) -> Vec2 {
        let l = self.length();
        if l == 0.0 {
            Vec2::ZERO
        } else {
            self * (1.0 / l)
        }
    }

    pub fn rotated(self, angle: f64) -> Vec2 {
        let (s, c) = angle.sin_cos();
        Vec2::new(self.x * c - self.y * s, self.x * s + self.y * c)
    }

    pub fn distance(self, o: Vec2) -> f64 {
        (self - o).length()
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, k: f64) -> Vec2 {
        Vec2::new(self.x * k, self.y * k)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum EntityKind {
    #[default]
    Sketch,
    Number,
    Text,
}

/// Parent-relative transform of an attached entity.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Local {
    pub offset: Vec2,
    pub angle: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Entity {
    pub id: EntityId,
    pub kind: EntityKind,
    pub nouns: Vec<String>,
    pub adjectives: Vec<String>,
    /// Intensifier chain per adjective ("very very fast").
    pub intensifiers: BTreeMap<String, Vec<String>>,
    pub position: Vec2,
    pub velocity: Vec2,
    pub angle: f64,
    pub angular_velocity: f64,
    pub size: Vec2,
    pub parent: Option<EntityId>,
    pub children: BTreeSet<EntityId>,
    pub local: Option<Local>,
    pub visible: bool,
    #[serde(rename = "static")]
    pub static_flag: bool,
    pub number: f64,
    pub text: String,
    pub payload: serde_json::Value,
}

impl Default for Entity {
    fn default() -> Self {
        Entity {
            id: 0,
            kind: EntityKind::Sketch,
            nouns: Vec::new(),
            adjectives: Vec::new(),
            intensifiers: BTreeMap::new(),
            position: Vec2::ZERO,
            velocity: Vec2::ZERO,
            angle: 0.0,
            angular_velocity: 0.0,
            size: Vec2::new(10.0, 10.0),
            parent: None,
            children: BTreeSet::new(),
            local: None,
            visible: true,
            static_flag: false,
            number: 0.0,
            text: String::new(),
            payload: serde_json::Value::Null,
        }
    }
}

impl Entity {
    pub fn sketch(nouns: &[&str], x: f64, y: f64, w: f64, h: f64) -> Self {
        Entity {
            nouns: nouns.iter().map(|s| s.to_string()).collect(),
            position: Vec2::new(x, y),
            size: Vec2::new(w, h),
            ..Entity::default()
        }
    }

    pub fn number(nouns: &[&str], value: f64) -> Self {
        Entity {
            kind: EntityKind::Number,
            number: value,
            static_flag: true,
            ..Entity::sketch(nouns, 0.0, 0.0, 40.0, 20.0)
        }
    }

    pub fn has_noun(&self, n: &str) -> bool {
        self.nouns.iter().any(|x| x == n)
    }

    pub fn has_adjective(&self, a: &str) -> bool {
        self.adjectives.iter().any(|x| x == a)
    }

    pub fn aabb(&self) -> Aabb {
        Aabb::rotated(self.position, self.size, self.angle)
    }
}

fn add_label(list: &mut Vec<String>, s: &str) -> bool {
    if list.iter().any(|x| x == s) {
        false
    } else {
        list.push(s.to_string());
        true
    }
}

fn remove_label(list: &mut Vec<String>, s: &str) -> bool {
    let before = list.len();
    list.retain(|x| x != s);
    before != list.len()
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Camera {
    pub center: Vec2,
    pub zoom: f64,
    pub follow: Option<EntityId>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum WorldEvent {
    Collision { a: EntityId, b: EntityId, phase: Phase },
    Appear { id: EntityId },
    Disappear { id: EntityId },
    Press { id: EntityId },
    Deleted { id: EntityId },
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error, Serialize, Deserialize)]
pub enum WorldError {
    #[error("unknown entity {0}")]
    UnknownEntity(EntityId),
    #[error("unknown prototype '{0}'")]
    UnknownPrototype(String),
    #[error("attaching {child} to {parent} would create a cycle")]
    Cycle { child: EntityId, parent: EntityId },
}

pub type WResult<T> = Result<T, WorldError>;

/// Label query: a noun (or any entity when `None`), required adjectives,
/// excluded adjectives and an optional ancestor constraint.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LabelQuery {
    pub noun: Option<String>,
    pub adjectives: Vec<String>,
    pub without: Vec<String>,
    pub scope: Option<Box<LabelQuery>>,
}

impl LabelQuery {
    pub fn noun(n: &str) -> Self {
        LabelQuery {
            noun: Some(n.to_string()),
            ..LabelQuery::default()
        }
    }

    pub fn within(mut self, scope: LabelQuery) -> Self {
        self.scope = Some(Box::new(scope));
        self
    }

    fn matches_labels(&self, e: &Entity) -> bool {
        self.noun.as_deref().is_none_or(|n| e.has_noun(n))
            && self.adjectives.iter().all(|a| e.has_adjective(a))
            && !self.without.iter().any(|a| e.has_adjective(a))
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct World {
    pub entities: BTreeMap<EntityId, Entity>,
    pub prototypes: BTreeMap<String, Prototype>,
    pub camera: Camera,
    pub tick: u64,
    next_id: EntityId,
    #[serde(skip)]
    pub collisions: CollisionTracker,
    #[serde(skip)]
    events: Vec<WorldEvent>,
}

impl World {
    pub fn new() -> Self {
        World {
            camera: Camera {
                zoom: 1.0,
                ..Camera::default()
            },
            ..World::default()
        }
    }

    pub fn get(&self, id: EntityId) -> WResult<&Entity> {
        self.entities.get(&id).ok_or(WorldError::UnknownEntity(id))
    }

    pub fn get_mut(&mut self, id: EntityId) -> WResult<&mut Entity> {
        self.entities.get_mut(&id).ok_or(WorldError::UnknownEntity(id))
    }

    pub fn alive(&self, id: EntityId) -> bool {
        self.entities.contains_key(&id)
    }

    pub fn next_id(&self) -> EntityId {
        self.next_id + 1
    }

    /// Inserts an entity. A non-zero `id` is kept (scenario files name their
    /// entities); otherwise a fresh one is assigned. Ids are never reused.
    pub fn insert(&mut self, mut e: Entity) -> EntityId {
        if e.id == 0 || self.entities.contains_key(&e.id) || e.id <= self.next_id {
            self.next_id += 1;
            e.id = self.next_id;
        } else {
            self.next_id = e.id;
        }
        let parent = e.parent.take();
        e.children.clear();
        e.local = None;
        let id = e.id;
        self.entities.insert(id, e);
        if let Some(p) = parent {
            // a dangling parent in a scenario file is ignored
            let _ = self.attach(id, p);
        }
        id
    }

    /// Adds an entity created during the run and reports its appearance.
    pub fn create(&mut self, e: Entity) -> EntityId {
        let id = self.insert(e);
        self.events.push(WorldEvent::Appear { id });
        id
    }

    pub fn push_event(&mut self, ev: WorldEvent) {
        self.events.push(ev);
    }

    pub fn drain_events(&mut self) -> Vec<WorldEvent> {
        std::mem::take(&mut self.events)
    }

    pub fn ancestors(&self, id: EntityId) -> Vec<EntityId> {
        let mut out = Vec::new();
        let mut cur = self.entities.get(&id).and_then(|e| e.parent);
        while let Some(p) = cur {
            out.push(p);
            cur = self.entities.get(&p).and_then(|e| e.parent);
        }
        out
    }

    /// `id` and everything attached below it, parents first.
    pub fn subtree(&self, id: EntityId) -> Vec<EntityId> {
        let mut out = Vec::new();
        let mut stack = vec![id];
        while let Some(x) = stack.pop() {
            if let Some(e) = self.entities.get(&x) {
                out.push(x);
                stack.extend(e.children.iter().rev());
            }
        }
        out
    }

    pub fn attach(&mut self, child: EntityId, parent: EntityId) -> WResult<()> {
        self.get(child)?;
        let p = self.get(parent)?.clone();
        if child == parent || self.ancestors(parent).contains(&child) {
            return Err(WorldError::Cycle { child, parent });
        }
        self.detach(child)?;
        let c = self.get_mut(child)?;
        c.parent = Some(parent);
        c.local = Some(Local {
            offset: (c.position - p.position).rotated(-p.angle),
            angle: c.angle - p.angle,
        });
        self.get_mut(parent)?.children.insert(child);
        Ok(())
    }

    /// Detaching keeps the current world-space pose.
    pub fn detach(&mut self, child: EntityId) -> WResult<()> {
        let c = self.get_mut(child)?;
        let Some(p) = c.parent.take() else {
            return Ok(());
        };
        c.local = None;
        if let Some(pe) = self.entities.get_mut(&p) {
            pe.children.remove(&child);
        }
        Ok(())
    }

    /// Deletes an entity with its attached subtree.
    pub fn delete(&mut self, id: EntityId) -> WResult<Vec<EntityId>> {
        self.get(id)?;
        self.detach(id)?;
        let gone = self.subtree(id);
        for x in &gone {
            self.entities.remove(x);
            self.events.push(WorldEvent::Deleted { id: *x });
            if self.camera.follow == Some(*x) {
                self.camera.follow = None;
            }
        }
        Ok(gone)
    }

    pub fn add_noun(&mut self, id: EntityId, noun: &str) -> WResult<bool> {
        Ok(add_label(&mut self.get_mut(id)?.nouns, noun))
    }

    pub fn remove_noun(&mut self, id: EntityId, noun: &str) -> WResult<bool> {
        Ok(remove_label(&mut self.get_mut(id)?.nouns, noun))
    }

    /// Adds an adjective. "visible", "invisible" and "static" act on flags
    /// rather than being stored.
    pub fn add_adjective(&mut self, id: EntityId, adj: &str) -> WResult<bool> {
        match adj {
            "visible" => self.set_visible(id, true),
            "invisible" => self.set_visible(id, false),
            "static" => {
                let e = self.get_mut(id)?;
                let changed = !e.static_flag;
                e.static_flag = true;
                Ok(changed)
            }
            _ => Ok(add_label(&mut self.get_mut(id)?.adjectives, adj)),
        }
    }

    pub fn remove_adjective(&mut self, id: EntityId, adj: &str) -> WResult<bool> {
        match adj {
            "visible" => self.set_visible(id, false),
            "invisible" => self.set_visible(id, true),
            "static" => {
                let e = self.get_mut(id)?;
                let changed = e.static_flag;
                e.static_flag = false;
                Ok(changed)
            }
            _ => {
                let e = self.get_mut(id)?;
                e.intensifiers.remove(adj);
                Ok(remove_label(&mut e.adjectives, adj))
            }
        }
    }

    pub fn set_visible(&mut self, id: EntityId, visible: bool) -> WResult<bool> {
        let e = self.get_mut(id)?;
        if e.visible == visible {
            return Ok(false);
        }
        e.visible = visible;
        self.events.push(if visible {
            WorldEvent::Appear { id }
        } else {
            WorldEvent::Disappear { id }
        });
        Ok(true)
    }

    /// Moves an entity by a world-space delta; attached entities move in
    /// their parent's frame.
    pub fn translate(&mut self, id: EntityId, delta: Vec2) -> WResult<()> {
        let parent_angle = match self.get(id)?.parent {
            Some(p) => Some(self.get(p)?.angle),
            None => None,
        };
        let e = self.get_mut(id)?;
        match (&mut e.local, parent_angle) {
            (Some(l), Some(a)) => l.offset = l.offset + delta.rotated(-a),
            _ => e.position = e.position + delta,
        }
        self.propagate(id);
        Ok(())
    }

    pub fn set_position(&mut self, id: EntityId, to: Vec2) -> WResult<()> {
        let at = self.get(id)?.position;
        self.translate(id, to - at)
    }

    /// Recomputes world poses of everything attached below `id`.
    pub fn propagate(&mut self, id: EntityId) {
        for x in self.subtree(id) {
            self.propagate_one(x);
        }
    }

    /// Applies velocities for one tick, roots before their attachments.
    pub fn integrate(&mut self, dt: f64) {
        let roots: Vec<EntityId> = self
            .entities
            .values()
            .filter(|e| e.parent.is_none())
            .map(|e| e.id)
            .collect();
        for r in roots {
            for x in self.subtree(r) {
                let e = &self.entities[&x];
                let (v, w) = (e.velocity, e.angular_velocity);
                let pa = e.parent.and_then(|p| self.entities.get(&p)).map(|p| p.angle);
                let e = self.entities.get_mut(&x).expect("present");
                match (&mut e.local, pa) {
                    (Some(l), Some(pa)) => {
                        l.angle += w * dt;
                        l.offset = l.offset + (v * dt).rotated(-pa);
                    }
                    _ => {
                        e.position = e.position + v * dt;
                        e.angle += w * dt;
                    }
                }
                self.propagate_one(x);
            }
        }
    }

    fn propagate_one(&mut self, x: EntityId) {
        let Some(e) = self.entities.get(&x) else { return };
        let (Some(p), Some(l)) = (e.parent, e.local) else {
            return;
        };
        let pe = &self.entities[&p];
        let (pp, pa) = (pe.position, pe.angle);
        let e = self.entities.get_mut(&x).expect("present");
        e.position = pp + l.offset.rotated(pa);
        e.angle = pa + l.angle;
    }

    pub fn update_camera(&mut self) {
        if let Some(t) = self.camera.follow {
            match self.entities.get(&t) {
                Some(e) => self.camera.center = e.position,
                None => self.camera.follow = None,
            }
        }
    }

    /// Runs collision detection and queues the resulting events.
    pub fn detect_collisions(&mut self) -> Vec<(EntityId, EntityId, Phase)> {
        let boxes: Vec<(EntityId, Aabb)> = self
            .entities
            .values()
            .filter(|e| !e.static_flag)
            .map(|e| (e.id, e.aabb()))
            .collect();
        let pairs: BTreeSet<(EntityId, EntityId)> = overlapping_pairs(&boxes)
            .into_iter()
            .filter(|&(a, b)| !self.ancestors(a).contains(&b) && !self.ancestors(b).contains(&a))
            .collect();
        let out = self.collisions.update(pairs);
        for &(a, b, phase) in &out {
            self.events.push(WorldEvent::Collision { a, b, phase });
        }
        out
    }

    /// Entities matching the query, in id order.
    pub fn query(&self, q: &LabelQuery) -> Vec<EntityId> {
        self.entities
            .values()
            .filter(|e| self.matches(e, q))
            .map(|e| e.id)
            .collect()
    }

    pub fn matches(&self, e: &Entity, q: &LabelQuery) -> bool {
        if !q.matches_labels(e) {
            return false;
        }
        match &q.scope {
            None => true,
            Some(s) => self
                .ancestors(e.id)
                .iter()
                .filter_map(|a| self.entities.get(a))
                .any(|a| self.matches(a, s)),
        }
    }
}
