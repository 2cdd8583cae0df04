use serde::{Deserialize, Serialize};

use super::{Entity, EntityId, EntityKind, Vec2, WResult, World, WorldError, WorldEvent};

/// One entity of a saved subtree; `offset` is relative to the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProtoPart {
    pub parent: Option<usize>,
    pub offset: Vec2,
    pub angle: f64,
    pub kind: EntityKind,
    pub nouns: Vec<String>,
    pub adjectives: Vec<String>,
    pub size: Vec2,
    pub visible: bool,
    pub number: f64,
    pub text: String,
    pub payload: serde_json::Value,
}

impl Default for ProtoPart {
    fn default() -> Self {
        ProtoPart {
            parent: None,
            offset: Vec2::ZERO,
            angle: 0.0,
            kind: EntityKind::Sketch,
            nouns: Vec::new(),
            adjectives: Vec::new(),
            size: Vec2::new(10.0, 10.0),
            visible: true,
            number: 0.0,
            text: String::new(),
            payload: serde_json::Value::Null,
        }
    }
}

/// A named entity subtree; parts are stored parents first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prototype {
    pub name: String,
    pub parts: Vec<ProtoPart>,
}

impl Prototype {
    /// Single-part prototype labeled with its own name.
    pub fn simple(name: &str, w: f64, h: f64) -> Self {
        Prototype {
            name: name.to_string(),
            parts: vec![ProtoPart {
                nouns: vec![name.to_string()],
                size: Vec2::new(w, h),
                ..ProtoPart::default()
            }],
        }
    }

    pub fn size(&self) -> Vec2 {
        self.parts.first().map_or(Vec2::ZERO, |p| p.size)
    }
}

impl World {
    /// Records the subtree under `root` as prototype `name`; the latest save wins.
    pub fn save_prototype(&mut self, name: &str, root: EntityId) -> WResult<()> {
        let origin = self.get(root)?.position;
        let ids = self.subtree(root);
        let parts = ids
            .iter()
            .map(|id| {
                let e = &self.entities[id];
                ProtoPart {
                    parent: e
                        .parent
                        .filter(|_| *id != root)
                        .and_then(|p| ids.iter().position(|x| *x == p)),
                    offset: e.position - origin,
                    angle: e.angle,
                    kind: e.kind,
                    nouns: e.nouns.clone(),
                    adjectives: e.adjectives.clone(),
                    size: e.size,
                    visible: e.visible,
                    number: e.number,
                    text: e.text.clone(),
                    payload: e.payload.clone(),
                }
            })
            .collect();
        self.add_prototype(Prototype {
            name: name.to_string(),
            parts,
        });
        Ok(())
    }

    pub fn add_prototype(&mut self, p: Prototype) {
        self.prototypes.insert(p.name.clone(), p);
    }

    pub fn prototype(&self, name: &str) -> WResult<&Prototype> {
        self.prototypes
            .get(name)
            .ok_or_else(|| WorldError::UnknownPrototype(name.to_string()))
    }

    /// Instantiates a prototype with fresh ids, its root centered at `at`.
    pub fn spawn(&mut self, name: &str, at: Vec2) -> WResult<EntityId> {
        let proto = self.prototype(name)?.clone();
        let mut made: Vec<EntityId> = Vec::with_capacity(proto.parts.len());
        for part in &proto.parts {
            let id = self.create(Entity {
                kind: part.kind,
                nouns: part.nouns.clone(),
                adjectives: part.adjectives.clone(),
                position: at + part.offset,
                angle: part.angle,
                size: part.size,
                visible: part.visible,
                number: part.number,
                text: part.text.clone(),
                payload: part.payload.clone(),
                ..Entity::default()
            });
            if let Some(p) = part.parent.and_then(|i| made.get(i)) {
                self.attach(id, *p)?;
            }
            made.push(id);
        }
        Ok(made[0])
    }

    /// Duplicates an entity subtree next to the original.
    pub fn copy(&mut self, id: EntityId) -> WResult<EntityId> {
        let e = self.get(id)?;
        let at = e.position + Vec2::new(e.size.x, 0.0);
        let key = format!("\u{0}copy{id}");
        self.save_prototype(&key, id)?;
        let out = self.spawn(&key, at);
        self.prototypes.remove(&key);
        out
    }

    /// Replaces the look and labels of `id` with the prototype's root; the
    /// id is kept.
    pub fn transform_into(&mut self, id: EntityId, name: &str) -> WResult<()> {
        let part = self
            .prototype(name)?
            .parts
            .first()
            .cloned()
            .ok_or_else(|| WorldError::UnknownPrototype(name.to_string()))?;
        let e = self.get_mut(id)?;
        e.kind = part.kind;
        e.nouns = part.nouns;
        e.adjectives = part.adjectives;
        e.size = part.size;
        e.payload = part.payload;
        e.number = part.number;
        e.text = part.text;
        self.push_event(WorldEvent::Appear { id });
        Ok(())
    }

    /// Fills a region's bounds with a grid of prototype instances, top row
    /// first, then deletes the region.
    pub fn pack_region(&mut self, region: EntityId, name: &str) -> WResult<Vec<EntityId>> {
        let r = self.get(region)?.aabb();
        let cell = self.prototype(name)?.size();
        let fit = |span: f64, step: f64| {
            if step > 0.0 {
                (span / step + 1e-9).floor().max(0.0) as usize
            } else {
                0
            }
        };
        let (cols, rows) = (fit(r.size().x, cell.x), fit(r.size().y, cell.y));
        let mut out = Vec::with_capacity(cols * rows);
        for row in 0..rows {
            for col in 0..cols {
                let at = Vec2::new(
                    r.min.x + cell.x * (col as f64 + 0.5),
                    r.max.y - cell.y * (row as f64 + 0.5),
                );
                out.push(self.spawn(name, at)?);
            }
        }
        self.delete(region)?;
        Ok(out)
    }
}
