//! Fills noun slots of a graph with world entities, and applies labels.

use serde::{Deserialize, Serialize};

use crate::semantic::{Count, ElementId, NodeType, NounSpec, Reserved, S2Element, Value};
use crate::world::{EntityId, LabelQuery, World};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum SlotMode {
    Instances { ids: Vec<EntityId> },
    /// Any entity matching the labels; used by rules.
    Type { query: LabelQuery },
    /// "a/an X": one match picked each time the action starts.
    Deferred { query: LabelQuery },
    /// Names a saved prototype ("create wind").
    Prototype { name: String },
    Reserved { which: Reserved },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SlotSource {
    LabelMatch,
    Deixis,
    UserLink,
    Coreference,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error, Serialize, Deserialize)]
pub enum BindError {
    #[error("nothing matches slot {0}")]
    NoMatch(ElementId),
    #[error("slot {node} wants {wanted} entities, found {found}")]
    InsufficientCount { node: ElementId, wanted: usize, found: usize },
    #[error("no prototype named '{1}' for slot {0}")]
    UnknownPrototype(ElementId, String),
    #[error("no selected entity for deictic slot {0}")]
    NoSelection(ElementId),
    #[error("the command is already confirmed")]
    SlotImmutable,
    #[error("unknown entity {0}")]
    UnknownEntity(EntityId),
    #[error("unknown slot {0}")]
    UnknownSlot(ElementId),
    #[error("'{0}' cannot be used as a label")]
    WordNotLabelable(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BindingSlot {
    pub node: ElementId,
    pub lemma: String,
    #[serde(flatten)]
    pub mode: SlotMode,
    pub source: SlotSource,
    pub error: Option<BindError>,
}

impl BindingSlot {
    pub fn instances(&self) -> &[EntityId] {
        match &self.mode {
            SlotMode::Instances { ids } => ids,
            _ => &[],
        }
    }

    /// Links an entity (labeled or not) into this slot.
    pub fn relink(&mut self, world: &World, entity: EntityId, replace: bool) -> Result<(), BindError> {
        if !world.alive(entity) {
            return Err(BindError::UnknownEntity(entity));
        }
        let mut ids = if replace { Vec::new() } else { self.instances().to_vec() };
        if !ids.contains(&entity) {
            ids.push(entity);
        }
        self.mode = SlotMode::Instances { ids };
        self.source = SlotSource::UserLink;
        self.error = None;
        Ok(())
    }

    pub fn unlink(&mut self, entity: EntityId) -> Result<(), BindError> {
        let mut ids = self.instances().to_vec();
        if !ids.contains(&entity) {
            return Err(BindError::UnknownEntity(entity));
        }
        ids.retain(|x| *x != entity);
        self.error = ids.is_empty().then_some(BindError::NoMatch(self.node));
        self.mode = SlotMode::Instances { ids };
        self.source = SlotSource::UserLink;
        Ok(())
    }
}

/// Label query for a noun view.
pub fn query_for(spec: &NounSpec) -> LabelQuery {
    let any = spec.deictic || spec.reserved == Some(Reserved::Thing);
    LabelQuery {
        noun: if any { None } else { Some(spec.lemma.clone()) },
        adjectives: spec.adjectives.clone(),
        without: Vec::new(),
        scope: spec.scope.as_deref().map(|s| Box::new(query_for(s))),
    }
}

struct Ctx<'a> {
    in_rule: bool,
    verb: &'a str,
    prep: Option<&'a str>,
}

fn prototype_position(verb: &str, role: NodeType, prep: Option<&str>) -> bool {
    matches!(
        (verb, role, prep),
        ("create" | "make" | "draw", NodeType::DirectObject, _)
            | ("transform" | "turn", NodeType::Object, Some("into"))
            | ("pack" | "fill", NodeType::Object, Some("with"))
    )
}

fn collect<'a>(e: &'a S2Element, ctx: Ctx<'a>, out: &mut Vec<(&'a S2Element, bool, bool)>) {
    let in_rule = ctx.in_rule || e.node_type == NodeType::TriggerResponse;
    let verb = if e.node_type == NodeType::Action { e.label.as_str() } else { ctx.verb };
    let prep = if e.node_type == NodeType::Preposition {
        Some(e.label.as_str())
    } else if e.node_type == NodeType::Action {
        None
    } else {
        ctx.prep
    };
    if e.is_noun() {
        let predicate = matches!(verb, "be" | "become") && e.node_type == NodeType::DirectObject;
        if !predicate {
            out.push((e, in_rule, prototype_position(verb, e.node_type, prep)));
        }
        // nouns under a noun's preposition only scope their head
        return;
    }
    for list in e.children.values() {
        for c in list {
            collect(c, Ctx { in_rule, verb, prep }, out);
        }
    }
}

/// Binds every noun of `root`. `selection` holds the entities the user is
/// touching, matched to deictic words in mention order.
pub fn bind(root: &S2Element, world: &World, selection: &[EntityId]) -> Vec<BindingSlot> {
    let mut nouns = Vec::new();
    collect(root, Ctx { in_rule: false, verb: "", prep: None }, &mut nouns);
    let mut deictic: Vec<ElementId> = nouns
        .iter()
        .filter(|(e, _, _)| e.refers_to.is_none() && e.noun_spec().is_some_and(|s| s.deictic))
        .map(|(e, _, _)| e.id)
        .collect();
    deictic.sort_by_key(|id| root.find(*id).and_then(|e| e.token_ref));
    let mut next_sel = 0;
    let mut deixis: Vec<(ElementId, Result<Vec<EntityId>, BindError>)> = Vec::new();
    for id in deictic {
        let plural = root.find(id).and_then(|e| e.noun_spec()).is_some_and(|s| s.plural);
        let got: Vec<EntityId> = if plural {
            selection[next_sel.min(selection.len())..].to_vec()
        } else {
            selection.get(next_sel).copied().into_iter().collect()
        };
        next_sel += got.len();
        deixis.push((id, if got.is_empty() { Err(BindError::NoSelection(id)) } else { Ok(got) }));
    }

    let mut slots: Vec<BindingSlot> = Vec::new();
    for (e, in_rule, proto_pos) in nouns.iter().filter(|(e, _, _)| e.refers_to.is_none()) {
        let spec = e.noun_spec().expect("noun");
        let mut slot = BindingSlot {
            node: e.id,
            lemma: spec.lemma.clone(),
            mode: SlotMode::Instances { ids: Vec::new() },
            source: SlotSource::LabelMatch,
            error: None,
        };
        if let Some((_, r)) = deixis.iter().find(|(id, _)| *id == e.id) {
            slot.source = SlotSource::Deixis;
            match r {
                Ok(ids) => slot.mode = SlotMode::Instances { ids: ids.clone() },
                Err(err) => slot.error = Some(err.clone()),
            }
        } else if let Some(which) = spec.reserved.filter(|r| *r != Reserved::Thing) {
            slot.mode = SlotMode::Reserved { which };
        } else if *proto_pos {
            if world.prototypes.contains_key(&spec.lemma) {
                slot.mode = SlotMode::Prototype { name: spec.lemma.clone() };
            } else {
                slot.error = Some(BindError::UnknownPrototype(e.id, spec.lemma.clone()));
            }
        } else {
            let (mode, error) = bind_labels(e.id, &spec, world, *in_rule);
            slot.mode = mode;
            slot.error = error;
        }
        slots.push(slot);
    }
    for (e, _, _) in nouns.iter().filter(|(e, _, _)| e.refers_to.is_some()) {
        let ante = e.refers_to.expect("coreference");
        if let Some(src) = slots.iter().find(|s| s.node == ante).cloned() {
            slots.push(BindingSlot {
                node: e.id,
                source: SlotSource::Coreference,
                ..src
            });
        }
    }
    slots
}

fn bind_labels(
    node: ElementId,
    spec: &NounSpec,
    world: &World,
    in_rule: bool,
) -> (SlotMode, Option<BindError>) {
    let query = query_for(spec);
    let det = spec.determiner.as_deref();
    if matches!(det, Some("a" | "an")) {
        return (SlotMode::Deferred { query }, None);
    }
    let definite = matches!(det, Some("the" | "this" | "that" | "these" | "those"));
    if in_rule && !definite {
        return (SlotMode::Type { query }, None);
    }
    let found = world.query(&query);
    match spec.count {
        Count::All => (SlotMode::Instances { ids: found }, None),
        Count::Exactly(n) if det.is_none() && n == 1.0 && found.is_empty() => {
            (SlotMode::Instances { ids: found }, Some(BindError::NoMatch(node)))
        }
        Count::Exactly(n) => {
            let wanted = n.max(0.0) as usize;
            if found.is_empty() {
                (SlotMode::Instances { ids: found }, Some(BindError::NoMatch(node)))
            } else if definite && spec.plural {
                // "the platforms" selects every platform
                (SlotMode::Instances { ids: found }, None)
            } else if found.len() < wanted {
                let n = found.len();
                (
                    SlotMode::Instances { ids: found },
                    Some(BindError::InsufficientCount { node, wanted, found: n }),
                )
            } else {
                (SlotMode::Instances { ids: found[..wanted].to_vec() }, None)
            }
        }
    }
}

/// Writes bound instance ids into the graph's THING_INSTANCE values.
pub fn apply_bindings(root: &mut S2Element, slots: &[BindingSlot]) {
    root.visit_mut(&mut |e| {
        if let Some(s) = slots.iter().find(|s| s.node == e.id) {
            if let SlotMode::Instances { ids } = &s.mode {
                e.value = Some(Value::ThingIds(ids.clone()));
            }
        }
    });
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "change", rename_all = "snake_case")]
pub enum LabelChange {
    AddNoun { id: EntityId, label: String },
    RemoveNoun { id: EntityId, label: String },
    AddAdjective { id: EntityId, label: String },
    RemoveAdjective { id: EntityId, label: String },
}

/// Applies a copular sentence ("this is a ball", "the thing is not fast")
/// to `targets`: predicate nouns and adjectives are added, negated ones
/// removed.
pub fn apply_predicate(world: &mut World, action: &S2Element, targets: &[EntityId]) -> Vec<LabelChange> {
    let mut out = Vec::new();
    for &id in targets {
        if !world.alive(id) {
            continue;
        }
        for n in action.get(NodeType::DirectObject) {
            let Some(spec) = n.noun_spec() else { continue };
            let change = if spec.negated {
                world.remove_noun(id, &spec.lemma).ok().filter(|c| *c).map(|_| LabelChange::RemoveNoun {
                    id,
                    label: spec.lemma.clone(),
                })
            } else {
                world.add_noun(id, &spec.lemma).ok().filter(|c| *c).map(|_| LabelChange::AddNoun {
                    id,
                    label: spec.lemma.clone(),
                })
            };
            out.extend(change);
            for a in &spec.adjectives {
                if world.add_adjective(id, a).unwrap_or(false) {
                    out.push(LabelChange::AddAdjective { id, label: a.clone() });
                }
            }
        }
        for p in action.get(NodeType::Property).iter().filter(|p| p.label == "attribute") {
            let Some(adj) = p.text() else { continue };
            let negated = matches!(&p.value, Some(Value::List(v)) if v.contains(&Value::Flag(false)));
            let chain: Vec<String> = p
                .get(NodeType::Property)
                .iter()
                .filter_map(|c| c.text().map(str::to_string))
                .collect();
            if negated {
                if world.remove_adjective(id, adj).unwrap_or(false) {
                    out.push(LabelChange::RemoveAdjective { id, label: adj.to_string() });
                }
            } else {
                if world.add_adjective(id, adj).unwrap_or(false) {
                    out.push(LabelChange::AddAdjective { id, label: adj.to_string() });
                }
                if let Ok(e) = world.get_mut(id) {
                    if chain.is_empty() {
                        e.intensifiers.remove(adj);
                    } else {
                        e.intensifiers.insert(adj.to_string(), chain);
                    }
                }
            }
        }
    }
    out
}

/// Touch-and-tap labeling: toggles `word` as a label on each held entity.
pub fn label_by_link(
    world: &mut World,
    held: &[EntityId],
    word: &crate::grammar::Token,
) -> Result<Vec<LabelChange>, BindError> {
    use crate::grammar::Category;
    let noun = match word.category {
        Category::Noun | Category::Unknown => true,
        Category::Adj => false,
        _ => return Err(BindError::WordNotLabelable(word.text.clone())),
    };
    let mut out = Vec::new();
    for &id in held {
        let e = world.get(id).map_err(|_| BindError::UnknownEntity(id))?;
        let label = word.lemma.clone();
        let change = match (noun, noun && e.has_noun(&label) || !noun && e.has_adjective(&label)) {
            (true, false) => LabelChange::AddNoun { id, label },
            (true, true) => LabelChange::RemoveNoun { id, label },
            (false, false) => LabelChange::AddAdjective { id, label },
            (false, true) => LabelChange::RemoveAdjective { id, label },
        };
        match &change {
            LabelChange::AddNoun { label, .. } => world.add_noun(id, label),
            LabelChange::RemoveNoun { label, .. } => world.remove_noun(id, label),
            LabelChange::AddAdjective { label, .. } => world.add_adjective(id, label),
            LabelChange::RemoveAdjective { label, .. } => world.remove_adjective(id, label),
        }
        .map_err(|_| BindError::UnknownEntity(id))?;
        out.push(change);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grammar::{parse_text, tokenize};
    use crate::lexicon::Lexicon;
    use crate::semantic::{resolve_coreference, Builder, IdGen};
    use crate::world::{Entity, Prototype};

    fn s2(text: &str) -> S2Element {
        let lex = Lexicon::default();
        let mut ids = IdGen::default();
        let mut root = Builder::new(&lex, &mut ids).build(&parse_text(&lex, text).unwrap()).unwrap();
        let _ = resolve_coreference(&lex, &mut root, &[], &mut ids);
        root
    }

    fn slot<'a>(slots: &'a [BindingSlot], lemma: &str) -> &'a BindingSlot {
        slots.iter().find(|s| s.lemma == lemma).unwrap()
    }

    #[test]
    fn definite_plural_binds_all_and_singular_binds_lowest() {
        let mut w = World::new();
        let c = w.insert(Entity::sketch(&["character"], 0.0, 0.0, 1.0, 1.0));
        let p1 = w.insert(Entity::sketch(&["platform"], 0.0, 0.0, 1.0, 1.0));
        let p2 = w.insert(Entity::sketch(&["platform"], 0.0, 0.0, 1.0, 1.0));
        let slots = bind(&s2("The character jumps on the platforms"), &w, &[]);
        assert_eq!(slot(&slots, "character").instances(), &[c]);
        assert_eq!(slot(&slots, "platform").instances(), &[p1, p2]);
        let slots = bind(&s2("The character jumps on the platform"), &w, &[]);
        assert_eq!(slot(&slots, "platform").instances(), &[p1]);
    }

    #[test]
    fn empty_world_reports_no_match() {
        let w = World::new();
        let slots = bind(&s2("the unicorn moves"), &w, &[]);
        assert!(matches!(slots[0].error, Some(BindError::NoMatch(_))));
    }

    #[test]
    fn counted_nouns() {
        let mut w = World::new();
        w.insert(Entity::sketch(&["frog"], 0.0, 0.0, 1.0, 1.0));
        w.insert(Entity::sketch(&["frog"], 0.0, 0.0, 1.0, 1.0));
        let slots = bind(&s2("3 frogs jump"), &w, &[]);
        assert_eq!(
            slots[0].error,
            Some(BindError::InsufficientCount { node: slots[0].node, wanted: 3, found: 2 })
        );
        let slots = bind(&s2("all frogs jump"), &w, &[]);
        assert_eq!(slots[0].instances().len(), 2);
        let slots = bind(&s2("all cats jump"), &w, &[]);
        assert!(slots[0].error.is_none() && slots[0].instances().is_empty());
    }

    #[test]
    fn deixis_follows_mention_order() {
        let mut w = World::new();
        let a = w.insert(Entity::default());
        let b = w.insert(Entity::default());
        let slots = bind(&s2("this moves to that"), &w, &[b, a]);
        assert_eq!(slot(&slots, "this").instances(), &[b]);
        assert_eq!(slot(&slots, "that").instances(), &[a]);
        assert_eq!(slot(&slots, "this").source, SlotSource::Deixis);
        let slots = bind(&s2("this moves to that"), &w, &[b]);
        assert!(matches!(slot(&slots, "that").error, Some(BindError::NoSelection(_))));
    }

    #[test]
    fn rules_bind_types_and_prototypes() {
        let mut w = World::new();
        w.add_prototype(Prototype::simple("wind", 10.0, 10.0));
        let switch = w.insert(Entity::sketch(&["switch"], 0.0, 0.0, 1.0, 1.0));
        let wall = w.insert(Entity::sketch(&["wall"], 0.0, 0.0, 1.0, 1.0));
        let root = s2("When I press the switch I create wind at the wall");
        let slots = bind(&root, &w, &[]);
        assert_eq!(slots.iter().filter(|s| matches!(s.mode, SlotMode::Reserved { which: Reserved::SelfRef })).count(), 2);
        assert_eq!(slot(&slots, "switch").instances(), &[switch]);
        assert_eq!(slot(&slots, "wall").instances(), &[wall]);
        assert_eq!(slot(&slots, "wind").mode, SlotMode::Prototype { name: "wind".into() });
        let slots = bind(&s2("When balls collide with paddles, paddles reflect balls"), &w, &[]);
        assert!(slots.iter().all(|s| matches!(s.mode, SlotMode::Type { .. })));
    }

    #[test]
    fn indefinite_defers() {
        let w = World::new();
        let slots = bind(&s2("Forever the frog hops to a lily"), &w, &[]);
        assert!(matches!(slot(&slots, "lily").mode, SlotMode::Deferred { .. }));
    }

    #[test]
    fn hierarchy_constrains_binding() {
        let mut w = World::new();
        let mill = w.insert(Entity::sketch(&["windmill"], 0.0, 0.0, 10.0, 10.0));
        let blade = w.insert(Entity::sketch(&["blade"], 0.0, 5.0, 10.0, 2.0));
        let stone = w.insert(Entity::sketch(&["stone"], 50.0, 0.0, 10.0, 10.0));
        let sword = w.insert(Entity::sketch(&["blade"], 50.0, 5.0, 2.0, 10.0));
        w.attach(blade, mill).unwrap();
        w.attach(sword, stone).unwrap();
        let slots = bind(&s2("the blades on the windmill rotate"), &w, &[]);
        assert_eq!(slots.len(), 1);
        assert_eq!(slots[0].instances(), &[blade]);
    }

    #[test]
    fn coreference_copies_share_bindings() {
        let mut w = World::new();
        let p = w.insert(Entity::sketch(&["person"], 0.0, 0.0, 1.0, 1.0));
        w.insert(Entity::sketch(&["ball"], 0.0, 0.0, 1.0, 1.0));
        w.insert(Entity::sketch(&["pond"], 0.0, 0.0, 1.0, 1.0));
        w.insert(Entity::sketch(&["dog"], 0.0, 0.0, 1.0, 1.0));
        let root = s2("Forever the person throws the ball into the pond and then the dog gives the ball to her.");
        let slots = bind(&root, &w, &[]);
        let her = slots.iter().find(|s| s.source == SlotSource::Coreference && s.lemma == "person").unwrap();
        assert_eq!(her.instances(), &[p]);
    }

    #[test]
    fn relink_and_unlink() {
        let mut w = World::new();
        let red = w.insert(Entity::sketch(&["building"], 0.0, 0.0, 1.0, 1.0));
        w.insert(Entity::sketch(&["building"], 0.0, 0.0, 1.0, 1.0));
        let sky = w.insert(Entity::default());
        w.insert(Entity::sketch(&["ape"], 0.0, 0.0, 1.0, 1.0));
        let mut slots = bind(&s2("the ape jumps on the building"), &w, &[]);
        let s = slots.iter_mut().find(|s| s.lemma == "building").unwrap();
        assert_eq!(s.instances(), &[red]);
        s.unlink(red).unwrap();
        assert!(s.error.is_some());
        s.relink(&w, sky, false).unwrap();
        assert_eq!(s.instances(), &[sky]);
        assert_eq!(s.source, SlotSource::UserLink);
        assert_eq!(s.relink(&w, 999, true), Err(BindError::UnknownEntity(999)));
    }

    #[test]
    fn predicates_label_and_unlabel() {
        let mut w = World::new();
        let a = w.insert(Entity::default());
        let root = s2("this is a ball");
        let act = root.first(NodeType::CmdList).unwrap().first(NodeType::Action).unwrap();
        let ch = apply_predicate(&mut w, act, &[a]);
        assert_eq!(ch, vec![LabelChange::AddNoun { id: a, label: "ball".into() }]);
        assert!(apply_predicate(&mut w, act, &[a]).is_empty());
        assert_eq!(w.get(a).unwrap().nouns, vec!["ball".to_string()]);
        w.add_adjective(a, "fast").unwrap();
        let root = s2("The thing is not fast");
        let act = root.first(NodeType::CmdList).unwrap().first(NodeType::Action).unwrap();
        apply_predicate(&mut w, act, &[a]);
        assert!(w.get(a).unwrap().adjectives.is_empty());
    }

    #[test]
    fn link_toggles_labels() {
        let lex = Lexicon::default();
        let mut w = World::new();
        let a = w.insert(Entity::default());
        let toks = tokenize(&lex, "the water");
        label_by_link(&mut w, &[a], &toks[1]).unwrap();
        assert!(w.get(a).unwrap().has_noun("water"));
        label_by_link(&mut w, &[a], &toks[1]).unwrap();
        assert!(!w.get(a).unwrap().has_noun("water"));
        assert_eq!(
            label_by_link(&mut w, &[a], &toks[0]),
            Err(BindError::WordNotLabelable("the".into()))
        );
    }
}
