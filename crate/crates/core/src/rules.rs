//! Live rules: trigger-response commands matched against world events each
//! tick, plus verb definitions made by rules whose trigger verb is new.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::bind::{BindingSlot, SlotMode};
use crate::exec::{compile_action, ArgSource, Bound, CompileCtx, ExecError, Program, ScriptId, UserVerb, VerbRegistry};
use crate::lexicon::Lexicon;
use crate::semantic::{NodeType, Reserved, S2Element};
use crate::world::{EntityId, EntityKind, Phase, World, WorldEvent};

pub type RuleId = u64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Marker {
    When,
    As,
    After,
}

impl Marker {
    fn parse(word: &str) -> Option<Marker> {
        match word {
            "when" | "whenever" | "if" => Some(Marker::When),
            "as" | "while" => Some(Marker::As),
            "after" => Some(Marker::After),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Marker::When => "WHEN",
            Marker::As => "AS",
            Marker::After => "AFTER",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Collide,
    Press,
    Appear,
    Disappear,
    Equal,
    Exceed,
    /// The rule teaches a new verb and never fires from events.
    Definition,
}

/// One side of a trigger: a noun and where its matching entities come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TriggerRole {
    pub lemma: String,
    pub source: ArgSource,
}

impl TriggerRole {
    fn matches(&self, world: &World, id: EntityId) -> bool {
        match &self.source {
            ArgSource::Fixed { ids } => ids.contains(&id),
            ArgSource::Query { query } | ArgSource::Random { query } => {
                world.entities.get(&id).is_some_and(|e| world.matches(e, query))
            }
            ArgSource::SelfRef => true,
            _ => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trigger {
    pub event: EventKind,
    pub verb: String,
    pub subject: Vec<TriggerRole>,
    pub object: Vec<TriggerRole>,
    /// Constant operand of equal/exceed.
    pub number: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rule {
    pub id: RuleId,
    pub marker: Marker,
    pub trigger: Trigger,
    pub program: Arc<Program>,
    pub display: String,
    pub enabled: bool,
    /// Open episodes by match key, with the response started by an AS rule.
    #[serde(skip)]
    episodes: BTreeMap<Vec<EntityId>, Option<ScriptId>>,
    /// Last truth value of an inequality trigger by match key.
    #[serde(skip)]
    truth: BTreeMap<Vec<EntityId>, bool>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error, Serialize, Deserialize)]
pub enum RuleError {
    #[error("malformed trigger: {0}")]
    MalformedTrigger(String),
    #[error("unknown rule {0}")]
    UnknownRule(RuleId),
    #[error(transparent)]
    Exec(#[from] ExecError),
}

#[derive(Debug, Clone, PartialEq)]
pub enum FireAction {
    Launch { program: Arc<Program>, params: Bound },
    Cancel { script: ScriptId },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Firing {
    pub rule: RuleId,
    pub display: String,
    pub key: Vec<EntityId>,
    pub phase: Phase,
    pub action: FireAction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleSummary {
    pub id: RuleId,
    pub display: String,
    pub enabled: bool,
}

fn role_sources(nouns: &[S2Element], slots: &[BindingSlot]) -> (Vec<TriggerRole>, Option<f64>) {
    let mut roles = Vec::new();
    let mut number = None;
    for n in nouns {
        if n.kind == "NUMBER" {
            number = n.number();
            continue;
        }
        let Some(slot) = slots.iter().find(|s| s.node == n.id) else { continue };
        let source = match &slot.mode {
            SlotMode::Instances { ids } => ArgSource::Fixed { ids: ids.clone() },
            SlotMode::Type { query } | SlotMode::Deferred { query } => ArgSource::Query { query: query.clone() },
            SlotMode::Reserved { which: Reserved::View } => ArgSource::View,
            SlotMode::Reserved { .. } => ArgSource::SelfRef,
            SlotMode::Prototype { name } => ArgSource::Proto { name: name.clone() },
        };
        roles.push(TriggerRole {
            lemma: slot.lemma.clone(),
            source,
        });
    }
    (roles, number)
}

fn slot_word(n: &S2Element, slots: &[BindingSlot]) -> String {
    if n.kind == "NUMBER" {
        return n.number().map_or_else(String::new, |v| format!("{v}"));
    }
    match slots.iter().find(|s| s.node == n.id) {
        Some(s) if matches!(s.mode, SlotMode::Type { .. } | SlotMode::Deferred { .. }) => format!("*{}", s.lemma),
        Some(s) => s.lemma.clone(),
        None => n.label.clone(),
    }
}

/// Short lemma rendering of an action and its sequenced sub-actions.
pub fn summarize(action: &S2Element, slots: &[BindingSlot]) -> String {
    let mut words: Vec<String> = action
        .get(NodeType::Agent)
        .iter()
        .map(|n| slot_word(n, slots))
        .collect();
    words.push(action.label.clone());
    if let Some(a) = action
        .get(NodeType::Property)
        .iter()
        .find(|p| p.label == "action")
        .and_then(|p| p.text())
    {
        words.push(a.to_string());
    }
    for key in [NodeType::IndirectObject, NodeType::DirectObject] {
        words.extend(action.get(key).iter().map(|n| slot_word(n, slots)));
    }
    for p in action.get(NodeType::Preposition) {
        words.push(p.label.clone());
        words.extend(p.get(NodeType::Object).iter().map(|n| slot_word(n, slots)));
    }
    let mut out = words.join(" ");
    for s in action.get(NodeType::SequenceSimultaneous) {
        out.push_str(" and ");
        out.push_str(&summarize(s, slots));
    }
    for s in action.get(NodeType::SequenceThen) {
        out.push_str(" then ");
        out.push_str(&summarize(s, slots));
    }
    out
}

/// A compiled trigger-response command: either a rule or a verb definition
/// (which also appears as a rule so it can be listed and toggled).
#[derive(Debug, Clone, PartialEq)]
pub struct Compiled {
    pub rule: Rule,
    pub definition: Option<UserVerb>,
}

/// Compiles a TRIGGER_RESPONSE element bound with `slots`.
pub fn compile_rule(
    tr: &S2Element,
    slots: &[BindingSlot],
    lex: &Lexicon,
    verbs: &VerbRegistry,
    user_verbs: &BTreeMap<String, UserVerb>,
) -> Result<Compiled, RuleError> {
    let malformed = |m: &str| RuleError::MalformedTrigger(m.to_string());
    let trigger = tr.first(NodeType::Trigger).ok_or_else(|| malformed("no trigger"))?;
    let cond = trigger.first(NodeType::Action).ok_or_else(|| malformed("no trigger action"))?;
    let response = tr
        .first(NodeType::Response)
        .and_then(|r| r.first(NodeType::Action))
        .ok_or_else(|| malformed("no response"))?;
    let marker = trigger
        .get(NodeType::Property)
        .iter()
        .find_map(|p| p.text().and_then(Marker::parse))
        .unwrap_or(Marker::When);

    let verb = cond.label.as_str();
    let event = match verb {
        "collide" => EventKind::Collide,
        "press" => EventKind::Press,
        "appear" => EventKind::Appear,
        "disappear" => EventKind::Disappear,
        "equal" => EventKind::Equal,
        "exceed" => EventKind::Exceed,
        v if verbs.contains(v) || matches!(v, "stop" | "be" | "become") => {
            return Err(RuleError::MalformedTrigger(format!("'{v}' is not an event")));
        }
        _ => EventKind::Definition,
    };

    let (mut subject, _) = role_sources(cond.get(NodeType::Agent), slots);
    let mut object_nouns: Vec<S2Element> = cond.get(NodeType::DirectObject).to_vec();
    for p in cond.get(NodeType::Preposition) {
        object_nouns.extend(p.get(NodeType::Object).iter().cloned());
    }
    let (mut object, number) = role_sources(&object_nouns, slots);
    if event == EventKind::Collide && object.is_empty() && subject.len() >= 2 {
        object = subject.split_off(1);
    }
    match event {
        EventKind::Collide if subject.is_empty() || object.is_empty() => {
            return Err(malformed("collide needs two sides"));
        }
        EventKind::Press if object.is_empty() => return Err(malformed("press needs a target")),
        EventKind::Appear | EventKind::Disappear if subject.is_empty() => {
            return Err(malformed("nothing to watch"));
        }
        EventKind::Equal | EventKind::Exceed if subject.is_empty() || (object.is_empty() && number.is_none()) => {
            return Err(malformed("comparison needs two numbers"));
        }
        _ => {}
    }

    let params: BTreeSet<String> = subject.iter().chain(&object).map(|r| r.lemma.clone()).collect();
    // a definition may call itself
    let mut known = user_verbs.clone();
    if event == EventKind::Definition {
        known.entry(verb.to_string()).or_insert_with(|| UserVerb {
            name: verb.to_string(),
            program: Arc::default(),
            agent_lemmas: Vec::new(),
            dobj_lemmas: Vec::new(),
        });
    }
    let ctx = CompileCtx {
        lex,
        slots,
        params: &params,
        verbs,
        user_verbs: &known,
    };
    let program = Arc::new(compile_action(&ctx, response, &[])?);
    let display = format!(
        "{} {} -> {}",
        marker.as_str(),
        summarize(cond, slots),
        summarize(response, slots)
    );
    let definition = (event == EventKind::Definition).then(|| UserVerb {
        name: verb.to_string(),
        program: program.clone(),
        agent_lemmas: subject.iter().map(|r| r.lemma.clone()).collect(),
        dobj_lemmas: object.iter().map(|r| r.lemma.clone()).collect(),
    });
    Ok(Compiled {
        rule: Rule {
            id: 0,
            marker,
            trigger: Trigger {
                event,
                verb: verb.to_string(),
                subject,
                object,
                number,
            },
            program,
            display,
            enabled: true,
            episodes: BTreeMap::new(),
            truth: BTreeMap::new(),
        },
        definition,
    })
}

fn params_for(trigger: &Trigger, key: &[EntityId]) -> Bound {
    let mut out = Bound::new();
    let sides = [&trigger.subject, &trigger.object];
    for (side, id) in sides.iter().zip(key) {
        for r in side.iter() {
            out.entry(r.lemma.clone()).or_default().push(*id);
        }
    }
    for ids in out.values_mut() {
        ids.dedup();
    }
    out
}

fn number_of(world: &World, id: EntityId) -> Option<f64> {
    world
        .entities
        .get(&id)
        .filter(|e| e.kind == EntityKind::Number)
        .map(|e| e.number)
}

#[derive(Debug, Clone, Default)]
pub struct RuleBook {
    rules: BTreeMap<RuleId, Rule>,
    next_id: RuleId,
}

impl RuleBook {
    pub fn install(&mut self, mut rule: Rule) -> RuleId {
        self.next_id += 1;
        rule.id = self.next_id;
        self.rules.insert(rule.id, rule);
        self.next_id
    }

    pub fn get(&self, id: RuleId) -> Option<&Rule> {
        self.rules.get(&id)
    }

    pub fn rules(&self) -> impl Iterator<Item = &Rule> {
        self.rules.values()
    }

    pub fn toggle(&mut self, id: RuleId) -> Result<bool, RuleError> {
        let r = self.rules.get_mut(&id).ok_or(RuleError::UnknownRule(id))?;
        r.enabled = !r.enabled;
        if !r.enabled {
            r.episodes.clear();
            r.truth.clear();
        }
        Ok(r.enabled)
    }

    pub fn delete(&mut self, id: RuleId) -> Result<Rule, RuleError> {
        self.rules.remove(&id).ok_or(RuleError::UnknownRule(id))
    }

    pub fn list(&self) -> Vec<RuleSummary> {
        self.rules
            .values()
            .map(|r| RuleSummary {
                id: r.id,
                display: r.display.clone(),
                enabled: r.enabled,
            })
            .collect()
    }

    /// Records the script started for an AS rule's open episode.
    pub fn note_script(&mut self, rule: RuleId, key: &[EntityId], script: ScriptId) {
        if let Some(r) = self.rules.get_mut(&rule) {
            if r.marker == Marker::As {
                if let Some(slot) = r.episodes.get_mut(key) {
                    *slot = Some(script);
                }
            }
        }
    }

    /// Matches this tick's events against every enabled rule. Firings come
    /// back in a fixed order that does not depend on install order: episode
    /// ends first, then begins, each by display text and match key.
    pub fn evaluate(&mut self, world: &World, events: &[WorldEvent]) -> Vec<Firing> {
        let mut out = Vec::new();
        for rule in self.rules.values_mut().filter(|r| r.enabled) {
            let mut edges: Vec<(Vec<EntityId>, Phase)> = Vec::new();
            let t = &rule.trigger;
            match t.event {
                EventKind::Collide => {
                    for ev in events {
                        let WorldEvent::Collision { a, b, phase } = *ev else { continue };
                        match phase {
                            Phase::Begin => {
                                let side = |x: EntityId, y: EntityId| {
                                    t.subject.iter().any(|r| r.matches(world, x))
                                        && t.object.iter().any(|r| r.matches(world, y))
                                };
                                let mut keys = BTreeSet::new();
                                if side(a, b) {
                                    keys.insert(vec![a, b]);
                                }
                                if side(b, a) {
                                    keys.insert(vec![b, a]);
                                }
                                edges.extend(keys.into_iter().map(|k| (k, Phase::Begin)));
                            }
                            Phase::End => {
                                for k in [vec![a, b], vec![b, a]] {
                                    if rule.episodes.contains_key(&k) {
                                        edges.push((k, Phase::End));
                                    }
                                }
                            }
                            Phase::Continue => {}
                        }
                    }
                }
                EventKind::Press | EventKind::Appear | EventKind::Disappear => {
                    for ev in events {
                        let id = match (t.event, *ev) {
                            (EventKind::Press, WorldEvent::Press { id }) => id,
                            (EventKind::Appear, WorldEvent::Appear { id }) => id,
                            (EventKind::Disappear, WorldEvent::Disappear { id }) => id,
                            _ => continue,
                        };
                        let roles = if t.event == EventKind::Press { &t.object } else { &t.subject };
                        if roles.iter().any(|r| r.matches(world, id)) {
                            edges.push((vec![id], Phase::Begin));
                            edges.push((vec![id], Phase::End));
                        }
                    }
                }
                EventKind::Equal | EventKind::Exceed => {
                    let lhs: Vec<EntityId> = world
                        .entities
                        .values()
                        .filter(|e| e.kind == EntityKind::Number && t.subject.iter().any(|r| r.matches(world, e.id)))
                        .map(|e| e.id)
                        .collect();
                    let rhs: Option<(EntityId, f64)> = match t.number {
                        Some(n) => Some((0, n)),
                        None => world
                            .entities
                            .values()
                            .find(|e| e.kind == EntityKind::Number && t.object.iter().any(|r| r.matches(world, e.id)))
                            .map(|e| (e.id, e.number)),
                    };
                    let mut seen = BTreeSet::new();
                    if let Some((rid, rv)) = rhs {
                        for l in lhs.into_iter().filter(|l| *l != rid) {
                            let Some(lv) = number_of(world, l) else { continue };
                            let now = match t.event {
                                EventKind::Equal => (lv - rv).abs() < 1e-9,
                                _ => lv > rv,
                            };
                            let key = vec![l, rid];
                            seen.insert(key.clone());
                            match rule.truth.insert(key.clone(), now) {
                                Some(false) if now => edges.push((key, Phase::Begin)),
                                Some(true) if !now => edges.push((key, Phase::End)),
                                _ => {}
                            }
                        }
                    }
                    rule.truth.retain(|k, _| seen.contains(k));
                }
                EventKind::Definition => {}
            }

            for (key, phase) in edges {
                let params = params_for(t, &key);
                match phase {
                    Phase::Begin => {
                        if rule.episodes.contains_key(&key) {
                            continue;
                        }
                        rule.episodes.insert(key.clone(), None);
                        if rule.marker != Marker::After {
                            out.push(Firing {
                                rule: rule.id,
                                display: rule.display.clone(),
                                key,
                                phase,
                                action: FireAction::Launch {
                                    program: rule.program.clone(),
                                    params,
                                },
                            });
                        }
                    }
                    Phase::End => {
                        let Some(script) = rule.episodes.remove(&key) else { continue };
                        let action = match (rule.marker, script) {
                            (Marker::After, _) => FireAction::Launch {
                                program: rule.program.clone(),
                                params,
                            },
                            (Marker::As, Some(script)) => FireAction::Cancel { script },
                            _ => continue,
                        };
                        out.push(Firing {
                            rule: rule.id,
                            display: rule.display.clone(),
                            key,
                            phase,
                            action,
                        });
                    }
                    Phase::Continue => {}
                }
            }
        }
        out.sort_by(|a, b| {
            let rank = |p: Phase| if p == Phase::End { 0 } else { 1 };
            rank(a.phase)
                .cmp(&rank(b.phase))
                .then_with(|| a.display.cmp(&b.display))
                .then_with(|| a.key.cmp(&b.key))
        });
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bind::bind;
    use crate::grammar::{parse_sentence, tokenize};
    use crate::semantic::{build_s2, resolve_coreference};
    use crate::world::Entity;

    fn compile(text: &str, world: &World) -> Result<Compiled, RuleError> {
        let lex = Lexicon::default();
        let p = parse_sentence(&lex, &tokenize(&lex, text)).unwrap();
        let mut root = build_s2(&lex, &p, &[]).unwrap();
        let mut ids = crate::semantic::IdGen::after(std::slice::from_ref(&root));
        resolve_coreference(&lex, &mut root, &[], &mut ids).unwrap();
        let slots = bind(&root, world, &[]);
        let tr = root.first(NodeType::CmdList).unwrap().first(NodeType::TriggerResponse).unwrap();
        compile_rule(tr, &slots, &lex, &VerbRegistry::builtin(), &BTreeMap::new())
    }

    fn collide(a: EntityId, b: EntityId, phase: Phase) -> WorldEvent {
        WorldEvent::Collision { a, b, phase }
    }

    #[test]
    fn display_marks_type_slots() {
        let w = World::new();
        let c = compile("When balls collide with the water, the water moves up", &w);
        // "the water" does not exist, so its slot is empty but still definite
        let r = c.unwrap().rule;
        assert_eq!(r.display, "WHEN *ball collide with water -> water move up");
        let c = compile("When wind collides with blades, blades rotate.", &w).unwrap();
        assert_eq!(c.rule.display, "WHEN *wind collide with *blade -> *blade rotate");
    }

    #[test]
    fn non_event_trigger_is_malformed() {
        let w = World::new();
        assert!(matches!(
            compile("When dogs jump, cats jump", &w),
            Err(RuleError::MalformedTrigger(_))
        ));
    }

    #[test]
    fn unknown_trigger_verb_defines_a_verb() {
        let w = World::new();
        let c = compile(
            "When lights flicker, forever lights disappear for 0.1 seconds and then lights appear for 0.1 seconds",
            &w,
        )
        .unwrap();
        let d = c.definition.unwrap();
        assert_eq!(d.name, "flicker");
        assert_eq!(d.agent_lemmas, vec!["light".to_string()]);
    }

    #[test]
    fn when_fires_once_per_episode_and_binds_the_pair() {
        let mut w = World::new();
        let wind = w.insert(Entity::sketch(&["wind"], 0.0, 0.0, 1.0, 1.0));
        let b1 = w.insert(Entity::sketch(&["blade"], 0.0, 0.0, 1.0, 1.0));
        let _b2 = w.insert(Entity::sketch(&["blade"], 9.0, 0.0, 1.0, 1.0));
        let mut book = RuleBook::default();
        book.install(compile("When wind collides with blades, blades rotate.", &w).unwrap().rule);
        let f = book.evaluate(&w, &[collide(wind, b1, Phase::Begin)]);
        assert_eq!(f.len(), 1);
        let FireAction::Launch { params, .. } = &f[0].action else { panic!() };
        assert_eq!(params.get("blade"), Some(&vec![b1]));
        assert!(book.evaluate(&w, &[collide(wind, b1, Phase::Continue)]).is_empty());
        assert!(book.evaluate(&w, &[collide(wind, b1, Phase::Begin)]).is_empty());
        assert!(book.evaluate(&w, &[collide(wind, b1, Phase::End)]).is_empty());
        assert_eq!(book.evaluate(&w, &[collide(wind, b1, Phase::Begin)]).len(), 1);
    }

    #[test]
    fn as_cancels_at_end_and_after_fires_at_end() {
        let mut w = World::new();
        let wind = w.insert(Entity::sketch(&["wind"], 0.0, 0.0, 1.0, 1.0));
        let b = w.insert(Entity::sketch(&["blade"], 0.0, 0.0, 1.0, 1.0));
        let mut book = RuleBook::default();
        let as_rule = book.install(compile("As wind collides with blades, blades rotate.", &w).unwrap().rule);
        book.install(compile("After wind collides with blades, blades stop rotating.", &w).unwrap().rule);
        let f = book.evaluate(&w, &[collide(wind, b, Phase::Begin)]);
        assert_eq!(f.len(), 1);
        book.note_script(as_rule, &f[0].key, 42);
        let f = book.evaluate(&w, &[collide(wind, b, Phase::End)]);
        assert_eq!(f.len(), 2);
        assert!(f[0].display.starts_with("AFTER"));
        assert_eq!(f[1].action, FireAction::Cancel { script: 42 });
    }

    #[test]
    fn disabled_rules_are_silent() {
        let mut w = World::new();
        let a = w.insert(Entity::sketch(&["ball"], 0.0, 0.0, 1.0, 1.0));
        let b = w.insert(Entity::sketch(&["water"], 0.0, 0.0, 1.0, 1.0));
        let mut book = RuleBook::default();
        let id = book.install(compile("When balls collide with water, water moves up for 0.2 seconds", &w).unwrap().rule);
        assert_eq!(book.toggle(id), Ok(false));
        assert!(book.evaluate(&w, &[collide(a, b, Phase::Begin)]).is_empty());
        book.delete(id).unwrap();
        assert_eq!(book.delete(id), Err(RuleError::UnknownRule(id)));
    }

    #[test]
    fn exceed_is_edge_detected() {
        let mut w = World::new();
        let s = w.insert(Entity::number(&["score"], 0.0));
        let mut book = RuleBook::default();
        book.install(compile("When the score exceeds 2, the score decreases", &w).unwrap().rule);
        let mut fired = 0;
        for v in [0.0, 1.0, 3.0, 4.0, 1.0, 5.0] {
            w.get_mut(s).unwrap().number = v;
            fired += book.evaluate(&w, &[]).len();
        }
        assert_eq!(fired, 2);
    }
}
