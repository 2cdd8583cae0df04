//! The generic semantic role graph built from parse trees.

mod build;
mod coref;
mod format;
mod validate;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

pub use build::{build_s2, Builder};
pub use coref::resolve_coreference;
pub use format::{format_s2, normalize_listing};
pub use validate::validate;

pub type ElementId = u64;

/// Allocator for element ids; ids are never reused within a session.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct IdGen {
    next: ElementId,
}

impl IdGen {
    pub fn starting_at(next: ElementId) -> Self {
        IdGen { next }
    }

    pub fn next(&mut self) -> ElementId {
        self.next += 1;
        self.next
    }

    /// Continues after the largest id used in `roots`.
    pub fn after(roots: &[S2Element]) -> Self {
        let max = roots
            .iter()
            .flat_map(|r| r.walk().map(|e| e.id))
            .max()
            .unwrap_or(0);
        IdGen { next: max }
    }
}

/// Node types. The derived order is the rendering order of child keys.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum NodeType {
    Preposition,
    SequenceThen,
    SequenceSimultaneous,
    Time,
    Trigger,
    Response,
    Action,
    TriggerResponse,
    DirectObject,
    IndirectObject,
    Object,
    SpecificOrUnspecific,
    Count,
    Plural,
    Property,
    Coreference,
    Agent,
    CmdList,
}

impl NodeType {
    pub fn as_str(self) -> &'static str {
        match self {
            NodeType::Preposition => "PREPOSITION",
            NodeType::SequenceThen => "SEQUENCE_THEN",
            NodeType::SequenceSimultaneous => "SEQUENCE_SIMULTANEOUS",
            NodeType::Time => "TIME",
            NodeType::Trigger => "TRIGGER",
            NodeType::Response => "RESPONSE",
            NodeType::Action => "ACTION",
            NodeType::TriggerResponse => "TRIGGER_RESPONSE",
            NodeType::DirectObject => "DIRECT_OBJECT",
            NodeType::IndirectObject => "INDIRECT_OBJECT",
            NodeType::Object => "OBJECT",
            NodeType::SpecificOrUnspecific => "SPECIFIC_OR_UNSPECIFIC",
            NodeType::Count => "COUNT",
            NodeType::Plural => "PLURAL",
            NodeType::Property => "PROPERTY",
            NodeType::Coreference => "COREFERENCE",
            NodeType::Agent => "AGENT",
            NodeType::CmdList => "CMD_LIST",
        }
    }

    pub fn is_noun_role(self) -> bool {
        matches!(
            self,
            NodeType::Agent | NodeType::DirectObject | NodeType::IndirectObject | NodeType::Object
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum Value {
    Number(f64),
    /// Distinguished count for "all".
    All,
    ThingIds(Vec<u64>),
    ThingType(String),
    Text(String),
    Flag(bool),
    Reference(ElementId),
    List(Vec<Value>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Annotation {
    MustFillInAgent,
}

impl Annotation {
    pub fn as_str(self) -> &'static str {
        match self {
            Annotation::MustFillInAgent => "MUST_FILL_IN_AGENT",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct S2Element {
    pub id: ElementId,
    pub node_type: NodeType,
    /// Key shown when rendering; a coreference copy keeps its antecedent's key.
    pub key: Option<NodeType>,
    pub type_name: String,
    pub label: String,
    pub tag: String,
    pub kind: String,
    pub value: Option<Value>,
    pub parent: Option<ElementId>,
    pub children: BTreeMap<NodeType, Vec<S2Element>>,
    pub refers_to: Option<ElementId>,
    pub annotations: BTreeSet<Annotation>,
    pub token_ref: Option<usize>,
    pub feedback_ref: Option<String>,
}

impl S2Element {
    pub fn new(id: ElementId, node_type: NodeType) -> Self {
        S2Element {
            id,
            node_type,
            key: Some(node_type),
            type_name: String::new(),
            label: String::new(),
            tag: String::new(),
            kind: String::new(),
            value: None,
            parent: None,
            children: BTreeMap::new(),
            refers_to: None,
            annotations: BTreeSet::new(),
            token_ref: None,
            feedback_ref: None,
        }
    }

    pub fn label(mut self, s: &str) -> Self {
        self.label = s.to_string();
        self
    }

    pub fn tag(mut self, s: &str) -> Self {
        self.tag = s.to_string();
        self
    }

    pub fn type_name(mut self, s: &str) -> Self {
        self.type_name = s.to_string();
        self
    }

    pub fn kind(mut self, s: &str) -> Self {
        self.kind = s.to_string();
        self
    }

    pub fn value(mut self, v: Value) -> Self {
        self.value = Some(v);
        self
    }

    pub fn push(&mut self, key: NodeType, mut child: S2Element) {
        child.parent = Some(self.id);
        self.children.entry(key).or_default().push(child);
    }

    pub fn with(mut self, key: NodeType, child: S2Element) -> Self {
        self.push(key, child);
        self
    }

    pub fn get(&self, key: NodeType) -> &[S2Element] {
        self.children.get(&key).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn first(&self, key: NodeType) -> Option<&S2Element> {
        self.get(key).first()
    }

    /// Preorder traversal in rendering order.
    pub fn walk(&self) -> impl Iterator<Item = &S2Element> {
        let mut stack = vec![self];
        std::iter::from_fn(move || {
            let e = stack.pop()?;
            for list in e.children.values().rev() {
                for c in list.iter().rev() {
                    stack.push(c);
                }
            }
            Some(e)
        })
    }

    pub fn find(&self, id: ElementId) -> Option<&S2Element> {
        self.walk().find(|e| e.id == id)
    }

    pub fn find_mut(&mut self, id: ElementId) -> Option<&mut S2Element> {
        if self.id == id {
            return Some(self);
        }
        for list in self.children.values_mut() {
            for c in list {
                if let Some(f) = c.find_mut(id) {
                    return Some(f);
                }
            }
        }
        None
    }

    /// Visits every element mutably, parents before children.
    pub fn visit_mut(&mut self, f: &mut impl FnMut(&mut S2Element)) {
        f(self);
        for list in self.children.values_mut() {
            for c in list {
                c.visit_mut(f);
            }
        }
    }

    /// Noun-like elements: things that can be bound to world entities.
    pub fn is_noun(&self) -> bool {
        self.node_type.is_noun_role() && self.kind != "NUMBER"
    }

    pub fn is_pronoun(&self) -> bool {
        self.is_noun() && self.tag == "PRON" && self.refers_to.is_none()
    }

    pub fn text(&self) -> Option<&str> {
        match &self.value {
            Some(Value::Text(t)) => Some(t),
            Some(Value::List(items)) => items.iter().find_map(|v| match v {
                Value::Text(t) => Some(t.as_str()),
                _ => None,
            }),
            _ => None,
        }
    }

    pub fn number(&self) -> Option<f64> {
        match self.value {
            Some(Value::Number(n)) => Some(n),
            _ => None,
        }
    }

    pub fn thing_ids(&self) -> &[u64] {
        match &self.value {
            Some(Value::ThingIds(ids)) => ids,
            _ => &[],
        }
    }

    /// Deep copy with fresh ids drawn from `ids`.
    pub fn deep_copy(&self, ids: &mut IdGen) -> S2Element {
        let mut out = self.clone();
        out.visit_mut(&mut |e| e.id = ids.next());
        out.fix_parents();
        out
    }

    pub fn fix_parents(&mut self) {
        let id = self.id;
        for list in self.children.values_mut() {
            for c in list {
                c.parent = Some(id);
                c.fix_parents();
            }
        }
    }

    /// Adjectives on a noun, each with its intensifier chain.
    pub fn traits(&self) -> Vec<(String, Vec<String>)> {
        self.get(NodeType::Property)
            .iter()
            .filter(|p| p.label == "trait")
            .filter_map(|p| {
                let t = p.text()?.to_string();
                let chain = p
                    .get(NodeType::Property)
                    .iter()
                    .filter(|c| c.label == "intensifier")
                    .filter_map(|c| c.text().map(str::to_string))
                    .collect();
                Some((t, chain))
            })
            .collect()
    }

    /// Compact view of a noun-like element.
    pub fn noun_spec(&self) -> Option<NounSpec> {
        if !self.is_noun() {
            return None;
        }
        let spec = self.first(NodeType::SpecificOrUnspecific);
        let det = spec.map(|s| s.label.clone()).filter(|l| !l.is_empty());
        let specific = spec.is_some_and(|s| s.value == Some(Value::Flag(true)));
        let count = match self.first(NodeType::Count).and_then(|c| c.value.clone()) {
            Some(Value::All) => Count::All,
            Some(Value::Number(n)) => Count::Exactly(n),
            _ => Count::Exactly(1.0),
        };
        let plural = self
            .first(NodeType::Plural)
            .is_some_and(|p| p.value == Some(Value::Flag(true)));
        let deictic = matches!(
            det.as_deref().or(Some(self.label.as_str())),
            Some("this" | "that" | "these" | "those")
        );
        let reserved = match (self.kind.as_str(), self.label.as_str()) {
            ("SELF", _) => Some(Reserved::SelfRef),
            (_, "view") => Some(Reserved::View),
            (_, "thing") if !deictic => Some(Reserved::Thing),
            _ => None,
        };
        let scope = self
            .get(NodeType::Preposition)
            .iter()
            .find_map(|p| p.first(NodeType::Object))
            .and_then(|o| o.noun_spec())
            .map(Box::new);
        let negated = self
            .get(NodeType::Property)
            .iter()
            .any(|p| p.label == "negation");
        Some(NounSpec {
            lemma: self.label.clone(),
            adjectives: self.traits().into_iter().map(|(a, _)| a).collect(),
            determiner: det,
            specific,
            count,
            plural,
            deictic,
            reserved,
            scope,
            negated,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Count {
    Exactly(f64),
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Reserved {
    #[serde(rename = "SELF")]
    SelfRef,
    View,
    Thing,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NounSpec {
    pub lemma: String,
    pub adjectives: Vec<String>,
    pub determiner: Option<String>,
    pub specific: bool,
    pub count: Count,
    pub plural: bool,
    pub deictic: bool,
    pub reserved: Option<Reserved>,
    /// Hierarchy constraint, e.g. "on the windmill".
    pub scope: Option<Box<NounSpec>>,
    pub negated: bool,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error, Serialize, Deserialize)]
pub enum SemanticError {
    #[error("malformed parse: {0}")]
    MalformedParse(String),
    #[error("no antecedent for pronoun(s) {0:?}")]
    UnresolvedPronoun(Vec<ElementId>),
    #[error("element {id} violates the schema: {reason}")]
    Schema { id: ElementId, reason: String },
}
