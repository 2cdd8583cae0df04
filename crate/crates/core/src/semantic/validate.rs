use std::collections::BTreeSet;

use super::{NodeType, S2Element, SemanticError};

use NodeType::*;

const ACTION_KEYS: &[NodeType] = &[
    Agent,
    DirectObject,
    IndirectObject,
    Object,
    Preposition,
    Property,
    SequenceSimultaneous,
    SequenceThen,
    Time,
    Coreference,
    Count,
];

const NOUN_KEYS: &[NodeType] = &[SpecificOrUnspecific, Count, Plural, Property, Preposition];

fn bad(e: &S2Element, reason: impl Into<String>) -> SemanticError {
    SemanticError::Schema {
        id: e.id,
        reason: reason.into(),
    }
}

fn only(e: &S2Element, allowed: &[NodeType]) -> Result<(), SemanticError> {
    match e.children.keys().find(|k| !allowed.contains(k)) {
        Some(k) => Err(bad(e, format!("unexpected {} child", k.as_str()))),
        None => Ok(()),
    }
}

fn each<'a>(
    e: &'a S2Element,
    key: NodeType,
    f: impl Fn(&'a S2Element) -> Result<(), SemanticError>,
) -> Result<(), SemanticError> {
    e.get(key).iter().try_for_each(f)
}

/// Checks the production rules of the graph and id uniqueness.
pub fn validate(root: &S2Element) -> Result<(), SemanticError> {
    let mut seen = BTreeSet::new();
    for e in root.walk() {
        if !seen.insert(e.id) {
            return Err(bad(e, "duplicate id"));
        }
    }
    only(root, &[CmdList])?;
    each(root, CmdList, command)
}

fn command(cmd: &S2Element) -> Result<(), SemanticError> {
    only(cmd, &[Action, TriggerResponse])?;
    each(cmd, Action, action)?;
    each(cmd, TriggerResponse, trigger_response)
}

fn trigger_response(tr: &S2Element) -> Result<(), SemanticError> {
    only(tr, &[Trigger, Response])?;
    if tr.get(Trigger).len() != 1 {
        return Err(bad(tr, "expected exactly one trigger"));
    }
    if tr.get(Response).is_empty() {
        return Err(bad(tr, "expected a response"));
    }
    each(tr, Trigger, |t| {
        only(t, &[Action, Property])?;
        if t.get(Action).len() != 1 {
            return Err(bad(t, "trigger needs exactly one action"));
        }
        each(t, Action, action)?;
        each(t, Property, property)
    })?;
    each(tr, Response, |r| {
        only(r, &[Action])?;
        if r.get(Action).is_empty() {
            return Err(bad(r, "response needs an action"));
        }
        each(r, Action, action)
    })
}

fn action(a: &S2Element) -> Result<(), SemanticError> {
    if a.node_type != Action {
        return Err(bad(a, "expected an action"));
    }
    only(a, ACTION_KEYS)?;
    for key in [Agent, DirectObject, IndirectObject, Object] {
        each(a, key, noun)?;
    }
    each(a, Preposition, preposition)?;
    each(a, Property, property)?;
    each(a, SequenceSimultaneous, action)?;
    each(a, SequenceThen, action)?;
    each(a, Time, |t| {
        only(t, &[Property])?;
        each(t, Property, property)
    })?;
    each(a, Count, leaf)?;
    each(a, Coreference, leaf)
}

fn preposition(p: &S2Element) -> Result<(), SemanticError> {
    only(p, &[Object])?;
    each(p, Object, noun)
}

fn noun(n: &S2Element) -> Result<(), SemanticError> {
    only(n, NOUN_KEYS)?;
    for key in [SpecificOrUnspecific, Count, Plural] {
        if n.get(key).len() > 1 {
            return Err(bad(n, format!("more than one {}", key.as_str())));
        }
        each(n, key, leaf)?;
    }
    each(n, Property, property)?;
    each(n, Preposition, preposition)
}

fn property(p: &S2Element) -> Result<(), SemanticError> {
    only(p, &[Property])?;
    each(p, Property, property)
}

fn leaf(e: &S2Element) -> Result<(), SemanticError> {
    if e.children.is_empty() {
        Ok(())
    } else {
        Err(bad(e, "expected a leaf"))
    }
}
