use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use super::vm::UserVerb;
use super::{ArgSource, CallSpec, ExecError, Instr, Modifier, PrepArg, Program, VerbRegistry, EVENT_VERBS};
use crate::bind::{BindingSlot, SlotMode};
use crate::lexicon::Lexicon;
use crate::semantic::{Annotation, NodeType, Reserved, S2Element};
use crate::world::ticks_for;

pub struct CompileCtx<'a> {
    pub lex: &'a Lexicon,
    pub slots: &'a [BindingSlot],
    /// Lemmas whose type slots take their entities from the launcher.
    pub params: &'a BTreeSet<String>,
    pub verbs: &'a VerbRegistry,
    pub user_verbs: &'a BTreeMap<String, UserVerb>,
}

impl CompileCtx<'_> {
    fn sources(&self, nouns: &[S2Element]) -> Vec<ArgSource> {
        let mut out = Vec::new();
        for n in nouns {
            if n.kind == "NUMBER" {
                if let Some(value) = n.number() {
                    out.push(ArgSource::Number { value });
                }
                continue;
            }
            let Some(slot) = self.slots.iter().find(|s| s.node == n.id) else { continue };
            out.push(match &slot.mode {
                SlotMode::Instances { ids } => ArgSource::Fixed { ids: ids.clone() },
                SlotMode::Type { .. } if self.params.contains(&slot.lemma) => ArgSource::Param {
                    lemma: slot.lemma.clone(),
                },
                SlotMode::Type { query } => ArgSource::Query { query: query.clone() },
                SlotMode::Deferred { query } => ArgSource::Random { query: query.clone() },
                SlotMode::Prototype { name } => ArgSource::Proto { name: name.clone() },
                SlotMode::Reserved { which: Reserved::View } => ArgSource::View,
                SlotMode::Reserved { .. } => ArgSource::SelfRef,
            });
        }
        out
    }

    fn seconds(&self, t: &S2Element) -> f64 {
        let unit = self.lex.time_unit(&t.label).map_or(1.0, |(_, s)| s);
        let few = t
            .get(NodeType::Property)
            .iter()
            .any(|p| p.text() == Some("few"));
        let n = match t.number() {
            Some(n) => n,
            None if few => self.lex.tuning.few_seconds,
            None => 1.0,
        };
        n * unit
    }
}

fn modifiers(action: &S2Element) -> Vec<Modifier> {
    action
        .get(NodeType::Property)
        .iter()
        .filter(|p| p.label == "modifier" && p.text() != Some("forever"))
        .filter_map(|p| {
            Some(Modifier {
                word: p.text()?.to_string(),
                intensifiers: p
                    .get(NodeType::Property)
                    .iter()
                    .filter_map(|c| c.text().map(str::to_string))
                    .collect(),
            })
        })
        .collect()
}

/// Compiles one ACTION element with its sequenced sub-actions. Agents are
/// inherited by sub-actions that leave theirs to be filled in.
pub fn compile_action(ctx: &CompileCtx, action: &S2Element, inherited: &[ArgSource]) -> Result<Program, ExecError> {
    let verb = action.label.as_str();
    if EVENT_VERBS.contains(&verb) {
        return Err(ExecError::MisplacedEventVerb(verb.to_string()));
    }
    let user = ctx.user_verbs.contains_key(verb);
    if verb != "stop" && !user && !ctx.verbs.contains(verb) {
        return Err(ExecError::UnknownVerb(verb.to_string()));
    }

    let mut call = CallSpec::new(verb);
    call.source = action.id;
    call.agents = ctx.sources(action.get(NodeType::Agent));
    if call.agents.is_empty() && action.annotations.contains(&Annotation::MustFillInAgent) {
        call.agents = inherited.to_vec();
    }
    call.dobj = ctx.sources(action.get(NodeType::DirectObject));
    call.iobj = ctx.sources(action.get(NodeType::IndirectObject));
    call.preps = action
        .get(NodeType::Preposition)
        .iter()
        .map(|p| PrepArg {
            prep: p.label.clone(),
            objects: ctx.sources(p.get(NodeType::Object)),
        })
        .collect();
    call.modifiers = modifiers(action);
    call.action = action
        .get(NodeType::Property)
        .iter()
        .find(|p| p.label == "action")
        .and_then(|p| p.text().map(str::to_string));
    if matches!(verb, "be" | "become") {
        call.predicate = Some(Arc::new(action.clone()));
    }
    let times = action.get(NodeType::Time);
    call.duration = times
        .iter()
        .find(|t| t.type_name == "DURATION")
        .map(|t| ticks_for(ctx.seconds(t)));
    if let Some(v) = ctx.verbs.get(verb) {
        v.check(&call)?;
    }

    let agents = call.agents.clone();
    let mut instrs = vec![Instr::Call { call: Box::new(call) }];
    for s in action.get(NodeType::SequenceSimultaneous) {
        let p = compile_action(ctx, s, &agents)?;
        instrs.push(Instr::Spawn { program: Arc::new(p) });
    }
    instrs.push(Instr::Wait);
    for s in action.get(NodeType::SequenceThen) {
        let p = compile_action(ctx, s, &agents)?;
        instrs.push(Instr::Spawn { program: Arc::new(p) });
        instrs.push(Instr::Wait);
    }

    let forever = action
        .get(NodeType::Property)
        .iter()
        .any(|p| p.label == "modifier" && p.text() == Some("forever"));
    let count = action
        .get(NodeType::Count)
        .iter()
        .find(|c| c.kind == "LOOP")
        .and_then(|c| c.number())
        .map(|n| n.max(0.0) as u64);
    let interval = times.iter().find(|t| t.type_name == "INTERVAL");
    if forever || count.is_some() || interval.is_some() {
        if count == Some(0) {
            return Ok(Program::default());
        }
        instrs.push(Instr::LoopEnd {
            head: 0,
            count: if forever { None } else { count },
            interval: interval.map_or(0, |t| ticks_for(ctx.seconds(t))),
        });
    }
    Ok(Program { instrs })
}
