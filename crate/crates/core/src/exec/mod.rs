//! Executable form of commands: programs of CALL/WAIT/LOOP instructions run
//! by a tick-driven VM, and the verb library they call into.

mod compile;
pub mod verbs;
mod vm;

use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::lexicon::Tuning;
use crate::semantic::{ElementId, S2Element};
use crate::world::{EntityId, LabelQuery, World, WorldError};

pub use compile::{compile_action, CompileCtx};
pub use verbs::{Channel, Env, Step, VerbCall, VerbModule, VerbRegistry, VerbRun};
pub use vm::{Script, ScriptInfo, ScriptKind, StartRecord, UserVerb, Vm, MAX_DEPTH};

pub type ScriptId = u64;

/// Verbs that only describe events; they are valid only as triggers.
pub const EVENT_VERBS: &[&str] = &["press", "collide", "equal", "exceed"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Status {
    Running,
    Done,
    Cancelled,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error, Serialize, Deserialize)]
pub enum ExecError {
    #[error("unknown verb '{0}'")]
    UnknownVerb(String),
    #[error("'{0}' describes an event and can only be used in a trigger")]
    MisplacedEventVerb(String),
    #[error("'{verb}' needs a {role}")]
    MissingRole { verb: String, role: String },
    #[error("verb '{0}' nests too deeply")]
    RecursionLimit(String),
    #[error("unknown script {0}")]
    UnknownScript(ScriptId),
    #[error(transparent)]
    World(#[from] WorldError),
}

/// Where a role's entities come from when a call starts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum ArgSource {
    Fixed { ids: Vec<EntityId> },
    /// Every live match at call time.
    Query { query: LabelQuery },
    /// One random live match at call time.
    Random { query: LabelQuery },
    Proto { name: String },
    Number { value: f64 },
    /// Entities handed in by whoever launched the program: the matched
    /// trigger nouns of a rule, or the caller's roles for a user verb.
    Param { lemma: String },
    SelfRef,
    View,
}

/// Entities for `Param` sources, by noun lemma.
pub type Bound = std::collections::BTreeMap<String, Vec<EntityId>>;

/// Who performs a verb.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "agent", content = "id", rename_all = "snake_case")]
pub enum Agent {
    Entity(EntityId),
    SelfRef,
    View,
}

impl Agent {
    pub fn entity(self) -> Option<EntityId> {
        match self {
            Agent::Entity(id) => Some(id),
            _ => None,
        }
    }
}

/// Resolved contents of a set of argument sources.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Resolved {
    pub ids: Vec<EntityId>,
    pub proto: Option<String>,
    pub numbers: Vec<f64>,
    pub self_ref: bool,
    pub view: bool,
}

pub fn resolve(sources: &[ArgSource], params: &Bound, world: &World, rng: &mut ChaCha8Rng) -> Resolved {
    let mut out = Resolved::default();
    for s in sources {
        match s {
            ArgSource::Fixed { ids } => out.ids.extend(ids.iter().filter(|id| world.alive(**id))),
            ArgSource::Query { query } => out.ids.extend(world.query(query)),
            ArgSource::Random { query } => {
                let found = world.query(query);
                if !found.is_empty() {
                    out.ids.push(found[rng.gen_range(0..found.len())]);
                }
            }
            ArgSource::Param { lemma } => out.ids.extend(
                params.get(lemma).into_iter().flatten().filter(|id| world.alive(**id)),
            ),
            ArgSource::Proto { name } => out.proto = Some(name.clone()),
            ArgSource::Number { value } => out.numbers.push(*value),
            ArgSource::SelfRef => out.self_ref = true,
            ArgSource::View => out.view = true,
        }
    }
    let mut seen = std::collections::BTreeSet::new();
    out.ids.retain(|id| seen.insert(*id));
    out
}

/// Adjective or adverb with its intensifier chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Modifier {
    pub word: String,
    pub intensifiers: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrepArg {
    pub prep: String,
    pub objects: Vec<ArgSource>,
}

/// One verb invocation as compiled; roles resolve when the call starts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CallSpec {
    pub verb: String,
    pub agents: Vec<ArgSource>,
    pub dobj: Vec<ArgSource>,
    pub iobj: Vec<ArgSource>,
    pub preps: Vec<PrepArg>,
    pub modifiers: Vec<Modifier>,
    /// Verb named by "stop X-ing".
    pub action: Option<String>,
    pub duration: Option<u64>,
    /// Copular predicate, kept whole for labeling verbs.
    pub predicate: Option<Arc<S2Element>>,
    pub source: ElementId,
}

impl CallSpec {
    pub fn new(verb: &str) -> Self {
        CallSpec {
            verb: verb.to_string(),
            agents: Vec::new(),
            dobj: Vec::new(),
            iobj: Vec::new(),
            preps: Vec::new(),
            modifiers: Vec::new(),
            action: None,
            duration: None,
            predicate: None,
            source: 0,
        }
    }

    pub fn has_prep(&self) -> bool {
        !self.preps.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Instr {
    Call { call: Box<CallSpec> },
    /// Runs a sub-program as a child so it proceeds alongside its siblings.
    Spawn { program: Arc<Program> },
    /// Blocks until every child started since the last wait has finished.
    Wait,
    /// Jumps back to `head` until `count` iterations ran; `interval` ticks
    /// separate iteration starts.
    LoopEnd { head: usize, count: Option<u64>, interval: u64 },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Program {
    pub instrs: Vec<Instr>,
}

/// Speed and magnitude multipliers of an agent's adjectives and the call's
/// adverbs, evaluated fresh on every tick.
pub fn modulation(tuning: &Tuning, world: &World, agent: Agent, modifiers: &[Modifier]) -> (f64, f64) {
    let (mut speed, mut mag) = (1.0, 1.0);
    if let Some(e) = agent.entity().and_then(|id| world.entities.get(&id)) {
        for adj in &e.adjectives {
            let chain = e.intensifiers.get(adj).map(Vec::as_slice).unwrap_or(&[]);
            let fx = tuning.adjective_effect(adj, chain);
            speed *= fx.speed;
            mag *= fx.magnitude;
        }
    }
    for m in modifiers {
        let fx = tuning.adjective_effect(&m.word, &m.intensifiers);
        speed *= fx.speed;
        mag *= fx.magnitude;
    }
    (speed, mag)
}
