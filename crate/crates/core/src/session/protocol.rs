//! JSON messages exchanged with a client. Each message is one object with a
//! "type" field.

use serde::{Deserialize, Serialize};

use super::stage::Diagram;
use super::transcript::{Word, WordId};
use crate::bind::LabelChange;
use crate::exec::ScriptInfo;
use crate::rules::{RuleId, RuleSummary};
use crate::semantic::ElementId;
use crate::trace::{FinishedScript, EntityState};
use crate::world::{Camera, EntityId, WorldEvent};
use crate::exec::{ScriptId, StartRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PointerPhase {
    Down,
    Move,
    Up,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ClientMessage {
    SpeechText {
        text: String,
    },
    Pointer {
        phase: PointerPhase,
        x: f64,
        y: f64,
        #[serde(default)]
        hits: Vec<EntityId>,
    },
    StrokeAdd {
        x: f64,
        y: f64,
        w: f64,
        h: f64,
        #[serde(default)]
        payload: serde_json::Value,
    },
    LabelLink {
        entities: Vec<EntityId>,
        word: WordId,
    },
    Stage,
    Confirm,
    Discard,
    SelectWords {
        first: WordId,
        last: WordId,
        on: bool,
    },
    EditText {
        first: WordId,
        last: WordId,
        text: String,
    },
    Relink {
        node: ElementId,
        entity: EntityId,
        #[serde(default)]
        replace: bool,
    },
    Unlink {
        node: ElementId,
        entity: EntityId,
    },
    SubstituteVerb {
        unknown: String,
        verb: String,
    },
    Find {
        labels: Vec<String>,
    },
    Warp {
        id: EntityId,
    },
    Copy {
        id: EntityId,
    },
    Delete {
        id: EntityId,
    },
    ToggleRule {
        id: RuleId,
    },
    DeleteRule {
        id: RuleId,
    },
    CancelAction {
        id: ScriptId,
    },
    ListRules,
    Press {
        id: EntityId,
    },
    Pause,
    Resume,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FindEntry {
    pub id: EntityId,
    pub nouns: Vec<String>,
    pub adjectives: Vec<String>,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntityView {
    #[serde(flatten)]
    pub state: EntityState,
    pub nouns: Vec<String>,
    pub adjectives: Vec<String>,
    pub parent: Option<EntityId>,
    #[serde(rename = "static")]
    pub static_flag: bool,
    pub payload: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerMessage {
    TranscriptState {
        words: Vec<Word>,
    },
    DiagramState {
        diagram: Option<Diagram>,
    },
    WorldDelta {
        tick: u64,
        paused: bool,
        camera: Camera,
        entities: Vec<EntityView>,
        events: Vec<WorldEvent>,
        scripts_started: Vec<StartRecord>,
        scripts_finished: Vec<FinishedScript>,
    },
    RuleList {
        rules: Vec<RuleSummary>,
        actions: Vec<ScriptInfo>,
    },
    FindResults {
        entries: Vec<FindEntry>,
    },
    LabelChanges {
        changes: Vec<LabelChange>,
    },
    Created {
        id: EntityId,
    },
    Confirmed {
        scripts: Vec<ScriptId>,
        rules: Vec<RuleId>,
    },
    Error {
        message: String,
    },
}

impl ServerMessage {
    pub fn error(e: impl std::fmt::Display) -> Self {
        ServerMessage::Error { message: e.to_string() }
    }
}
