//! Scenario files: an initial world, a seed and a schedule of client
//! messages. Replaying one is the headless stand-in for a live client.

use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{ClientMessage, ServerMessage, Session};
use crate::lexicon::Lexicon;
use crate::sim::{Sim, TickReport};
use crate::trace::TraceWriter;
use crate::world::{Entity, Prototype, World};

pub const SCENARIO_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error("reading scenario: {0}")]
    Io(#[from] std::io::Error),
    #[error("scenario JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unsupported scenario schema version {0}")]
    Version(u32),
    #[error("scenario wants lexicon version {want}, loaded {have}")]
    Lexicon { want: String, have: String },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioWorld {
    pub entities: Vec<Entity>,
    pub prototypes: Vec<Prototype>,
}

/// A message delivered after `tick` ticks have run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timed {
    pub tick: u64,
    pub message: ClientMessage,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub schema_version: u32,
    #[serde(default)]
    pub lexicon_version: Option<String>,
    pub seed: u64,
    #[serde(default)]
    pub world: ScenarioWorld,
    #[serde(default)]
    pub messages: Vec<Timed>,
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self, ScenarioError> {
        let s: Scenario = serde_json::from_str(text)?;
        if s.schema_version != SCENARIO_SCHEMA_VERSION {
            return Err(ScenarioError::Version(s.schema_version));
        }
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self, ScenarioError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn session(&self, lex: Arc<Lexicon>) -> Result<Session, ScenarioError> {
        if let Some(want) = &self.lexicon_version {
            if *want != lex.version {
                return Err(ScenarioError::Lexicon {
                    want: want.clone(),
                    have: lex.version.clone(),
                });
            }
        }
        let mut world = World::new();
        for e in &self.world.entities {
            world.insert(e.clone());
        }
        for p in &self.world.prototypes {
            world.add_prototype(p.clone());
        }
        Ok(Session::new(Sim::new(world, lex, self.seed)))
    }

    /// Runs `frames` frames, delivering scheduled messages first in each.
    /// `observe` sees every tick that ran. Replies are returned with the
    /// frame they were produced in.
    pub fn run(
        &self,
        lex: Arc<Lexicon>,
        frames: u64,
        mut observe: impl FnMut(&Session, &TickReport),
    ) -> Result<(Session, Vec<(u64, ServerMessage)>), ScenarioError> {
        let mut session = self.session(lex)?;
        let mut replies = Vec::new();
        let mut schedule = self.messages.clone();
        schedule.sort_by_key(|m| m.tick);
        let mut next = schedule.into_iter().peekable();
        for frame in 0..frames {
            while let Some(m) = next.next_if(|m| m.tick <= frame) {
                for r in session.handle(m.message) {
                    replies.push((frame, r));
                }
            }
            if let Some(out) = session.tick() {
                observe(&session, &out.report);
                replies.extend(
                    out.messages
                        .into_iter()
                        .filter(|m| !matches!(m, ServerMessage::WorldDelta { .. }))
                        .map(|m| (frame, m)),
                );
            }
        }
        Ok((session, replies))
    }

    /// Replays into a JSON Lines trace.
    pub fn replay<W: Write>(&self, lex: Arc<Lexicon>, frames: u64, out: W) -> Result<Replay<W>, ScenarioError> {
        let mut writer = TraceWriter::new(out, self.seed)?;
        let mut failure = None;
        let (session, replies) = self.run(lex, frames, |s, report| {
            if failure.is_none() {
                failure = writer.write(report, &s.sim.world).err();
            }
        })?;
        if let Some(e) = failure {
            return Err(e.into());
        }
        Ok(Replay {
            session,
            out: writer.into_inner(),
            replies,
        })
    }
}

pub struct Replay<W> {
    pub session: Session,
    pub out: W,
    pub replies: Vec<(u64, ServerMessage)>,
}

#[cfg(test)]
mod tests {
    use super::*;

    const SCENE: &str = r#"{
        "schema_version": 1,
        "seed": 3,
        "world": {"entities": [{"id": 1, "nouns": ["boy"], "size": {"x": 10, "y": 10}}]},
        "messages": [
            {"tick": 0, "message": {"type": "speech_text", "text": "the boy moves right"}},
            {"tick": 0, "message": {"type": "stage"}},
            {"tick": 0, "message": {"type": "confirm"}}
        ]
    }"#;

    #[test]
    fn replay_writes_header_and_ticks() {
        let s = Scenario::from_json(SCENE).unwrap();
        let r = s.replay(Arc::new(Lexicon::default()), 10, Vec::new()).unwrap();
        let text = String::from_utf8(r.out).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 11);
        assert_eq!(lines[0], r#"{"schema_version":1,"seed":3}"#);
        assert!(lines[1].starts_with(r#"{"tick":1,"#));
        assert!(r.session.sim.world.get(1).unwrap().position.x > 0.0);
    }

    #[test]
    fn version_checks() {
        let bad = SCENE.replace("\"schema_version\": 1", "\"schema_version\": 9");
        assert!(matches!(Scenario::from_json(&bad), Err(ScenarioError::Version(9))));
        let mut s = Scenario::from_json(SCENE).unwrap();
        s.lexicon_version = Some("zzz".into());
        assert!(s.session(Arc::new(Lexicon::default())).is_err());
    }
}
