//! One user's session: transcript, the staged command, labeling, find, and
//! the simulation it drives.

mod protocol;
mod scenario;
mod stage;
mod transcript;

use std::collections::BTreeMap;

pub use protocol::{ClientMessage, EntityView, FindEntry, PointerPhase, ServerMessage};
pub use scenario::{Replay, Scenario, ScenarioError, ScenarioWorld, Timed, SCENARIO_SCHEMA_VERSION};
pub use stage::{stage, Block, Diagram, StageCtx, StageError, StageState, StagedCommand};
pub use transcript::{RangeError, Transcript, Word, WordId};

use crate::bind::{apply_predicate, bind, label_by_link, BindError, LabelChange};
use crate::exec::{compile_action, CompileCtx, ExecError, Program, ScriptId};
use crate::grammar::{parse_text, tokenize, Category};
use crate::rules::{compile_rule, Compiled, RuleError, RuleId};
use crate::semantic::{Builder, IdGen, NodeType, S2Element};
use crate::sim::{Sim, TickReport};
use crate::trace::{snapshot, FinishedScript};
use crate::world::{Entity, EntityId, Vec2, WorldError};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SessionError {
    #[error(transparent)]
    Range(#[from] RangeError),
    #[error("no command is staged")]
    NothingStaged,
    #[error("the staged command cannot run: {}", .0.join("; "))]
    NotConfirmable(Vec<String>),
    #[error(transparent)]
    Bind(#[from] BindError),
    #[error(transparent)]
    Rule(#[from] RuleError),
    #[error(transparent)]
    Exec(#[from] ExecError),
    #[error(transparent)]
    World(#[from] WorldError),
    #[error("no entry for entity {0}")]
    UnknownEntry(EntityId),
    #[error("no word {0} in the transcript")]
    UnknownWord(WordId),
    #[error("'{0}' is not a known verb")]
    NotAVerb(String),
    #[error("malformed message: {0}")]
    Malformed(String),
}

type SResult<T> = Result<T, SessionError>;

/// Messages produced by one simulation tick.
#[derive(Debug, Clone, PartialEq)]
pub struct TickOutput {
    pub report: TickReport,
    pub messages: Vec<ServerMessage>,
}

enum Unit {
    Rule(Compiled),
    Action(Program),
}

pub struct Session {
    pub sim: Sim,
    pub transcript: Transcript,
    staged: Option<StagedCommand>,
    /// Confirmed graphs, for pronouns and repeated nouns.
    history: Vec<S2Element>,
    substitutions: BTreeMap<String, String>,
    selection: Vec<EntityId>,
    drag: Option<Vec2>,
    /// A "this is a ..." utterance waiting for something to be touched.
    pending_label: Option<(Vec<WordId>, String)>,
    queue: Vec<StagedCommand>,
    paused: bool,
}

impl Session {
    pub fn new(sim: Sim) -> Self {
        Session {
            sim,
            transcript: Transcript::default(),
            staged: None,
            history: Vec::new(),
            substitutions: BTreeMap::new(),
            selection: Vec::new(),
            drag: None,
            pending_label: None,
            queue: Vec::new(),
            paused: false,
        }
    }

    pub fn staged(&self) -> Option<&StagedCommand> {
        self.staged.as_ref()
    }

    pub fn paused(&self) -> bool {
        self.paused
    }

    pub fn selection(&self) -> &[EntityId] {
        &self.selection
    }

    /// Decodes and handles one client frame. Bad frames get an error reply.
    pub fn handle_json(&mut self, text: &str) -> Vec<ServerMessage> {
        match serde_json::from_str::<ClientMessage>(text) {
            Ok(m) => self.handle(m),
            Err(e) => vec![ServerMessage::error(SessionError::Malformed(e.to_string()))],
        }
    }

    pub fn handle(&mut self, msg: ClientMessage) -> Vec<ServerMessage> {
        self.dispatch(msg).unwrap_or_else(|e| vec![ServerMessage::error(e)])
    }

    fn transcript_state(&self) -> ServerMessage {
        ServerMessage::TranscriptState {
            words: self.transcript.words().to_vec(),
        }
    }

    fn diagram_state(&self) -> ServerMessage {
        ServerMessage::DiagramState {
            diagram: self.staged.as_ref().map(StagedCommand::diagram),
        }
    }

    fn rule_list(&self) -> ServerMessage {
        ServerMessage::RuleList {
            rules: self.sim.rules.list(),
            actions: self.sim.vm.list_actions(),
        }
    }

    fn dispatch(&mut self, msg: ClientMessage) -> SResult<Vec<ServerMessage>> {
        use ClientMessage as C;
        let out = match msg {
            C::SpeechText { text } => {
                let words = self.transcript.append_speech(&text);
                let mut out = vec![];
                if let Some(changes) = self.deictic_label(&words, &text)? {
                    out.push(ServerMessage::LabelChanges { changes });
                }
                out.insert(0, self.transcript_state());
                out
            }
            C::Pointer { phase, x, y, hits } => self.pointer(phase, Vec2::new(x, y), hits)?,
            C::StrokeAdd { x, y, w, h, payload } => {
                let id = self.sim.world.create(Entity {
                    payload,
                    ..Entity::sketch(&[], x, y, w, h)
                });
                vec![ServerMessage::Created { id }]
            }
            C::LabelLink { entities, word } => {
                let w = self.transcript.word(word).ok_or(SessionError::UnknownWord(word))?;
                let tok = tokenize(&self.sim.lex, &w.text)
                    .into_iter()
                    .find(|t| t.category != Category::Punct)
                    .ok_or(SessionError::UnknownWord(word))?;
                let changes = label_by_link(&mut self.sim.world, &entities, &tok)?;
                vec![ServerMessage::LabelChanges { changes }]
            }
            C::Stage => {
                let words = self.transcript.selected().iter().map(|w| w.id).collect();
                self.restage(words);
                vec![self.diagram_state()]
            }
            C::Confirm => {
                let cmd = self.staged.as_mut().ok_or(SessionError::NothingStaged)?;
                if !cmd.confirmable() {
                    return Err(SessionError::NotConfirmable(cmd.diagram().errors));
                }
                cmd.state = StageState::Confirmed;
                self.queue.push(cmd.clone());
                vec![self.diagram_state()]
            }
            C::Discard => {
                self.transcript.discard();
                self.staged = None;
                self.history.clear();
                self.pending_label = None;
                vec![self.transcript_state(), self.diagram_state()]
            }
            C::SelectWords { first, last, on } => {
                self.transcript.select_words(first, last, on)?;
                vec![self.transcript_state()]
            }
            C::EditText { first, last, text } => {
                self.transcript.edit_text(first, last, &text)?;
                vec![self.transcript_state()]
            }
            C::Relink { node, entity, replace } => {
                let cmd = self.staged.as_mut().ok_or(SessionError::NothingStaged)?;
                cmd.relink(&self.sim.world, node, entity, replace)?;
                vec![self.diagram_state()]
            }
            C::Unlink { node, entity } => {
                let cmd = self.staged.as_mut().ok_or(SessionError::NothingStaged)?;
                cmd.unlink(node, entity)?;
                vec![self.diagram_state()]
            }
            C::SubstituteVerb { unknown, verb } => {
                let verb = self.sim.lex.verb_lemma(&verb).ok_or(SessionError::NotAVerb(verb))?;
                let unknown = self.sim.lex.guess_verb_lemma(&unknown.to_lowercase());
                self.substitutions.insert(unknown, verb);
                if let Some(s) = self.staged.as_ref().filter(|s| s.state == StageState::Staged) {
                    let words = s.words.clone();
                    self.restage(words);
                }
                vec![self.diagram_state()]
            }
            C::Find { labels } => vec![ServerMessage::FindResults {
                entries: self.find(&labels),
            }],
            C::Warp { id } => {
                let e = self.sim.world.get(id).map_err(|_| SessionError::UnknownEntry(id))?;
                let at = e.position;
                self.sim.world.camera.center = at;
                self.sim.world.camera.follow = None;
                vec![]
            }
            C::Copy { id } => {
                if !self.sim.world.alive(id) {
                    return Err(SessionError::UnknownEntry(id));
                }
                let id = self.sim.world.copy(id)?;
                vec![ServerMessage::Created { id }]
            }
            C::Delete { id } => {
                self.sim.world.delete(id).map_err(|_| SessionError::UnknownEntry(id))?;
                vec![]
            }
            C::ToggleRule { id } => {
                self.sim.toggle_rule(id)?;
                vec![self.rule_list()]
            }
            C::DeleteRule { id } => {
                self.sim.delete_rule(id)?;
                vec![self.rule_list()]
            }
            C::CancelAction { id } => {
                self.sim.cancel_action(id)?;
                vec![self.rule_list()]
            }
            C::ListRules => vec![self.rule_list()],
            C::Press { id } => {
                if !self.sim.world.alive(id) {
                    return Err(SessionError::UnknownEntry(id));
                }
                self.sim.world.push_event(crate::world::WorldEvent::Press { id });
                vec![]
            }
            C::Pause => {
                self.paused = true;
                vec![]
            }
            C::Resume => {
                self.paused = false;
                vec![]
            }
        };
        Ok(out)
    }

    fn restage(&mut self, words: Vec<WordId>) {
        let text = words
            .iter()
            .filter_map(|id| self.transcript.word(*id))
            .map(|w| w.text.as_str())
            .collect::<Vec<_>>()
            .join(" ");
        let ctx = StageCtx {
            lex: &self.sim.lex,
            world: &self.sim.world,
            selection: &self.selection,
            history: &self.history,
            substitutions: &self.substitutions,
            verbs: &self.sim.vm.registry,
            user_verbs: &self.sim.vm.user_verbs,
        };
        self.staged = Some(stage(&ctx, words, &text));
    }

    fn pointer(&mut self, phase: PointerPhase, at: Vec2, hits: Vec<EntityId>) -> SResult<Vec<ServerMessage>> {
        let mut out = Vec::new();
        match phase {
            PointerPhase::Down => {
                self.selection = hits.into_iter().filter(|id| self.sim.world.alive(*id)).collect();
                self.drag = Some(at);
                if !self.selection.is_empty() {
                    if let Some((words, text)) = self.pending_label.take() {
                        if let Some(changes) = self.deictic_label(&words, &text)? {
                            out.push(ServerMessage::LabelChanges { changes });
                            out.push(self.transcript_state());
                        }
                    }
                }
            }
            PointerPhase::Move => {
                if let Some(last) = self.drag {
                    let delta = at - last;
                    for &id in &self.selection {
                        let root = self.sim.world.ancestors(id).last().copied().unwrap_or(id);
                        if root == id || !self.selection.contains(&root) {
                            let _ = self.sim.world.translate(root, delta);
                        }
                    }
                    self.drag = Some(at);
                }
            }
            PointerPhase::Up => self.drag = None,
        }
        Ok(out)
    }

    /// Applies "this is a ..." to the touched entities right away. Returns
    /// None when the text is not such a sentence, or nothing is touched yet
    /// (the sentence then waits for the next touch).
    fn deictic_label(&mut self, words: &[WordId], text: &str) -> SResult<Option<Vec<LabelChange>>> {
        let lex = self.sim.lex.clone();
        let Ok(parses) = parse_text(&lex, text) else { return Ok(None) };
        let Ok(root) = Builder::new(&lex, &mut IdGen::default()).build(&parses) else {
            return Ok(None);
        };
        let cmds = stage::commands(&root);
        let copular = !cmds.is_empty()
            && cmds.iter().all(|c| {
                c.node_type == NodeType::Action
                    && matches!(c.label.as_str(), "be" | "become")
                    && c.get(NodeType::Agent)
                        .iter()
                        .any(|a| a.noun_spec().is_some_and(|s| s.deictic))
            });
        if !copular {
            return Ok(None);
        }
        if self.selection.is_empty() {
            self.pending_label = Some((words.to_vec(), text.to_string()));
            return Ok(None);
        }
        let slots = bind(&root, &self.sim.world, &self.selection);
        let mut changes = Vec::new();
        for c in cmds {
            let targets: Vec<EntityId> = c
                .get(NodeType::Agent)
                .iter()
                .filter_map(|a| slots.iter().find(|s| s.node == a.id))
                .flat_map(|s| s.instances().to_vec())
                .collect();
            changes.extend(apply_predicate(&mut self.sim.world, c, &targets));
        }
        if let (Some(&first), Some(&last)) = (words.first(), words.last()) {
            self.transcript.select_words(first, last, false)?;
        }
        Ok(Some(changes))
    }

    pub fn find(&self, labels: &[String]) -> Vec<FindEntry> {
        let lex = &self.sim.lex;
        let wanted: Vec<String> = labels
            .iter()
            .map(|l| {
                let l = l.to_lowercase();
                if lex.is_adjective(&l) {
                    l
                } else {
                    lex.noun_lemma(&l).0
                }
            })
            .collect();
        self.sim
            .world
            .entities
            .values()
            .filter(|e| !wanted.is_empty() && wanted.iter().all(|l| e.has_noun(l) || e.has_adjective(l)))
            .map(|e| FindEntry {
                id: e.id,
                nouns: e.nouns.clone(),
                adjectives: e.adjectives.clone(),
                x: e.position.x,
                y: e.position.y,
            })
            .collect()
    }

    /// Compiles a confirmed command in full before running any of it.
    fn apply_confirmed(&mut self, cmd: StagedCommand) -> SResult<ServerMessage> {
        let root = cmd.root.ok_or(SessionError::NothingStaged)?;
        let mut user_verbs = self.sim.vm.user_verbs.clone();
        let mut units = Vec::new();
        for c in stage::commands(&root) {
            if c.node_type == NodeType::TriggerResponse {
                let compiled = compile_rule(c, &cmd.slots, &self.sim.lex, &self.sim.vm.registry, &user_verbs)?;
                if let Some(d) = &compiled.definition {
                    user_verbs.insert(d.name.clone(), d.clone());
                }
                units.push(Unit::Rule(compiled));
            } else {
                let ctx = CompileCtx {
                    lex: &self.sim.lex,
                    slots: &cmd.slots,
                    params: &Default::default(),
                    verbs: &self.sim.vm.registry,
                    user_verbs: &user_verbs,
                };
                units.push(Unit::Action(compile_action(&ctx, c, &[])?));
            }
        }
        let mut scripts: Vec<ScriptId> = Vec::new();
        let mut rules: Vec<RuleId> = Vec::new();
        for u in units {
            match u {
                Unit::Rule(c) => rules.push(self.sim.install(c)),
                Unit::Action(p) => scripts.push(self.sim.launch(p)),
            }
        }
        self.history.push(root);
        Ok(ServerMessage::Confirmed { scripts, rules })
    }

    /// Runs confirmed commands, then one simulation tick. Nothing happens
    /// while paused.
    pub fn tick(&mut self) -> Option<TickOutput> {
        if self.paused {
            return None;
        }
        let mut messages = Vec::new();
        for cmd in std::mem::take(&mut self.queue) {
            let installs = cmd.root.as_ref().is_some_and(|r| {
                stage::commands(r)
                    .iter()
                    .any(|c| c.node_type == NodeType::TriggerResponse)
            });
            match self.apply_confirmed(cmd) {
                Ok(m) => {
                    messages.push(m);
                    if installs {
                        messages.push(self.rule_list());
                    }
                }
                Err(e) => messages.push(ServerMessage::error(e)),
            }
        }
        let report = self.sim.step();
        messages.push(self.world_delta(&report));
        Some(TickOutput { report, messages })
    }

    pub fn world_delta(&self, report: &TickReport) -> ServerMessage {
        let world = &self.sim.world;
        let entities = snapshot(world)
            .into_iter()
            .filter_map(|state| {
                let e = world.entities.get(&state.id)?;
                Some(EntityView {
                    nouns: e.nouns.clone(),
                    adjectives: e.adjectives.clone(),
                    parent: e.parent,
                    static_flag: e.static_flag,
                    payload: e.payload.clone(),
                    state,
                })
            })
            .collect();
        ServerMessage::WorldDelta {
            tick: report.tick,
            paused: self.paused,
            camera: world.camera.clone(),
            entities,
            events: report.events.clone(),
            scripts_started: report.started.clone(),
            scripts_finished: report
                .finished
                .iter()
                .map(|&(id, status)| FinishedScript { id, status })
                .collect(),
        }
    }
}
