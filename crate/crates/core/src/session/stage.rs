//! Staging: text to a bound graph and its diagram, with no effect on the world.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::transcript::WordId;
use crate::bind::{bind, BindError, BindingSlot, SlotMode};
use crate::exec::{compile_action, CompileCtx, UserVerb, VerbRegistry};
use crate::grammar::{parse_sentence, split_sentences, tokenize, Category, GrammarError};
use crate::lexicon::Lexicon;
use crate::rules::compile_rule;
use crate::semantic::{resolve_coreference, validate, Builder, ElementId, IdGen, NodeType, S2Element, SemanticError};
use crate::world::{EntityId, World};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum StageState {
    Staged,
    Confirmed,
    Discarded,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "error", rename_all = "snake_case")]
pub enum StageError {
    Grammar { detail: GrammarError },
    Semantic { detail: SemanticError },
    UnknownVerb { element: ElementId, verb: String, suggestions: Vec<String> },
    Compile { message: String },
}

impl StageError {
    pub fn message(&self) -> String {
        match self {
            StageError::Grammar { detail } => detail.to_string(),
            StageError::Semantic { detail } => detail.to_string(),
            StageError::UnknownVerb { verb, .. } => format!("unknown verb '{verb}'"),
            StageError::Compile { message } => message.clone(),
        }
    }
}

/// Everything staging reads. Nothing here is mutated.
pub struct StageCtx<'a> {
    pub lex: &'a Lexicon,
    pub world: &'a World,
    pub selection: &'a [EntityId],
    pub history: &'a [S2Element],
    pub substitutions: &'a BTreeMap<String, String>,
    pub verbs: &'a VerbRegistry,
    pub user_verbs: &'a BTreeMap<String, UserVerb>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StagedCommand {
    pub words: Vec<WordId>,
    pub text: String,
    pub root: Option<S2Element>,
    pub slots: Vec<BindingSlot>,
    pub errors: Vec<StageError>,
    pub state: StageState,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "block", rename_all = "snake_case")]
pub enum Block {
    Verb {
        element: ElementId,
        word: String,
        unknown: bool,
        suggestions: Vec<String>,
    },
    Noun {
        element: ElementId,
        word: String,
        mode: String,
        entities: Vec<EntityId>,
        error: Option<BindError>,
    },
    Prep {
        element: ElementId,
        word: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagram {
    pub state: StageState,
    pub text: String,
    pub blocks: Vec<Block>,
    pub errors: Vec<String>,
    pub confirmable: bool,
}

fn trigger_verbs(root: &S2Element) -> BTreeSet<String> {
    root.walk()
        .filter(|e| e.node_type == NodeType::Trigger)
        .filter_map(|t| t.first(NodeType::Action))
        .map(|a| a.label.clone())
        .collect()
}

/// Commands under the root: (TRIGGER_RESPONSE or ACTION) elements.
pub(crate) fn commands(root: &S2Element) -> Vec<&S2Element> {
    root.get(NodeType::CmdList)
        .iter()
        .filter_map(|cmd| cmd.first(NodeType::TriggerResponse).or_else(|| cmd.first(NodeType::Action)))
        .collect()
}

/// Compiles every command without running anything, to surface errors early.
fn dry_compile(ctx: &StageCtx, root: &S2Element, slots: &[BindingSlot]) -> Vec<StageError> {
    let mut user_verbs = ctx.user_verbs.clone();
    let mut out = Vec::new();
    for c in commands(root) {
        let res = if c.node_type == NodeType::TriggerResponse {
            compile_rule(c, slots, ctx.lex, ctx.verbs, &user_verbs).map(|r| {
                if let Some(d) = r.definition {
                    user_verbs.insert(d.name.clone(), d);
                }
            })
            .map_err(|e| e.to_string())
        } else {
            let cc = CompileCtx {
                lex: ctx.lex,
                slots,
                params: &BTreeSet::new(),
                verbs: ctx.verbs,
                user_verbs: &user_verbs,
            };
            compile_action(&cc, c, &[]).map(|_| ()).map_err(|e| e.to_string())
        };
        if let Err(message) = res {
            out.push(StageError::Compile { message });
        }
    }
    out
}

pub fn stage(ctx: &StageCtx, words: Vec<WordId>, text: &str) -> StagedCommand {
    let mut cmd = StagedCommand {
        words,
        text: text.to_string(),
        root: None,
        slots: Vec::new(),
        errors: Vec::new(),
        state: StageState::Staged,
    };
    let tokens = tokenize(ctx.lex, text);
    let parses: Result<Vec<_>, GrammarError> = split_sentences(&tokens)
        .iter()
        .filter(|s| s.iter().any(|t| t.category != Category::Punct))
        .map(|s| parse_sentence(ctx.lex, s))
        .collect();
    let parses = match parses {
        Ok(p) if !p.is_empty() => p,
        Ok(_) => {
            cmd.errors.push(StageError::Grammar {
                detail: GrammarError::UnsupportedGrammar {
                    position: 0,
                    reason: "nothing to parse".into(),
                },
            });
            return cmd;
        }
        Err(detail) => {
            cmd.errors.push(StageError::Grammar { detail });
            return cmd;
        }
    };
    let mut ids = IdGen::after(ctx.history);
    let mut root = match Builder::new(ctx.lex, &mut ids).build(&parses) {
        Ok(r) => r,
        Err(detail) => {
            cmd.errors.push(StageError::Semantic { detail });
            return cmd;
        }
    };
    root.visit_mut(&mut |e| {
        if e.node_type == NodeType::Action {
            if let Some(to) = ctx.substitutions.get(&e.label) {
                e.label = to.clone();
            }
        }
    });
    if let Err(detail) = resolve_coreference(ctx.lex, &mut root, ctx.history, &mut ids) {
        cmd.errors.push(StageError::Semantic { detail });
    }
    if let Err(detail) = validate(&root) {
        cmd.errors.push(StageError::Semantic { detail });
    }
    cmd.slots = bind(&root, ctx.world, ctx.selection);

    let defined = trigger_verbs(&root);
    for a in root.walk().filter(|e| e.node_type == NodeType::Action) {
        let v = a.label.as_str();
        if ctx.lex.is_verb(v) || ctx.user_verbs.contains_key(v) || defined.contains(v) {
            continue;
        }
        cmd.errors.push(StageError::UnknownVerb {
            element: a.id,
            verb: v.to_string(),
            suggestions: ctx.lex.suggest_verbs(v).unwrap_or_default(),
        });
    }
    if cmd.errors.is_empty() {
        cmd.errors = dry_compile(ctx, &root, &cmd.slots);
    }
    cmd.root = Some(root);
    cmd
}

impl StagedCommand {
    pub fn confirmable(&self) -> bool {
        self.state == StageState::Staged
            && self.root.is_some()
            && self.errors.is_empty()
            && self.slots.iter().all(|s| s.error.is_none())
    }

    fn slot_mut(&mut self, node: ElementId) -> Result<&mut BindingSlot, BindError> {
        if self.state != StageState::Staged {
            return Err(BindError::SlotImmutable);
        }
        self.slots
            .iter_mut()
            .find(|s| s.node == node)
            .ok_or(BindError::UnknownSlot(node))
    }

    pub fn relink(&mut self, world: &World, node: ElementId, entity: EntityId, replace: bool) -> Result<(), BindError> {
        self.slot_mut(node)?.relink(world, entity, replace)
    }

    pub fn unlink(&mut self, node: ElementId, entity: EntityId) -> Result<(), BindError> {
        self.slot_mut(node)?.unlink(entity)
    }

    pub fn diagram(&self) -> Diagram {
        let mut blocks = Vec::new();
        if let Some(root) = &self.root {
            let mut items: Vec<(usize, &S2Element)> = Vec::new();
            for (i, cmd) in root.get(NodeType::CmdList).iter().enumerate() {
                let mut els: Vec<&S2Element> = cmd.walk().collect();
                els.sort_by_key(|e| e.token_ref.unwrap_or(usize::MAX));
                items.extend(els.into_iter().map(|e| (i, e)));
            }
            for (_, e) in items {
                if e.node_type == NodeType::Action {
                    let unknown = self.errors.iter().find_map(|err| match err {
                        StageError::UnknownVerb { element, suggestions, .. } if *element == e.id => Some(suggestions),
                        _ => None,
                    });
                    blocks.push(Block::Verb {
                        element: e.id,
                        word: e.label.clone(),
                        unknown: unknown.is_some(),
                        suggestions: unknown.cloned().unwrap_or_default(),
                    });
                } else if e.node_type == NodeType::Preposition {
                    blocks.push(Block::Prep {
                        element: e.id,
                        word: e.label.clone(),
                    });
                } else if let Some(s) = self.slots.iter().find(|s| s.node == e.id) {
                    let mode = match &s.mode {
                        SlotMode::Instances { .. } => "instances",
                        SlotMode::Type { .. } => "type",
                        SlotMode::Deferred { .. } => "deferred",
                        SlotMode::Prototype { .. } => "prototype",
                        SlotMode::Reserved { .. } => "reserved",
                    };
                    blocks.push(Block::Noun {
                        element: e.id,
                        word: s.lemma.clone(),
                        mode: mode.into(),
                        entities: s.instances().to_vec(),
                        error: s.error.clone(),
                    });
                }
            }
        }
        let mut errors: Vec<String> = self.errors.iter().map(StageError::message).collect();
        errors.extend(self.slots.iter().filter_map(|s| s.error.as_ref().map(|e| e.to_string())));
        Diagram {
            state: self.state,
            text: self.text.clone(),
            blocks,
            errors,
            confirmable: self.confirmable(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::Entity;

    fn run(text: &str, world: &World, subs: &BTreeMap<String, String>) -> StagedCommand {
        let lex = Lexicon::default();
        let ctx = StageCtx {
            lex: &lex,
            world,
            selection: &[],
            history: &[],
            substitutions: subs,
            verbs: &VerbRegistry::builtin(),
            user_verbs: &BTreeMap::new(),
        };
        stage(&ctx, Vec::new(), text)
    }

    fn scene() -> World {
        let mut w = World::new();
        w.insert(Entity::sketch(&["character"], 0.0, 0.0, 10.0, 10.0));
        w.insert(Entity::sketch(&["platform"], 50.0, 0.0, 10.0, 10.0));
        w.insert(Entity::sketch(&["platform"], 90.0, 0.0, 10.0, 10.0));
        w
    }

    #[test]
    fn diagram_shows_bound_platforms() {
        let c = run("The character jumps on the platforms", &scene(), &BTreeMap::new());
        assert!(c.confirmable(), "{:?}", c.errors);
        let d = c.diagram();
        let words: Vec<_> = d
            .blocks
            .iter()
            .map(|b| match b {
                Block::Verb { word, .. } | Block::Noun { word, .. } | Block::Prep { word, .. } => word.as_str(),
            })
            .collect();
        assert_eq!(words, ["character", "jump", "on", "platform"]);
        let Block::Noun { entities, .. } = &d.blocks[3] else { panic!() };
        assert_eq!(entities, &[2, 3]);
    }

    #[test]
    fn gibberish_and_unknown_verbs() {
        let w = scene();
        let c = run("the the the", &w, &BTreeMap::new());
        assert!(matches!(c.errors[0], StageError::Grammar { .. }));
        assert!(!c.confirmable());

        let c = run("the character leaps", &w, &BTreeMap::new());
        let Some(StageError::UnknownVerb { verb, suggestions, .. }) = c.errors.first() else {
            panic!("{:?}", c.errors)
        };
        assert_eq!(verb, "leap");
        assert!(suggestions.contains(&"jump".to_string()));

        let subs = BTreeMap::from([("leap".to_string(), "jump".to_string())]);
        let c = run("the character leaps", &w, &subs);
        assert!(c.confirmable(), "{:?}", c.errors);
    }

    #[test]
    fn relink_and_freeze() {
        let w = scene();
        let mut c = run("The character jumps onto the platform", &w, &BTreeMap::new());
        let node = c.slots.iter().find(|s| s.lemma == "platform").unwrap().node;
        assert_eq!(c.slots.iter().find(|s| s.node == node).unwrap().instances(), &[2]);
        c.relink(&w, node, 3, true).unwrap();
        let Block::Noun { entities, .. } = &c.diagram().blocks[3] else { panic!() };
        assert_eq!(entities, &[3]);
        c.unlink(node, 3).unwrap();
        assert!(!c.confirmable());
        c.state = StageState::Confirmed;
        assert_eq!(c.relink(&w, node, 2, true), Err(BindError::SlotImmutable));
    }
}
