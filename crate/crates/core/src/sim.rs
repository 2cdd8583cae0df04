//! The simulation loop: VM, kinematics, collisions and rules in a fixed
//! per-tick order, driven by a seeded generator.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::exec::{Env, ExecError, Program, ScriptId, StartRecord, Status, UserVerb, VerbRegistry, Vm};
use crate::lexicon::Lexicon;
use crate::rules::{Compiled, FireAction, RuleBook, RuleError, RuleId};
use crate::world::{Phase, World, WorldEvent, DT};

/// What happened during one tick.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TickReport {
    pub tick: u64,
    pub events: Vec<WorldEvent>,
    pub started: Vec<StartRecord>,
    pub finished: Vec<(ScriptId, Status)>,
    pub errors: Vec<ExecError>,
}

pub struct Sim {
    pub world: World,
    pub vm: Vm,
    pub rules: RuleBook,
    pub lex: Arc<Lexicon>,
    pub seed: u64,
    rng: ChaCha8Rng,
    definitions: BTreeMap<RuleId, UserVerb>,
}

impl Sim {
    pub fn new(world: World, lex: Arc<Lexicon>, seed: u64) -> Self {
        Sim {
            world,
            vm: Vm::new(VerbRegistry::builtin()),
            rules: RuleBook::default(),
            lex,
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
            definitions: BTreeMap::new(),
        }
    }

    pub fn tick(&self) -> u64 {
        self.world.tick
    }

    pub fn launch(&mut self, program: Program) -> ScriptId {
        self.vm.launch(Arc::new(program), Default::default(), None)
    }

    pub fn install(&mut self, compiled: Compiled) -> RuleId {
        let id = self.rules.install(compiled.rule);
        if let Some(def) = compiled.definition {
            self.vm.user_verbs.insert(def.name.clone(), def.clone());
            self.definitions.insert(id, def);
        }
        id
    }

    pub fn toggle_rule(&mut self, id: RuleId) -> Result<bool, RuleError> {
        let on = self.rules.toggle(id)?;
        if let Some(def) = self.definitions.get(&id) {
            if on {
                self.vm.user_verbs.insert(def.name.clone(), def.clone());
            } else {
                self.vm.user_verbs.remove(&def.name);
            }
        }
        Ok(on)
    }

    pub fn delete_rule(&mut self, id: RuleId) -> Result<(), RuleError> {
        self.rules.delete(id)?;
        if let Some(def) = self.definitions.remove(&id) {
            self.vm.user_verbs.remove(&def.name);
        }
        Ok(())
    }

    pub fn cancel_action(&mut self, id: ScriptId) -> Result<(), ExecError> {
        let mut env = Env {
            world: &mut self.world,
            tuning: &self.lex.tuning,
            rng: &mut self.rng,
        };
        self.vm.cancel(id, &mut env)
    }

    /// Advances one tick: scripts, motion, camera, collisions, then rules,
    /// whose responses start within the same tick.
    pub fn step(&mut self) -> TickReport {
        let tick = self.world.tick + 1;
        self.world.tick = tick;
        self.vm.begin_tick(tick);
        let tuning = &self.lex.tuning;
        {
            let mut env = Env {
                world: &mut self.world,
                tuning,
                rng: &mut self.rng,
            };
            self.vm.step(&mut env);
        }
        self.world.integrate(DT);
        self.world.update_camera();
        self.world.detect_collisions();
        let events = self.world.drain_events();
        let firings = self.rules.evaluate(&self.world, &events);
        let mut env = Env {
            world: &mut self.world,
            tuning,
            rng: &mut self.rng,
        };
        for f in firings {
            match f.action {
                FireAction::Launch { program, params } => {
                    let id = self.vm.launch(program, params, Some(f.display));
                    self.rules.note_script(f.rule, &f.key, id);
                }
                FireAction::Cancel { script } => {
                    // the response may have finished on its own
                    let _ = self.vm.cancel(script, &mut env);
                }
            }
        }
        self.vm.step(&mut env);
        TickReport {
            tick,
            events: events
                .into_iter()
                .filter(|e| !matches!(e, WorldEvent::Collision { phase: Phase::Continue, .. }))
                .collect(),
            started: std::mem::take(&mut self.vm.started),
            finished: std::mem::take(&mut self.vm.finished),
            errors: std::mem::take(&mut self.vm.errors),
        }
    }
}
