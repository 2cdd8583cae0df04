use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::verbs::{Channel, Env, Step, VerbCall, VerbRegistry, VerbRun};
use super::{resolve, Agent, Bound, CallSpec, ExecError, Instr, Program, ScriptId, Status};
use crate::world::EntityId;

/// Nesting limit for user-defined verbs calling each other.
pub const MAX_DEPTH: usize = 16;

/// A verb taught by a rule whose trigger verb was unknown; calls expand the
/// rule's response with the caller's entities in place of the trigger's.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserVerb {
    pub name: String,
    pub program: Arc<Program>,
    pub agent_lemmas: Vec<String>,
    pub dobj_lemmas: Vec<String>,
}

pub enum ScriptKind {
    Program {
        program: Arc<Program>,
        pc: usize,
        /// Children started since the last wait.
        pending: BTreeSet<ScriptId>,
        iteration: u64,
        /// Tick the current iteration began; unset until the first step.
        iteration_start: Option<u64>,
        /// Tick the script reached its loop end.
        looped_at: Option<u64>,
    },
    Verb {
        call: VerbCall,
        run: Box<dyn VerbRun>,
        channel: Channel,
        /// Steps left when the call has a duration.
        remaining: Option<u64>,
        /// The verb finished before its duration ran out.
        idle: bool,
        stepped_at: Option<u64>,
    },
}

pub struct Script {
    pub id: ScriptId,
    pub parent: Option<ScriptId>,
    pub params: Arc<Bound>,
    pub depth: usize,
    pub rule: Option<String>,
    pub started: u64,
    pub kind: ScriptKind,
}

impl Script {
    fn verb(&self) -> Option<&VerbCall> {
        match &self.kind {
            ScriptKind::Verb { call, .. } => Some(call),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StartRecord {
    pub id: ScriptId,
    pub verb: String,
    pub agent: Agent,
    pub targets: Vec<EntityId>,
    pub rule: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptInfo {
    pub id: ScriptId,
    pub parent: Option<ScriptId>,
    /// Verb name, or "program" for sequencing scripts.
    pub verb: String,
    pub agent: Option<Agent>,
    pub rule: Option<String>,
    pub started: u64,
}

#[derive(Default)]
pub struct Vm {
    scripts: BTreeMap<ScriptId, Script>,
    next_id: ScriptId,
    pub registry: VerbRegistry,
    pub user_verbs: BTreeMap<String, UserVerb>,
    pub started: Vec<StartRecord>,
    pub finished: Vec<(ScriptId, Status)>,
    pub errors: Vec<ExecError>,
    tick: u64,
}

impl Vm {
    pub fn new(registry: VerbRegistry) -> Self {
        Vm {
            registry,
            next_id: 1,
            ..Vm::default()
        }
    }

    fn alloc(&mut self) -> ScriptId {
        let id = self.next_id.max(1);
        self.next_id = id + 1;
        id
    }

    /// Starts a top-level program; it first runs on the next `step`.
    pub fn launch(&mut self, program: Arc<Program>, params: Bound, rule: Option<String>) -> ScriptId {
        self.spawn_program(None, program, Arc::new(params), rule, 0)
    }

    fn spawn_program(
        &mut self,
        parent: Option<ScriptId>,
        program: Arc<Program>,
        params: Arc<Bound>,
        rule: Option<String>,
        depth: usize,
    ) -> ScriptId {
        let id = self.alloc();
        self.scripts.insert(
            id,
            Script {
                id,
                parent,
                params,
                depth,
                rule,
                started: self.tick,
                kind: ScriptKind::Program {
                    program,
                    pc: 0,
                    pending: BTreeSet::new(),
                    iteration: 0,
                    iteration_start: None,
                    looped_at: None,
                },
            },
        );
        id
    }

    pub fn is_running(&self, id: ScriptId) -> bool {
        self.scripts.contains_key(&id)
    }

    pub fn is_empty(&self) -> bool {
        self.scripts.is_empty()
    }

    pub fn list_actions(&self) -> Vec<ScriptInfo> {
        self.scripts
            .values()
            .map(|s| ScriptInfo {
                id: s.id,
                parent: s.parent,
                verb: s.verb().map_or_else(|| "program".to_string(), |c| c.verb.clone()),
                agent: s.verb().map(|c| c.agent),
                rule: s.rule.clone(),
                started: s.started,
            })
            .collect()
    }

    /// Clears the per-tick logs.
    pub fn begin_tick(&mut self, tick: u64) {
        self.tick = tick;
        self.started.clear();
        self.finished.clear();
        self.errors.clear();
    }

    /// Advances every script by one tick. Verb scripts step at most once per
    /// tick, so calling this again in the same tick only runs new work.
    pub fn step(&mut self, env: &mut Env) {
        let mut work: VecDeque<ScriptId> = self.scripts.keys().copied().collect();
        while let Some(id) = work.pop_front() {
            let Some(script) = self.scripts.get(&id) else { continue };
            if matches!(script.kind, ScriptKind::Program { .. }) {
                self.step_program(id, env, &mut work);
            } else {
                self.step_verb(id, env, &mut work);
            }
        }
    }

    fn step_verb(&mut self, id: ScriptId, env: &mut Env, work: &mut VecDeque<ScriptId>) {
        let tick = self.tick;
        let Some(s) = self.scripts.get_mut(&id) else { return };
        let ScriptKind::Verb { call, run, remaining, idle, stepped_at, .. } = &mut s.kind else {
            return;
        };
        if *stepped_at == Some(tick) {
            return;
        }
        *stepped_at = Some(tick);
        if !*idle && run.step(call, env) == Step::Done {
            *idle = true;
        }
        let finished = match remaining {
            Some(left) => {
                *left = left.saturating_sub(1);
                *left == 0
            }
            None => *idle,
        };
        if finished {
            self.finish(id, Status::Done, env, work);
        }
    }

    fn step_program(&mut self, id: ScriptId, env: &mut Env, work: &mut VecDeque<ScriptId>) {
        let tick = self.tick;
        loop {
            let Some(s) = self.scripts.get_mut(&id) else { return };
            let ScriptKind::Program { program, pc, pending, iteration, iteration_start, looped_at } = &mut s.kind
            else {
                return;
            };
            iteration_start.get_or_insert(tick);
            let Some(instr) = program.instrs.get(*pc).cloned() else {
                // a program ends once its last children have
                let open: Vec<ScriptId> = pending.iter().copied().collect();
                if !open.iter().any(|c| self.scripts.contains_key(c)) {
                    self.finish(id, Status::Done, env, work);
                }
                return;
            };
            match instr {
                Instr::Call { call } => {
                    *pc += 1;
                    let (params, depth, rule) = (s.params.clone(), s.depth, s.rule.clone());
                    let kids = self.start_call(id, &call, &params, depth, rule, env);
                    if let Some(ScriptKind::Program { pending, .. }) = self.scripts.get_mut(&id).map(|s| &mut s.kind) {
                        pending.extend(&kids);
                    }
                    work.extend(kids);
                }
                Instr::Spawn { program } => {
                    *pc += 1;
                    let (params, depth, rule) = (s.params.clone(), s.depth, s.rule.clone());
                    let kid = self.spawn_program(Some(id), program, params, rule, depth);
                    if let Some(ScriptKind::Program { pending, .. }) = self.scripts.get_mut(&id).map(|s| &mut s.kind) {
                        pending.insert(kid);
                    }
                    work.push_back(kid);
                }
                Instr::Wait => {
                    let open: Vec<ScriptId> = pending.iter().copied().collect();
                    if open.iter().any(|c| self.scripts_contains(*c)) {
                        return;
                    }
                    let Some(ScriptKind::Program { pc, pending, .. }) = self.scripts.get_mut(&id).map(|s| &mut s.kind)
                    else {
                        return;
                    };
                    pending.clear();
                    *pc += 1;
                }
                Instr::LoopEnd { head, count, interval } => {
                    if count.is_some_and(|n| *iteration + 1 >= n) {
                        *pc += 1;
                        continue;
                    }
                    match *looped_at {
                        None => {
                            *looped_at = Some(tick);
                            return;
                        }
                        Some(at) if at == tick => return,
                        Some(_) if tick - iteration_start.unwrap_or(tick) < interval => return,
                        Some(_) => {
                            *looped_at = None;
                            *iteration += 1;
                            *iteration_start = Some(tick);
                            *pc = head;
                        }
                    }
                }
            }
        }
    }

    fn scripts_contains(&self, id: ScriptId) -> bool {
        self.scripts.contains_key(&id)
    }

    fn agents_of(&self, call: &CallSpec, params: &Bound, env: &mut Env) -> Vec<Agent> {
        if call.agents.is_empty() {
            return vec![Agent::View];
        }
        let r = resolve(&call.agents, params, env.world, env.rng);
        let mut out: Vec<Agent> = r.ids.into_iter().map(Agent::Entity).collect();
        if r.view {
            out.push(Agent::View);
        }
        if r.self_ref {
            out.push(Agent::SelfRef);
        }
        out
    }

    /// Starts the verb scripts of one call; returns their ids.
    fn start_call(
        &mut self,
        parent: ScriptId,
        spec: &CallSpec,
        params: &Arc<Bound>,
        depth: usize,
        rule: Option<String>,
        env: &mut Env,
    ) -> Vec<ScriptId> {
        let agents = self.agents_of(spec, params, env);
        if spec.verb == "stop" {
            let ids: Vec<EntityId> = agents.iter().filter_map(|a| a.entity()).collect();
            self.stop_from(Some(parent), &ids, spec.action.as_deref(), env);
            return Vec::new();
        }
        if let Some(user) = self.user_verbs.get(&spec.verb).cloned() {
            if depth + 1 > MAX_DEPTH {
                self.errors.push(ExecError::RecursionLimit(spec.verb.clone()));
                return Vec::new();
            }
            let dobj = resolve(&spec.dobj, params, env.world, env.rng).ids;
            let mut out = Vec::new();
            for agent in agents {
                let mut bound = Bound::new();
                for l in &user.agent_lemmas {
                    bound.insert(l.clone(), agent.entity().into_iter().collect());
                }
                for l in &user.dobj_lemmas {
                    bound.entry(l.clone()).or_default().extend(&dobj);
                }
                out.push(self.spawn_program(Some(parent), user.program.clone(), Arc::new(bound), rule.clone(), depth + 1));
            }
            return out;
        }
        let Some(module) = self.registry.get(&spec.verb).cloned() else {
            self.errors.push(ExecError::UnknownVerb(spec.verb.clone()));
            return Vec::new();
        };
        let channel = module.channel();
        let mut out = Vec::new();
        for agent in agents {
            let call = VerbCall {
                verb: spec.verb.clone(),
                agent,
                dobj: resolve(&spec.dobj, params, env.world, env.rng),
                iobj: resolve(&spec.iobj, params, env.world, env.rng),
                preps: spec
                    .preps
                    .iter()
                    .map(|p| (p.prep.clone(), resolve(&p.objects, params, env.world, env.rng)))
                    .collect(),
                modifiers: spec.modifiers.clone(),
                action: spec.action.clone(),
                predicate: spec.predicate.clone(),
            };
            if channel != Channel::Free {
                let older: Vec<ScriptId> = self
                    .scripts
                    .values()
                    .filter(|s| match &s.kind {
                        ScriptKind::Verb { call: c, channel: ch, .. } => *ch == channel && c.agent == agent,
                        _ => false,
                    })
                    .map(|s| s.id)
                    .collect();
                for o in older {
                    self.cancel_one(o, env);
                }
            }
            let run = match module.start(&call, env) {
                Ok(run) => run,
                Err(e) => {
                    self.errors.push(e);
                    continue;
                }
            };
            let id = self.alloc();
            let mut targets = call.dobj.ids.clone();
            targets.extend(call.iobj.ids.iter());
            for (_, r) in &call.preps {
                targets.extend(r.ids.iter());
            }
            self.started.push(StartRecord {
                id,
                verb: call.verb.clone(),
                agent,
                targets,
                rule: rule.clone(),
            });
            self.scripts.insert(
                id,
                Script {
                    id,
                    parent: Some(parent),
                    params: params.clone(),
                    depth,
                    rule: rule.clone(),
                    started: self.tick,
                    kind: ScriptKind::Verb {
                        call,
                        run,
                        channel,
                        remaining: spec.duration.map(|d| d.max(1)),
                        idle: false,
                        stepped_at: None,
                    },
                },
            );
            out.push(id);
        }
        out
    }

    fn finish(&mut self, id: ScriptId, status: Status, env: &mut Env, work: &mut VecDeque<ScriptId>) {
        let Some(mut s) = self.scripts.remove(&id) else { return };
        if let ScriptKind::Verb { call, run, .. } = &mut s.kind {
            run.end(call, env);
        }
        self.finished.push((id, status));
        if let Some(p) = s.parent.filter(|p| self.scripts.contains_key(p)) {
            work.push_back(p);
        }
    }

    fn descendants(&self, id: ScriptId) -> Vec<ScriptId> {
        let mut out = vec![id];
        let mut i = 0;
        while i < out.len() {
            let cur = out[i];
            out.extend(self.scripts.values().filter(|s| s.parent == Some(cur)).map(|s| s.id));
            i += 1;
        }
        out
    }

    /// Cancels one script without touching its relatives.
    fn cancel_one(&mut self, id: ScriptId, env: &mut Env) {
        let mut sink = VecDeque::new();
        self.finish(id, Status::Cancelled, env, &mut sink);
        self.finished.pop();
        self.finished.push((id, Status::Cancelled));
    }

    /// Cancels a script and everything it started.
    pub fn cancel(&mut self, id: ScriptId, env: &mut Env) -> Result<(), ExecError> {
        if !self.scripts.contains_key(&id) {
            return Err(ExecError::UnknownScript(id));
        }
        let mut all = self.descendants(id);
        // children first so their end hooks run before the parent's
        all.reverse();
        for s in all {
            self.cancel_one(s, env);
        }
        Ok(())
    }

    fn root_of(&self, mut id: ScriptId) -> ScriptId {
        while let Some(p) = self.scripts.get(&id).and_then(|s| s.parent) {
            if !self.scripts.contains_key(&p) {
                break;
            }
            id = p;
        }
        id
    }

    /// Stops verb scripts of `agents` (all agents when empty) running `verb`
    /// (any verb when `None`) together with the programs that started them.
    /// Returns the number of verb scripts stopped.
    pub fn stop(&mut self, agents: &[EntityId], verb: Option<&str>, env: &mut Env) -> usize {
        self.stop_from(None, agents, verb, env)
    }

    fn stop_from(&mut self, caller: Option<ScriptId>, agents: &[EntityId], verb: Option<&str>, env: &mut Env) -> usize {
        let own_root = caller.map(|c| self.root_of(c));
        let hits: Vec<ScriptId> = self
            .scripts
            .values()
            .filter(|s| {
                s.verb().is_some_and(|c| {
                    (agents.is_empty() || c.agent.entity().is_some_and(|a| agents.contains(&a)))
                        && verb.map_or(true, |v| v == c.verb)
                })
            })
            .map(|s| s.id)
            .collect();
        for &h in &hits {
            if !self.scripts.contains_key(&h) {
                continue;
            }
            let root = self.root_of(h);
            if Some(root) == own_root {
                self.cancel_one(h, env);
            } else {
                let _ = self.cancel(root, env);
            }
        }
        hits.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::{ArgSource, PrepArg};
    use crate::lexicon::Tuning;
    use crate::world::{Entity, Vec2, World, DT};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    struct Rig {
        world: World,
        tuning: Tuning,
        rng: ChaCha8Rng,
        vm: Vm,
    }

    impl Rig {
        fn new() -> Self {
            Rig {
                world: World::new(),
                tuning: crate::lexicon::Lexicon::default().tuning,
                rng: ChaCha8Rng::seed_from_u64(7),
                vm: Vm::new(VerbRegistry::builtin()),
            }
        }

        fn tick(&mut self) {
            let t = self.world.tick + 1;
            self.world.tick = t;
            self.vm.begin_tick(t);
            let mut env = Env { world: &mut self.world, tuning: &self.tuning, rng: &mut self.rng };
            self.vm.step(&mut env);
        }

        fn run(&mut self, calls: Vec<Instr>) -> ScriptId {
            self.vm.launch(Arc::new(Program { instrs: calls }), Bound::new(), None)
        }
    }

    fn call(verb: &str, agent: EntityId) -> CallSpec {
        let mut c = CallSpec::new(verb);
        c.agents = vec![ArgSource::Fixed { ids: vec![agent] }];
        c
    }

    fn dir(mut c: CallSpec, d: &str) -> CallSpec {
        c.preps.push(PrepArg { prep: d.into(), objects: vec![] });
        c
    }

    fn instr(c: CallSpec) -> Instr {
        Instr::Call { call: Box::new(c) }
    }

    #[test]
    fn timed_move_covers_speed_times_duration() {
        let mut r = Rig::new();
        let sq = r.world.insert(Entity::sketch(&["square"], 0.0, 0.0, 10.0, 10.0));
        let mut c = dir(call("move", sq), "up");
        c.duration = Some(30);
        r.run(vec![instr(c), Instr::Wait]);
        for _ in 0..40 {
            r.tick();
        }
        let y = r.world.entities[&sq].position.y;
        assert!((y - 100.0 * 30.0 * DT).abs() < 1e-9, "{y}");
        assert!(r.vm.is_empty());
    }

    #[test]
    fn adjectives_and_intensifiers_scale_speed() {
        let mut r = Rig::new();
        let a = r.world.insert(Entity::sketch(&["dog"], 0.0, 0.0, 1.0, 1.0));
        let b = r.world.insert(Entity::sketch(&["dog"], 0.0, 100.0, 1.0, 1.0));
        r.world.add_adjective(b, "fast").unwrap();
        let c = r.world.insert(Entity::sketch(&["dog"], 0.0, 200.0, 1.0, 1.0));
        r.world.add_adjective(c, "fast").unwrap();
        r.world.get_mut(c).unwrap().intensifiers.insert("fast".into(), vec!["very".into(), "very".into()]);
        for id in [a, b, c] {
            r.run(vec![instr(dir(call("move", id), "right"))]);
        }
        r.tick();
        let x = |id| r.world.entities[&id].position.x;
        let base = 100.0 * DT;
        assert!((x(a) - base).abs() < 1e-12);
        assert!((x(b) - 2.0 * base).abs() < 1e-12);
        assert!((x(c) - 2.0 * 1.5 * 1.5 * base).abs() < 1e-12);
    }

    #[test]
    fn newer_motion_replaces_older() {
        let mut r = Rig::new();
        let a = r.world.insert(Entity::sketch(&["dog"], 0.0, 0.0, 1.0, 1.0));
        r.run(vec![instr(dir(call("move", a), "right"))]);
        r.tick();
        r.run(vec![instr(dir(call("move", a), "up"))]);
        r.tick();
        let verbs: Vec<_> = r.vm.list_actions().into_iter().filter(|s| s.verb == "move").collect();
        assert_eq!(verbs.len(), 1);
        assert_eq!(r.vm.finished.iter().filter(|f| f.1 == Status::Cancelled).count(), 1);
    }

    #[test]
    fn forever_keeps_running() {
        let mut r = Rig::new();
        let a = r.world.insert(Entity::sketch(&["frog"], 0.0, 0.0, 1.0, 1.0));
        let root = r.run(vec![
            instr(call("jump", a)),
            Instr::Wait,
            Instr::LoopEnd { head: 0, count: None, interval: 0 },
        ]);
        for _ in 0..10_000 {
            r.tick();
        }
        assert!(r.vm.is_running(root));
    }

    #[test]
    fn counted_loop_runs_n_times() {
        let mut r = Rig::new();
        let a = r.world.insert(Entity::sketch(&["frog"], 0.0, 0.0, 1.0, 1.0));
        r.run(vec![instr(call("jump", a)), Instr::Wait, Instr::LoopEnd { head: 0, count: Some(3), interval: 0 }]);
        let mut jumps = 0;
        for _ in 0..200 {
            r.tick();
            jumps += r.vm.started.len();
        }
        assert_eq!(jumps, 3);
        assert!(r.vm.is_empty());
    }

    #[test]
    fn interval_is_start_to_start() {
        let mut r = Rig::new();
        let a = r.world.insert(Entity::sketch(&["frog"], 0.0, 0.0, 1.0, 1.0));
        r.run(vec![instr(call("jump", a)), Instr::Wait, Instr::LoopEnd { head: 0, count: None, interval: 120 }]);
        let mut starts = Vec::new();
        for _ in 0..400 {
            r.tick();
            if !r.vm.started.is_empty() {
                starts.push(r.world.tick);
            }
        }
        assert_eq!(starts, vec![1, 121, 241, 361]);
    }

    #[test]
    fn stop_cancels_whole_program() {
        let mut r = Rig::new();
        let a = r.world.insert(Entity::sketch(&["dog"], 0.0, 0.0, 1.0, 1.0));
        let b = r.world.insert(Entity::sketch(&["dog"], 50.0, 0.0, 1.0, 1.0));
        let sub = Program { instrs: vec![instr(call("rotate", a)), Instr::Wait] };
        let root = r.run(vec![
            instr(dir(call("move", a), "right")),
            Instr::Spawn { program: Arc::new(sub) },
            Instr::Wait,
        ]);
        let other = r.run(vec![instr(dir(call("move", b), "right"))]);
        r.tick();
        let n = {
            let mut env = Env { world: &mut r.world, tuning: &r.tuning, rng: &mut r.rng };
            r.vm.stop(&[a], Some("move"), &mut env)
        };
        assert_eq!(n, 1);
        assert!(!r.vm.is_running(root));
        assert!(r.vm.is_running(other));
        assert_eq!(r.world.entities[&a].angular_velocity, 0.0);
        assert!(r.vm.list_actions().iter().all(|s| s.agent != Some(Agent::Entity(a))));
    }

    #[test]
    fn duration_cuts_and_pads() {
        let mut r = Rig::new();
        let a = r.world.insert(Entity::sketch(&["frog"], 0.0, 0.0, 1.0, 1.0));
        let mut c = call("jump", a);
        c.duration = Some(100);
        let root = r.run(vec![instr(c)]);
        for _ in 0..99 {
            r.tick();
        }
        assert!(r.vm.is_running(root));
        r.tick();
        assert!(!r.vm.is_running(root));
        assert_eq!(r.world.entities[&a].position, Vec2::ZERO);
    }

    #[test]
    fn user_verb_recursion_is_capped() {
        let mut r = Rig::new();
        let a = r.world.insert(Entity::sketch(&["dog"], 0.0, 0.0, 1.0, 1.0));
        let mut again = CallSpec::new("dance");
        again.agents = vec![ArgSource::Param { lemma: "dog".into() }];
        r.vm.user_verbs.insert(
            "dance".into(),
            UserVerb {
                name: "dance".into(),
                program: Arc::new(Program { instrs: vec![instr(again), Instr::Wait] }),
                agent_lemmas: vec!["dog".into()],
                dobj_lemmas: vec![],
            },
        );
        r.run(vec![instr(call("dance", a)), Instr::Wait]);
        r.tick();
        assert_eq!(r.vm.errors, vec![ExecError::RecursionLimit("dance".into())]);
        r.tick();
        assert!(r.vm.is_empty());
    }
}
