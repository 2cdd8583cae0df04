//! The built-in verb library. Each verb is a module that checks its roles at
//! compile time and produces a per-call run that is stepped once per tick.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand_chacha::ChaCha8Rng;

use super::{modulation, Agent, CallSpec, ExecError, Modifier, Resolved};
use crate::bind::apply_predicate;
use crate::lexicon::Tuning;
use crate::semantic::S2Element;
use crate::world::{ticks_for, EntityId, EntityKind, Vec2, World, DT};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Step {
    Running,
    Done,
}

/// Verbs on the same channel of the same agent exclude each other: the
/// newest call replaces the running one.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Channel {
    Free,
    Motion,
    Spin,
}

/// A call with every role resolved to entities.
#[derive(Debug, Clone)]
pub struct VerbCall {
    pub verb: String,
    pub agent: Agent,
    pub dobj: Resolved,
    pub iobj: Resolved,
    pub preps: Vec<(String, Resolved)>,
    pub modifiers: Vec<Modifier>,
    pub action: Option<String>,
    pub predicate: Option<Arc<S2Element>>,
}

const DIRECTIONS: &[&str] = &["up", "down", "left", "right", "away"];

impl VerbCall {
    /// First prepositional object list among `names` (any preposition when
    /// empty) that resolved to entities.
    pub fn prep_objects(&self, names: &[&str]) -> Option<(&str, &[EntityId])> {
        self.preps
            .iter()
            .filter(|(p, r)| !r.ids.is_empty() && (names.is_empty() || names.contains(&p.as_str())))
            .map(|(p, r)| (p.as_str(), r.ids.as_slice()))
            .next()
    }

    pub fn direction(&self) -> Option<&str> {
        self.preps
            .iter()
            .find(|(p, r)| r.ids.is_empty() && DIRECTIONS.contains(&p.as_str()))
            .map(|(p, _)| p.as_str())
    }

    pub fn proto(&self) -> Option<&str> {
        self.dobj
            .proto
            .as_deref()
            .or_else(|| self.preps.iter().find_map(|(_, r)| r.proto.as_deref()))
    }

    /// Direct objects, falling back to the agent.
    pub fn patients(&self) -> Vec<EntityId> {
        if !self.dobj.ids.is_empty() {
            self.dobj.ids.clone()
        } else {
            self.agent.entity().into_iter().collect()
        }
    }
}

pub struct Env<'a> {
    pub world: &'a mut World,
    pub tuning: &'a Tuning,
    pub rng: &'a mut ChaCha8Rng,
}

impl Env<'_> {
    pub fn speed(&self, call: &VerbCall) -> f64 {
        self.tuning.base_speed * modulation(self.tuning, self.world, call.agent, &call.modifiers).0
    }

    pub fn magnitude(&self, call: &VerbCall) -> f64 {
        modulation(self.tuning, self.world, call.agent, &call.modifiers).1
    }

    fn pos(&self, agent: Agent) -> Option<Vec2> {
        match agent {
            Agent::Entity(id) => self.world.entities.get(&id).map(|e| e.position),
            Agent::View => Some(self.world.camera.center),
            Agent::SelfRef => None,
        }
    }

    fn shift(&mut self, agent: Agent, delta: Vec2) {
        match agent {
            Agent::Entity(id) => {
                let _ = self.world.translate(id, delta);
            }
            Agent::View => self.world.camera.center = self.world.camera.center + delta,
            Agent::SelfRef => {}
        }
    }

    fn nearest(&self, from: Vec2, ids: &[EntityId]) -> Option<EntityId> {
        ids.iter()
            .filter_map(|id| self.world.entities.get(id))
            .min_by(|a, b| {
                from.distance(a.position)
                    .total_cmp(&from.distance(b.position))
                    .then(a.id.cmp(&b.id))
            })
            .map(|e| e.id)
    }

    /// Moves `agent` up to `step` toward `goal`; true once it is there.
    fn walk(&mut self, agent: Agent, goal: Vec2, step: f64) -> bool {
        let Some(at) = self.pos(agent) else { return true };
        let d = goal - at;
        if d.length() <= step {
            self.shift(agent, d);
            true
        } else {
            self.shift(agent, d.normalized() * step);
            false
        }
    }
}

pub trait VerbRun: Send {
    fn step(&mut self, call: &VerbCall, env: &mut Env) -> Step;
    /// Called once when the run finishes or is cancelled.
    fn end(&mut self, _call: &VerbCall, _env: &mut Env) {}
}

pub trait VerbModule: Send + Sync {
    fn channel(&self) -> Channel {
        Channel::Free
    }
    /// Role checks that do not need the world.
    fn check(&self, _call: &CallSpec) -> Result<(), ExecError> {
        Ok(())
    }
    fn start(&self, call: &VerbCall, env: &mut Env) -> Result<Box<dyn VerbRun>, ExecError>;
}

fn missing(verb: &str, role: &str) -> ExecError {
    ExecError::MissingRole {
        verb: verb.to_string(),
        role: role.to_string(),
    }
}

struct Finished;

impl VerbRun for Finished {
    fn step(&mut self, _: &VerbCall, _: &mut Env) -> Step {
        Step::Done
    }
}

fn done() -> Result<Box<dyn VerbRun>, ExecError> {
    Ok(Box::new(Finished))
}

// ---- motion ----

enum Goal {
    Entity(EntityId),
    Direction(Vec2),
    Away(Vec<EntityId>),
}

fn direction_vector(d: &str) -> Vec2 {
    match d {
        "up" => Vec2::new(0.0, 1.0),
        "down" => Vec2::new(0.0, -1.0),
        "left" => Vec2::new(-1.0, 0.0),
        _ => Vec2::new(1.0, 0.0),
    }
}

struct Move;

struct MoveRun(Goal);

impl VerbModule for Move {
    fn channel(&self) -> Channel {
        Channel::Motion
    }

    fn check(&self, call: &CallSpec) -> Result<(), ExecError> {
        if call.has_prep() {
            Ok(())
        } else {
            Err(missing(&call.verb, "destination or direction"))
        }
    }

    fn start(&self, call: &VerbCall, env: &mut Env) -> Result<Box<dyn VerbRun>, ExecError> {
        let from = env.pos(call.agent).unwrap_or_default();
        let goal = if call.direction() == Some("away") {
            Goal::Away(call.prep_objects(&[]).map(|(_, ids)| ids.to_vec()).unwrap_or_default())
        } else if let Some((p, ids)) = call.prep_objects(&[]) {
            if p == "from" {
                Goal::Away(ids.to_vec())
            } else {
                match env.nearest(from, ids) {
                    Some(t) => Goal::Entity(t),
                    None => return done(),
                }
            }
        } else if let Some(d) = call.direction() {
            Goal::Direction(direction_vector(d))
        } else {
            // the destination has gone
            return done();
        };
        Ok(Box::new(MoveRun(goal)))
    }
}

impl VerbRun for MoveRun {
    fn step(&mut self, call: &VerbCall, env: &mut Env) -> Step {
        let step = env.speed(call) * DT;
        match &self.0 {
            Goal::Entity(t) => {
                let Some(goal) = env.world.entities.get(t).map(|e| e.position) else {
                    return Step::Done;
                };
                if env.walk(call.agent, goal, step) {
                    Step::Done
                } else {
                    Step::Running
                }
            }
            Goal::Direction(d) => {
                env.shift(call.agent, *d * step);
                Step::Running
            }
            Goal::Away(ids) => flee_step(call, env, ids, step),
        }
    }
}

fn flee_step(call: &VerbCall, env: &mut Env, ids: &[EntityId], step: f64) -> Step {
    let Some(at) = env.pos(call.agent) else { return Step::Done };
    let Some(t) = env.nearest(at, ids) else { return Step::Done };
    let away = (at - env.world.entities[&t].position).normalized();
    let away = if away == Vec2::ZERO { Vec2::new(1.0, 0.0) } else { away };
    env.shift(call.agent, away * step);
    Step::Running
}

fn follow_targets(call: &VerbCall) -> Vec<EntityId> {
    if !call.dobj.ids.is_empty() {
        call.dobj.ids.clone()
    } else {
        call.prep_objects(&[]).map(|(_, ids)| ids.to_vec()).unwrap_or_default()
    }
}

struct Follow;

struct FollowRun(Vec<EntityId>);

impl VerbModule for Follow {
    fn channel(&self) -> Channel {
        Channel::Motion
    }

    fn check(&self, call: &CallSpec) -> Result<(), ExecError> {
        if call.dobj.is_empty() && !call.has_prep() {
            return Err(missing(&call.verb, "target"));
        }
        Ok(())
    }

    fn start(&self, call: &VerbCall, env: &mut Env) -> Result<Box<dyn VerbRun>, ExecError> {
        let targets = follow_targets(call);
        if call.agent == Agent::View {
            env.world.camera.follow = targets.first().copied();
        }
        Ok(Box::new(FollowRun(targets)))
    }
}

impl VerbRun for FollowRun {
    fn step(&mut self, call: &VerbCall, env: &mut Env) -> Step {
        if call.agent == Agent::View {
            return match env.world.camera.follow {
                Some(_) => Step::Running,
                None => Step::Done,
            };
        }
        let Some(at) = env.pos(call.agent) else { return Step::Done };
        let Some(t) = env.nearest(at, &self.0) else { return Step::Done };
        let target = &env.world.entities[&t];
        let (goal, reach) = (target.position, target.size.x * 0.5);
        let own = call
            .agent
            .entity()
            .and_then(|a| env.world.entities.get(&a))
            .map_or(0.0, |e| e.size.x * 0.5);
        if at.distance(goal) > reach + own {
            let step = env.speed(call) * DT;
            let d = goal - at;
            let step = step.min(d.length() - reach - own);
            env.shift(call.agent, d.normalized() * step);
        }
        Step::Running
    }

    fn end(&mut self, call: &VerbCall, env: &mut Env) {
        if call.agent == Agent::View {
            env.world.camera.follow = None;
        }
    }
}

struct Flee;

struct FleeRun(Vec<EntityId>);

impl VerbModule for Flee {
    fn channel(&self) -> Channel {
        Channel::Motion
    }

    fn check(&self, call: &CallSpec) -> Result<(), ExecError> {
        Follow.check(call)
    }

    fn start(&self, call: &VerbCall, _env: &mut Env) -> Result<Box<dyn VerbRun>, ExecError> {
        Ok(Box::new(FleeRun(follow_targets(call))))
    }
}

impl VerbRun for FleeRun {
    fn step(&mut self, call: &VerbCall, env: &mut Env) -> Step {
        let step = env.speed(call) * DT;
        flee_step(call, env, &self.0, step)
    }
}

/// Parabolic flight of one entity between two points.
struct Ballistic {
    who: EntityId,
    from: Vec2,
    to: Vec2,
    height: f64,
    ticks: u64,
    k: u64,
}

impl Ballistic {
    fn advance(&mut self, world: &mut World) -> Step {
        if !world.alive(self.who) {
            return Step::Done;
        }
        self.k += 1;
        let s = (self.k as f64 / self.ticks.max(1) as f64).min(1.0);
        let p = self.from + (self.to - self.from) * s + Vec2::new(0.0, 4.0 * self.height * s * (1.0 - s));
        let _ = world.set_position(self.who, p);
        if self.k >= self.ticks {
            Step::Done
        } else {
            Step::Running
        }
    }
}

/// Landing point of `who` jumping relative to `target` with `prep`.
fn landing(world: &World, who: EntityId, prep: &str, target: EntityId) -> Vec2 {
    let me = &world.entities[&who];
    let t = &world.entities[&target];
    let tb = t.aabb();
    let half = me.size * 0.5;
    match prep {
        "on" | "onto" | "upon" => Vec2::new(t.position.x, tb.max.y + half.y),
        "under" | "below" | "beneath" => Vec2::new(t.position.x, tb.min.y - half.y),
        "over" | "across" => {
            let side = if me.position.x <= t.position.x { 1.0 } else { -1.0 };
            Vec2::new(t.position.x + side * (tb.size().x * 0.5 + half.x + 1.0), me.position.y)
        }
        _ => t.position,
    }
}

struct Jump {
    height_factor: fn(&Tuning) -> f64,
}

/// Several targets are visited one after another, nearest first.
struct JumpRun {
    arc: Ballistic,
    prep: String,
    rest: Vec<EntityId>,
    height: f64,
    speed: f64,
}

fn arc(env: &Env, who: EntityId, to: Vec2, height: f64, speed: f64) -> Ballistic {
    let from = env.world.entities[&who].position;
    let base = ticks_for(env.tuning.jump_duration);
    let travel = if speed > 0.0 { ticks_for(from.distance(to) / speed) } else { 0 };
    Ballistic {
        who,
        from,
        to,
        height,
        ticks: base.max(travel).max(1),
        k: 0,
    }
}

impl VerbModule for Jump {
    fn channel(&self) -> Channel {
        Channel::Motion
    }

    fn start(&self, call: &VerbCall, env: &mut Env) -> Result<Box<dyn VerbRun>, ExecError> {
        let Some(who) = call.agent.entity().filter(|id| env.world.alive(*id)) else {
            return done();
        };
        let from = env.world.entities[&who].position;
        let mut prep = String::new();
        let mut rest = Vec::new();
        let to = match call.prep_objects(&[]) {
            Some((p, ids)) => match env.nearest(from, ids) {
                Some(t) => {
                    prep = p.to_string();
                    rest = ids.iter().copied().filter(|id| *id != t).collect();
                    landing(env.world, who, p, t)
                }
                None => from,
            },
            None => match call.direction() {
                Some(d) if d != "up" => from + direction_vector(d) * env.tuning.jump_height,
                _ => from,
            },
        };
        let speed = env.speed(call);
        let height = env.tuning.jump_height * (self.height_factor)(env.tuning) * env.magnitude(call);
        Ok(Box::new(JumpRun {
            arc: arc(env, who, to, height, speed),
            prep,
            rest,
            height,
            speed,
        }))
    }
}

impl VerbRun for JumpRun {
    fn step(&mut self, _call: &VerbCall, env: &mut Env) -> Step {
        if self.arc.advance(env.world) == Step::Running {
            return Step::Running;
        }
        let who = self.arc.who;
        if !env.world.alive(who) {
            return Step::Done;
        }
        let here = env.world.entities[&who].position;
        let Some(next) = env.nearest(here, &self.rest) else { return Step::Done };
        self.rest.retain(|id| *id != next);
        let to = landing(env.world, who, &self.prep, next);
        self.arc = arc(env, who, to, self.height, self.speed);
        Step::Running
    }
}

struct Rotate;

struct RotateRun;

impl VerbModule for Rotate {
    fn channel(&self) -> Channel {
        Channel::Spin
    }

    fn start(&self, _call: &VerbCall, _env: &mut Env) -> Result<Box<dyn VerbRun>, ExecError> {
        Ok(Box::new(RotateRun))
    }
}

impl VerbRun for RotateRun {
    fn step(&mut self, call: &VerbCall, env: &mut Env) -> Step {
        let Some(id) = call.agent.entity() else { return Step::Done };
        let sign = if matches!(call.direction(), Some("right")) { -1.0 } else { 1.0 };
        let w = sign * env.tuning.base_angular_speed * modulation(env.tuning, env.world, call.agent, &call.modifiers).0;
        match env.world.entities.get_mut(&id) {
            Some(e) => {
                e.angular_velocity = w;
                Step::Running
            }
            None => Step::Done,
        }
    }

    fn end(&mut self, call: &VerbCall, env: &mut Env) {
        if let Some(e) = call.agent.entity().and_then(|id| env.world.entities.get_mut(&id)) {
            e.angular_velocity = 0.0;
        }
    }
}

struct Climb;

struct ClimbRun {
    target: EntityId,
    at_base: bool,
}

impl VerbModule for Climb {
    fn channel(&self) -> Channel {
        Channel::Motion
    }

    fn check(&self, call: &CallSpec) -> Result<(), ExecError> {
        Follow.check(call)
    }

    fn start(&self, call: &VerbCall, env: &mut Env) -> Result<Box<dyn VerbRun>, ExecError> {
        let from = env.pos(call.agent).unwrap_or_default();
        match env.nearest(from, &follow_targets(call)) {
            Some(target) => Ok(Box::new(ClimbRun { target, at_base: false })),
            None => done(),
        }
    }
}

impl VerbRun for ClimbRun {
    fn step(&mut self, call: &VerbCall, env: &mut Env) -> Step {
        let (Some(t), Some(me)) = (
            env.world.entities.get(&self.target),
            call.agent.entity().and_then(|a| env.world.entities.get(&a)),
        ) else {
            return Step::Done;
        };
        let tb = t.aabb();
        let half = me.size.y * 0.5;
        let goal = if self.at_base {
            Vec2::new(t.position.x, tb.max.y + half)
        } else {
            Vec2::new(t.position.x, tb.min.y + half)
        };
        let step = env.speed(call) * DT;
        if env.walk(call.agent, goal, step) {
            if self.at_base {
                return Step::Done;
            }
            self.at_base = true;
        }
        Step::Running
    }
}

struct Throw;

struct ThrowRun(Vec<Ballistic>);

impl VerbModule for Throw {
    fn check(&self, call: &CallSpec) -> Result<(), ExecError> {
        if call.dobj.is_empty() {
            return Err(missing(&call.verb, "thing to throw"));
        }
        if !call.has_prep() {
            return Err(missing(&call.verb, "target"));
        }
        Ok(())
    }

    fn start(&self, call: &VerbCall, env: &mut Env) -> Result<Box<dyn VerbRun>, ExecError> {
        let speed = 2.0 * env.speed(call);
        let height = env.tuning.jump_height * env.magnitude(call);
        let mut flights = Vec::new();
        for &who in &call.dobj.ids {
            let _ = env.world.detach(who);
            let from = env.world.entities[&who].position;
            let to = match call.prep_objects(&[]) {
                Some((p, ids)) => match env.nearest(from, ids) {
                    Some(t) => landing(env.world, who, p, t),
                    None => continue,
                },
                None => match call.direction() {
                    Some(d) => from + direction_vector(d) * (env.tuning.base_speed),
                    None => continue,
                },
            };
            let ticks = ticks_for(env.tuning.jump_duration).max(ticks_for(from.distance(to) / speed));
            flights.push(Ballistic { who, from, to, height, ticks: ticks.max(1), k: 0 });
        }
        Ok(Box::new(ThrowRun(flights)))
    }
}

impl VerbRun for ThrowRun {
    fn step(&mut self, _call: &VerbCall, env: &mut Env) -> Step {
        let mut running = false;
        for f in &mut self.0 {
            if f.k < f.ticks && f.advance(env.world) == Step::Running {
                running = true;
            }
        }
        if running {
            Step::Running
        } else {
            Step::Done
        }
    }
}

struct Give;

struct GiveRun {
    item: EntityId,
    to: EntityId,
    carrying: bool,
}

impl VerbModule for Give {
    fn channel(&self) -> Channel {
        Channel::Motion
    }

    fn check(&self, call: &CallSpec) -> Result<(), ExecError> {
        if call.dobj.is_empty() {
            return Err(missing(&call.verb, "thing to give"));
        }
        if call.iobj.is_empty() && !call.has_prep() {
            return Err(missing(&call.verb, "recipient"));
        }
        Ok(())
    }

    fn start(&self, call: &VerbCall, _env: &mut Env) -> Result<Box<dyn VerbRun>, ExecError> {
        let recipient = if call.iobj.ids.is_empty() {
            call.prep_objects(&["to"]).map(|(_, ids)| ids.to_vec()).unwrap_or_default()
        } else {
            call.iobj.ids.clone()
        };
        match (call.dobj.ids.first(), recipient.first(), call.agent.entity()) {
            (Some(&item), Some(&to), Some(_)) => Ok(Box::new(GiveRun { item, to, carrying: false })),
            _ => done(),
        }
    }
}

impl VerbRun for GiveRun {
    fn step(&mut self, call: &VerbCall, env: &mut Env) -> Step {
        let Some(me) = call.agent.entity() else { return Step::Done };
        if !env.world.alive(self.item) || !env.world.alive(me) {
            return Step::Done;
        }
        let step = env.speed(call) * DT;
        if !self.carrying {
            let goal = env.world.entities[&self.item].position;
            if env.walk(call.agent, goal, step) {
                let _ = env.world.attach(self.item, me);
                self.carrying = true;
            }
            return Step::Running;
        }
        let Some(goal) = env.world.entities.get(&self.to).map(|e| e.position) else {
            let _ = env.world.detach(self.item);
            return Step::Done;
        };
        if env.walk(call.agent, goal, step) {
            let _ = env.world.detach(self.item);
            return Step::Done;
        }
        Step::Running
    }

    fn end(&mut self, _call: &VerbCall, env: &mut Env) {
        if self.carrying && env.world.alive(self.item) {
            let _ = env.world.detach(self.item);
        }
    }
}

// ---- state changes ----

struct Create;

impl VerbModule for Create {
    fn check(&self, call: &CallSpec) -> Result<(), ExecError> {
        if call.dobj.is_empty() {
            return Err(missing(&call.verb, "thing to create"));
        }
        Ok(())
    }

    fn start(&self, call: &VerbCall, env: &mut Env) -> Result<Box<dyn VerbRun>, ExecError> {
        let Some(proto) = call.proto().map(str::to_string) else {
            return Err(missing(&call.verb, "saved thing"));
        };
        let at = match call.prep_objects(&[]) {
            Some((_, ids)) => env.world.entities[&ids[0]].position,
            None => env.pos(call.agent).unwrap_or(env.world.camera.center),
        };
        env.world.spawn(&proto, at)?;
        done()
    }
}

struct Destroy;

impl VerbModule for Destroy {
    fn start(&self, call: &VerbCall, env: &mut Env) -> Result<Box<dyn VerbRun>, ExecError> {
        for id in call.patients() {
            if env.world.alive(id) {
                env.world.delete(id)?;
            }
        }
        done()
    }
}

struct Transform;

impl VerbModule for Transform {
    fn check(&self, call: &CallSpec) -> Result<(), ExecError> {
        if call.has_prep() {
            Ok(())
        } else {
            Err(missing(&call.verb, "thing to turn into"))
        }
    }

    fn start(&self, call: &VerbCall, env: &mut Env) -> Result<Box<dyn VerbRun>, ExecError> {
        let Some(proto) = call.proto().map(str::to_string) else {
            return Err(missing(&call.verb, "saved thing"));
        };
        for id in call.patients() {
            env.world.transform_into(id, &proto)?;
        }
        done()
    }
}

/// be/become: changes labels only.
struct Label;

impl VerbModule for Label {
    fn start(&self, call: &VerbCall, env: &mut Env) -> Result<Box<dyn VerbRun>, ExecError> {
        if let (Some(p), Some(id)) = (&call.predicate, call.agent.entity()) {
            apply_predicate(env.world, p, &[id]);
        }
        done()
    }
}

struct Visibility(bool);

impl VerbModule for Visibility {
    fn start(&self, call: &VerbCall, env: &mut Env) -> Result<Box<dyn VerbRun>, ExecError> {
        for id in call.patients() {
            env.world.set_visible(id, self.0)?;
        }
        done()
    }
}

struct Attach;

impl VerbModule for Attach {
    fn check(&self, call: &CallSpec) -> Result<(), ExecError> {
        if call.has_prep() {
            Ok(())
        } else {
            Err(missing(&call.verb, "thing to attach to"))
        }
    }

    fn start(&self, call: &VerbCall, env: &mut Env) -> Result<Box<dyn VerbRun>, ExecError> {
        if let Some((_, to)) = call.prep_objects(&[]) {
            let parent = to[0];
            for id in call.patients() {
                if id != parent {
                    env.world.attach(id, parent)?;
                }
            }
        }
        done()
    }
}

struct Detach;

impl VerbModule for Detach {
    fn start(&self, call: &VerbCall, env: &mut Env) -> Result<Box<dyn VerbRun>, ExecError> {
        for id in call.patients() {
            env.world.detach(id)?;
        }
        done()
    }
}

struct Reflect;

impl VerbModule for Reflect {
    fn check(&self, call: &CallSpec) -> Result<(), ExecError> {
        if call.dobj.is_empty() {
            return Err(missing(&call.verb, "thing to reflect"));
        }
        Ok(())
    }

    fn start(&self, call: &VerbCall, env: &mut Env) -> Result<Box<dyn VerbRun>, ExecError> {
        let Some(wall) = call.agent.entity().and_then(|id| env.world.entities.get(&id)) else {
            return done();
        };
        let wb = wall.aabb();
        for &ball in &call.dobj.ids {
            let Some(b) = env.world.entities.get_mut(&ball) else { continue };
            let bb = b.aabb();
            if !bb.overlaps(&wb) {
                continue;
            }
            let px = (bb.max.x - wb.min.x).min(wb.max.x - bb.min.x);
            let py = (bb.max.y - wb.min.y).min(wb.max.y - bb.min.y);
            let rel = bb.center() - wb.center();
            // negate the velocity along the axis of least penetration when
            // it points into the reflector
            if px < py {
                if b.velocity.x * rel.x < 0.0 || (rel.x == 0.0 && b.velocity.x != 0.0) {
                    b.velocity.x = -b.velocity.x;
                }
            } else if b.velocity.y * rel.y < 0.0 || (rel.y == 0.0 && b.velocity.y != 0.0) {
                b.velocity.y = -b.velocity.y;
            }
        }
        done()
    }
}

struct Step1(f64);

impl VerbModule for Step1 {
    fn start(&self, call: &VerbCall, env: &mut Env) -> Result<Box<dyn VerbRun>, ExecError> {
        let delta = self.0 * env.tuning.number_step;
        for id in call.patients() {
            let e = env.world.get_mut(id)?;
            if e.kind == EntityKind::Number {
                e.number += delta;
            }
        }
        done()
    }
}

struct Teleport;

impl VerbModule for Teleport {
    fn check(&self, call: &CallSpec) -> Result<(), ExecError> {
        Transform.check(call)
    }

    fn start(&self, call: &VerbCall, env: &mut Env) -> Result<Box<dyn VerbRun>, ExecError> {
        if let Some((_, ids)) = call.prep_objects(&[]) {
            let to = env.world.entities[&ids[0]].position;
            match call.agent {
                Agent::View => env.world.camera.center = to,
                _ => {
                    for id in call.patients() {
                        env.world.set_position(id, to)?;
                    }
                }
            }
        }
        done()
    }
}

struct Put;

impl VerbModule for Put {
    fn check(&self, call: &CallSpec) -> Result<(), ExecError> {
        if call.dobj.is_empty() {
            return Err(missing(&call.verb, "thing to put"));
        }
        Transform.check(call)
    }

    fn start(&self, call: &VerbCall, env: &mut Env) -> Result<Box<dyn VerbRun>, ExecError> {
        if let Some((p, ids)) = call.prep_objects(&[]) {
            for &id in &call.dobj.ids {
                let to = landing(env.world, id, p, ids[0]);
                env.world.set_position(id, to)?;
            }
        }
        done()
    }
}

struct Pack;

impl VerbModule for Pack {
    fn check(&self, call: &CallSpec) -> Result<(), ExecError> {
        if call.dobj.is_empty() {
            return Err(missing(&call.verb, "region"));
        }
        Transform.check(call)
    }

    fn start(&self, call: &VerbCall, env: &mut Env) -> Result<Box<dyn VerbRun>, ExecError> {
        let Some(proto) = call.proto().map(str::to_string) else {
            return Err(missing(&call.verb, "saved thing"));
        };
        for &region in &call.dobj.ids {
            env.world.pack_region(region, &proto)?;
        }
        done()
    }
}

#[derive(Clone, Default)]
pub struct VerbRegistry {
    verbs: BTreeMap<String, Arc<dyn VerbModule>>,
}

impl std::fmt::Debug for VerbRegistry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_list().entries(self.verbs.keys()).finish()
    }
}

impl VerbRegistry {
    pub fn builtin() -> Self {
        let mut r = VerbRegistry::default();
        r.register("move", Move);
        r.register("follow", Follow);
        r.register("flee", Flee);
        r.register("jump", Jump { height_factor: |_| 1.0 });
        r.register("hop", Jump { height_factor: |t| t.hop_height_factor });
        r.register("rotate", Rotate);
        r.register("climb", Climb);
        r.register("throw", Throw);
        r.register("give", Give);
        for name in ["create", "make", "draw"] {
            r.register(name, Create);
        }
        r.register("destroy", Destroy);
        r.register("transform", Transform);
        r.register("be", Label);
        r.register("become", Label);
        r.register("appear", Visibility(true));
        r.register("disappear", Visibility(false));
        r.register("attach", Attach);
        r.register("detach", Detach);
        r.register("reflect", Reflect);
        r.register("increase", Step1(1.0));
        r.register("decrease", Step1(-1.0));
        r.register("teleport", Teleport);
        r.register("put", Put);
        r.register("pack", Pack);
        r
    }

    /// Adds or replaces a verb; compiled programs pick it up by name.
    pub fn register(&mut self, name: &str, module: impl VerbModule + 'static) {
        self.verbs.insert(name.to_string(), Arc::new(module));
    }

    pub fn get(&self, name: &str) -> Option<&Arc<dyn VerbModule>> {
        self.verbs.get(name)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.verbs.contains_key(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.verbs.keys().map(String::as_str)
    }
}
