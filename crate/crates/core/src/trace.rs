//! JSON Lines trace: a header with the seed, then one line per tick.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::exec::{Agent, ScriptId, Status};
use crate::sim::TickReport;
use crate::world::{EntityId, EntityKind, World, WorldEvent};

pub const TRACE_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntityState {
    pub id: EntityId,
    pub x: f64,
    pub y: f64,
    pub angle: f64,
    pub vx: f64,
    pub vy: f64,
    pub angular_velocity: f64,
    pub w: f64,
    pub h: f64,
    pub visible: bool,
    pub value: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StartedScript<'a> {
    pub id: ScriptId,
    pub verb: &'a str,
    pub agent: Agent,
    pub targets: &'a [EntityId],
    pub rule: Option<&'a str>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FinishedScript {
    pub id: ScriptId,
    pub status: Status,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceLine<'a> {
    pub tick: u64,
    pub entities: Vec<EntityState>,
    pub events: &'a [WorldEvent],
    pub scripts_started: Vec<StartedScript<'a>>,
    pub scripts_finished: Vec<FinishedScript>,
}

pub fn snapshot(world: &World) -> Vec<EntityState> {
    world
        .entities
        .values()
        .map(|e| EntityState {
            id: e.id,
            x: e.position.x,
            y: e.position.y,
            angle: e.angle,
            vx: e.velocity.x,
            vy: e.velocity.y,
            angular_velocity: e.angular_velocity,
            w: e.size.x,
            h: e.size.y,
            visible: e.visible,
            value: (e.kind == EntityKind::Number).then_some(e.number),
        })
        .collect()
}

pub fn trace_line<'a>(report: &'a TickReport, world: &World) -> TraceLine<'a> {
    TraceLine {
        tick: report.tick,
        entities: snapshot(world),
        events: &report.events,
        scripts_started: report
            .started
            .iter()
            .map(|s| StartedScript {
                id: s.id,
                verb: &s.verb,
                agent: s.agent,
                targets: &s.targets,
                rule: s.rule.as_deref(),
            })
            .collect(),
        scripts_finished: report
            .finished
            .iter()
            .map(|&(id, status)| FinishedScript { id, status })
            .collect(),
    }
}

pub struct TraceWriter<W: Write> {
    out: W,
}

impl<W: Write> TraceWriter<W> {
    pub fn new(mut out: W, seed: u64) -> io::Result<Self> {
        let header = json!({ "schema_version": TRACE_SCHEMA_VERSION, "seed": seed });
        writeln!(out, "{header}")?;
        Ok(TraceWriter { out })
    }

    pub fn write(&mut self, report: &TickReport, world: &World) -> io::Result<()> {
        serde_json::to_writer(&mut self.out, &trace_line(report, world))?;
        self.out.write_all(b"\n")
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}
