//! Command-line and network front end for the narrative engine.

pub mod server;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

use anyhow::Context;
use narrate_core::bind::{apply_bindings, bind};
use narrate_core::grammar::parse_text;
use narrate_core::lexicon::Lexicon;
use narrate_core::semantic::{format_s2, resolve_coreference, validate, Builder, IdGen};
use narrate_core::session::{Scenario, ServerMessage};
use narrate_core::world::World;

/// The lexicon named by `ENGINE_LEXICON`, or the built-in one.
pub fn lexicon() -> anyhow::Result<Arc<Lexicon>> {
    Ok(Arc::new(Lexicon::from_env().context("loading lexicon")?))
}

pub fn dump_tree(lex: &Lexicon, text: &str) -> anyhow::Result<String> {
    let parses = parse_text(lex, text)?;
    Ok(parses.iter().map(|p| p.dump()).collect())
}

/// Rendered graph plus any non-fatal problems (unresolved pronouns, schema).
pub struct S2Dump {
    pub text: String,
    pub warnings: Vec<String>,
}

/// With a world, nouns are bound against it first so instance ids show.
pub fn dump_s2(lex: &Lexicon, text: &str, world: Option<&World>) -> anyhow::Result<S2Dump> {
    let parses = parse_text(lex, text)?;
    let mut ids = IdGen::default();
    let mut root = Builder::new(lex, &mut ids).build(&parses)?;
    let mut warnings = Vec::new();
    if let Err(e) = resolve_coreference(lex, &mut root, &[], &mut ids) {
        warnings.push(e.to_string());
    }
    if let Err(e) = validate(&root) {
        warnings.push(e.to_string());
    }
    if let Some(w) = world {
        let slots = bind(&root, w, &[]);
        warnings.extend(slots.iter().filter_map(|s| s.error.as_ref().map(|e| e.to_string())));
        apply_bindings(&mut root, &slots);
    }
    Ok(S2Dump {
        text: format_s2(&root),
        warnings,
    })
}

/// Initial world of a scenario file.
pub fn scenario_world(path: &Path, lex: Arc<Lexicon>) -> anyhow::Result<World> {
    let s = Scenario::load(path)?;
    Ok(s.session(lex)?.sim.world)
}

pub struct RunSummary {
    pub ticks: u64,
    pub errors: Vec<(u64, String)>,
}

/// Replays a scenario for `ticks` frames, writing a JSON Lines trace.
pub fn run_scenario(lex: Arc<Lexicon>, scenario: &Path, ticks: u64, trace: &Path) -> anyhow::Result<RunSummary> {
    let s = Scenario::load(scenario).with_context(|| format!("loading {}", scenario.display()))?;
    let out = BufWriter::new(File::create(trace).with_context(|| format!("creating {}", trace.display()))?);
    let mut r = s.replay(lex, ticks, out)?;
    r.out.flush()?;
    let errors = r
        .replies
        .into_iter()
        .filter_map(|(f, m)| match m {
            ServerMessage::Error { message } => Some((f, message)),
            _ => None,
        })
        .collect();
    Ok(RunSummary {
        ticks: r.session.sim.tick(),
        errors,
    })
}
