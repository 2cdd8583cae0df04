use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use narrate_engine::{dump_s2, dump_tree, lexicon, run_scenario, scenario_world, server};

#[derive(Parser)]
#[command(name = "engine", about = "Narrative command engine")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Parse a sentence and print its tree and/or semantic graph.
    Parse {
        sentence: String,
        #[arg(long)]
        dump_tree: bool,
        #[arg(long)]
        dump_s2: bool,
        /// Scenario file whose world is used to bind nouns.
        #[arg(long)]
        world: Option<PathBuf>,
    },
    /// Replay a scenario and write a JSON Lines trace.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        ticks: u64,
        #[arg(long)]
        trace: PathBuf,
    },
    /// Serve the WebSocket protocol.
    Serve {
        #[arg(long, default_value_t = 8765)]
        port: u16,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let lex = lexicon()?;
    match cli.cmd {
        Cmd::Parse {
            sentence,
            dump_tree: tree,
            dump_s2: s2,
            world,
        } => {
            let world = world.map(|p| scenario_world(&p, lex.clone())).transpose()?;
            if tree || !s2 {
                print!("{}", dump_tree(&lex, &sentence)?);
            }
            if s2 {
                let d = dump_s2(&lex, &sentence, world.as_ref())?;
                print!("{}", d.text);
                for w in d.warnings {
                    eprintln!("warning: {w}");
                }
            }
        }
        Cmd::Run { scenario, ticks, trace } => {
            let summary = run_scenario(lex, &scenario, ticks, &trace)?;
            for (frame, e) in &summary.errors {
                eprintln!("frame {frame}: {e}");
            }
            eprintln!("ran {} ticks", summary.ticks);
        }
        Cmd::Serve { port, seed } => server::serve(port, seed, lex)?,
    }
    Ok(())
}
