//! WebSocket service: one session per connection, ticking at 60 Hz.
//!
//! Each connection runs on its own thread, which owns the session and its
//! world. Client frames are handled between ticks.

use std::io::ErrorKind;
use std::net::{TcpListener, TcpStream};
use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant};

use narrate_core::lexicon::Lexicon;
use narrate_core::session::{ServerMessage, Session};
use narrate_core::sim::Sim;
use narrate_core::world::{World, DT};
use tungstenite::{accept, Message, WebSocket};

pub fn serve(port: u16, seed: u64, lex: Arc<Lexicon>) -> anyhow::Result<()> {
    let listener = TcpListener::bind(("127.0.0.1", port))?;
    eprintln!("listening on ws://{}", listener.local_addr()?);
    serve_on(listener, seed, lex)
}

pub fn serve_on(listener: TcpListener, seed: u64, lex: Arc<Lexicon>) -> anyhow::Result<()> {
    for stream in listener.incoming() {
        let stream = stream?;
        let lex = lex.clone();
        thread::spawn(move || {
            if let Err(e) = connection(stream, seed, lex) {
                eprintln!("connection closed: {e}");
            }
        });
    }
    Ok(())
}

fn send(ws: &mut WebSocket<TcpStream>, msgs: Vec<ServerMessage>) -> tungstenite::Result<()> {
    for m in msgs {
        let text = serde_json::to_string(&m).expect("server messages serialize");
        ws.write(Message::Text(text))?;
    }
    ws.flush()
}

fn would_block(e: &tungstenite::Error) -> bool {
    matches!(e, tungstenite::Error::Io(io) if matches!(io.kind(), ErrorKind::WouldBlock | ErrorKind::TimedOut))
}

fn connection(stream: TcpStream, seed: u64, lex: Arc<Lexicon>) -> anyhow::Result<()> {
    let mut ws = accept(stream)?;
    let mut session = Session::new(Sim::new(World::new(), lex, seed));
    let period = Duration::from_secs_f64(DT);
    let mut next_tick = Instant::now() + period;
    loop {
        let now = Instant::now();
        if now >= next_tick {
            next_tick += period;
            // after a stall, skip ahead rather than bursting
            if next_tick < now {
                next_tick = now + period;
            }
            if let Some(out) = session.tick() {
                send(&mut ws, out.messages)?;
            }
            continue;
        }
        ws.get_mut().set_read_timeout(Some(next_tick - now))?;
        match ws.read() {
            Ok(Message::Text(text)) => {
                let replies = session.handle_json(&text);
                send(&mut ws, replies)?;
            }
            Ok(Message::Binary(_)) => send(&mut ws, vec![ServerMessage::error("binary frames are not supported")])?,
            Ok(Message::Close(_)) => return Ok(()),
            Ok(_) => {}
            Err(e) if would_block(&e) => {}
            Err(tungstenite::Error::ConnectionClosed | tungstenite::Error::AlreadyClosed) => return Ok(()),
            Err(e) => return Err(e.into()),
        }
    }
}
