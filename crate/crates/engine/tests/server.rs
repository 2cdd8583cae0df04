use std::net::{TcpListener, TcpStream};
use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant};

use narrate_core::lexicon::Lexicon;
use narrate_engine::server::serve_on;
use serde_json::{json, Value};
use tungstenite::stream::MaybeTlsStream;
use tungstenite::{connect, Message, WebSocket};

type Client = WebSocket<MaybeTlsStream<TcpStream>>;

fn start() -> Client {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let port = listener.local_addr().unwrap().port();
    thread::spawn(move || serve_on(listener, 1, Arc::new(Lexicon::default())));
    let (ws, _) = connect(format!("ws://127.0.0.1:{port}")).unwrap();
    ws
}

fn send(ws: &mut Client, v: Value) {
    ws.send(Message::Text(v.to_string())).unwrap();
}

/// Reads frames until one of type `kind` arrives.
fn wait_for(ws: &mut Client, kind: &str) -> Value {
    let deadline = Instant::now() + Duration::from_secs(10);
    while Instant::now() < deadline {
        if let Message::Text(t) = ws.read().unwrap() {
            let v: Value = serde_json::from_str(&t).unwrap();
            if v["type"] == kind {
                return v;
            }
        }
    }
    panic!("no {kind} frame");
}

#[test]
fn label_stage_confirm_round_trip() {
    let mut ws = start();
    send(&mut ws, json!({"type": "stroke_add", "x": 0, "y": 0, "w": 20, "h": 20}));
    let id = wait_for(&mut ws, "created")["id"].as_u64().unwrap();
    send(&mut ws, json!({"type": "pointer", "phase": "down", "x": 0, "y": 0, "hits": [id]}));
    send(&mut ws, json!({"type": "speech_text", "text": "this is a boy"}));
    wait_for(&mut ws, "transcript_state");
    let changes = wait_for(&mut ws, "label_changes");
    assert_eq!(changes["changes"][0]["label"], "boy");
    send(&mut ws, json!({"type": "pointer", "phase": "up", "x": 0, "y": 0}));

    send(&mut ws, json!({"type": "speech_text", "text": "the boy moves right for 1 second"}));
    send(&mut ws, json!({"type": "stage"}));
    let d = wait_for(&mut ws, "diagram_state");
    assert_eq!(d["diagram"]["confirmable"], true, "{d}");
    send(&mut ws, json!({"type": "confirm"}));
    let c = wait_for(&mut ws, "confirmed");
    assert_eq!(c["scripts"].as_array().unwrap().len(), 1);

    // the boy ends up one second of motion to the right
    let deadline = Instant::now() + Duration::from_secs(10);
    loop {
        let delta = wait_for(&mut ws, "world_delta");
        let boy = delta["entities"].as_array().unwrap().iter().find(|e| e["id"] == id).cloned().unwrap();
        if boy["x"].as_f64().unwrap() >= 100.0 - 1e-9 {
            assert!((boy["x"].as_f64().unwrap() - 100.0).abs() < 1e-9);
            break;
        }
        assert!(Instant::now() < deadline);
    }
}

#[test]
fn bad_frames_keep_the_session() {
    let mut ws = start();
    send(&mut ws, json!({"type": "launch"}));
    let e = wait_for(&mut ws, "error");
    assert!(e["message"].as_str().unwrap().contains("malformed"));
    ws.send(Message::Text("{".into())).unwrap();
    wait_for(&mut ws, "error");
    send(&mut ws, json!({"type": "list_rules"}));
    let r = wait_for(&mut ws, "rule_list");
    assert_eq!(r["rules"], json!([]));
}
