use std::sync::Arc;

use narrate_core::lexicon::Lexicon;
use narrate_core::session::{ClientMessage, Scenario, ScenarioWorld, ServerMessage, Session, Timed};
use narrate_core::sim::Sim;
use narrate_core::world::{Entity, World};

fn session(world: World) -> Session {
    Session::new(Sim::new(world, Arc::new(Lexicon::default()), 1))
}

fn say(s: &mut Session, text: &str) -> Vec<ServerMessage> {
    s.handle(ClientMessage::SpeechText { text: text.into() });
    let mut out = s.handle(ClientMessage::Stage);
    out.extend(s.handle(ClientMessage::Confirm));
    out
}

fn run(s: &mut Session, ticks: usize) -> Vec<(f64, f64)> {
    let mut path = Vec::new();
    for _ in 0..ticks {
        s.tick();
        let e = s.sim.world.get(1).unwrap();
        path.push((e.position.x, e.position.y));
    }
    path
}

#[test]
fn character_jumps_on_every_platform() {
    let mut w = World::new();
    w.insert(Entity::sketch(&["character"], 0.0, 0.0, 10.0, 10.0));
    let tops: Vec<(f64, f64)> = [(60.0, 20.0), (140.0, 40.0), (220.0, 0.0)]
        .into_iter()
        .map(|(x, y)| {
            w.insert(Entity::sketch(&["platform"], x, y, 40.0, 10.0));
            (x, y + 5.0 + 5.0)
        })
        .collect();
    let mut s = session(w);
    let out = say(&mut s, "The character jumps on the platforms");
    assert!(!out.iter().any(|m| matches!(m, ServerMessage::Error { .. })), "{out:?}");
    let path = run(&mut s, 600);
    for top in &tops {
        assert!(
            path.iter().any(|p| (p.0 - top.0).abs() < 1e-9 && (p.1 - top.1).abs() < 1e-9),
            "never landed on {top:?}"
        );
    }
    assert_eq!(*path.last().unwrap(), tops[2]);
}

/// Relinking a slot runs the command exactly as if the words had bound the
/// linked entity in the first place.
#[test]
fn relink_matches_direct_binding() {
    let world = |final_only: bool| {
        let mut w = World::new();
        w.insert(Entity::sketch(&["ape"], 0.0, 0.0, 10.0, 10.0));
        for (i, x) in [80.0, 160.0, 240.0].into_iter().enumerate() {
            let label = if final_only && i < 2 { "tower" } else { "building" };
            w.insert(Entity::sketch(&[label], x, 0.0, 30.0, 60.0));
        }
        w
    };
    let mut linked = session(world(false));
    linked.handle(ClientMessage::SpeechText {
        text: "The ape jumps onto the building.".into(),
    });
    linked.handle(ClientMessage::Stage);
    let node = linked.staged().unwrap().slots.iter().find(|s| s.lemma == "building").unwrap().node;
    assert_eq!(linked.staged().unwrap().slots.iter().find(|s| s.node == node).unwrap().instances(), &[2]);
    linked.handle(ClientMessage::Relink { node, entity: 4, replace: true });
    linked.handle(ClientMessage::Confirm);

    let mut direct = session(world(true));
    say(&mut direct, "The ape jumps onto the building.");
    assert_eq!(run(&mut linked, 200), run(&mut direct, 200));
    assert_eq!(linked.sim.world.get(1).unwrap().position.x, 240.0);
}

#[test]
fn deixis_binds_selection_in_order() {
    let mut w = World::new();
    let a = w.insert(Entity::sketch(&[], 0.0, 0.0, 10.0, 10.0));
    let b = w.insert(Entity::sketch(&[], 50.0, 0.0, 10.0, 10.0));
    let mut s = session(w);
    s.handle(ClientMessage::Pointer {
        phase: narrate_core::session::PointerPhase::Down,
        x: 0.0,
        y: 0.0,
        hits: vec![b, a],
    });
    s.handle(ClientMessage::SpeechText {
        text: "this moves to that".into(),
    });
    s.handle(ClientMessage::Stage);
    let staged = s.staged().unwrap();
    let slot = |lemma: &str| staged.slots.iter().find(|x| x.lemma == lemma).unwrap().instances().to_vec();
    assert_eq!((slot("this"), slot("that")), (vec![b], vec![a]));
}

#[test]
fn rules_can_be_listed_toggled_and_deleted() {
    let mut w = World::new();
    w.insert(Entity::sketch(&["ball"], 0.0, 0.0, 10.0, 10.0));
    w.insert(Entity::sketch(&["wall"], 100.0, 0.0, 10.0, 100.0));
    let mut s = session(w);
    say(&mut s, "When balls collide with walls, balls disappear.");
    let out = s.tick().unwrap().messages;
    let rules = out
        .iter()
        .find_map(|m| match m {
            ServerMessage::RuleList { rules, .. } => Some(rules.clone()),
            _ => None,
        })
        .unwrap();
    assert_eq!(rules[0].display, "WHEN *ball collide with *wall -> *ball disappear");
    let out = s.handle(ClientMessage::ToggleRule { id: rules[0].id });
    assert!(matches!(&out[0], ServerMessage::RuleList { rules, .. } if !rules[0].enabled));
    s.handle(ClientMessage::DeleteRule { id: rules[0].id });
    let out = s.handle(ClientMessage::DeleteRule { id: rules[0].id });
    assert!(matches!(out[0], ServerMessage::Error { .. }));
}

#[test]
fn definitions_become_verbs() {
    let mut w = World::new();
    w.insert(Entity::sketch(&["lamp"], 0.0, 0.0, 10.0, 10.0));
    let mut s = session(w);
    say(&mut s, "When a lamp flickers, it disappears and then it appears.");
    s.tick();
    let out = say(&mut s, "the lamp flickers");
    assert!(!out.iter().any(|m| matches!(m, ServerMessage::Error { .. })), "{out:?}");
    let mut seen = Vec::new();
    for _ in 0..5 {
        let t = s.tick().unwrap();
        seen.extend(t.report.started.into_iter().map(|r| r.verb));
    }
    assert_eq!(seen, ["disappear", "appear"]);
    assert!(s.sim.world.get(1).unwrap().visible);
}

#[test]
fn scenario_round_trips_through_json() {
    let s = Scenario {
        schema_version: 1,
        lexicon_version: None,
        seed: 4,
        world: ScenarioWorld {
            entities: vec![Entity::sketch(&["dog"], 0.0, 0.0, 10.0, 10.0)],
            prototypes: Vec::new(),
        },
        messages: vec![Timed {
            tick: 2,
            message: ClientMessage::SpeechText { text: "the dog jumps".into() },
        }],
    };
    let text = serde_json::to_string(&s).unwrap();
    assert_eq!(Scenario::from_json(&text).unwrap(), s);
}
