use std::time::Instant;

use narrate_core::grammar::parse_text;
use narrate_core::lexicon::Lexicon;
use narrate_core::semantic::{
    build_s2, format_s2, normalize_listing, resolve_coreference, validate, IdGen, S2Element, Value,
};

fn compile(lex: &Lexicon, text: &str) -> S2Element {
    let parses = parse_text(lex, text).unwrap();
    let mut ids = IdGen::default();
    let mut root = narrate_core::semantic::Builder::new(lex, &mut ids)
        .build(&parses)
        .unwrap();
    resolve_coreference(lex, &mut root, &[], &mut ids).unwrap();
    root
}

/// Stand-in for the binder: every noun gets the id its label maps to.
fn fill(root: &mut S2Element, world: &[(&str, u64)]) {
    root.visit_mut(&mut |e| {
        if e.is_noun() {
            if let Some((_, id)) = world.iter().find(|(l, _)| *l == e.label) {
                e.value = Some(Value::ThingIds(vec![*id]));
            }
        }
    });
}

#[test]
fn listing_three() {
    let lex = Lexicon::default();
    let start = Instant::now();
    let mut root = compile(
        &lex,
        "Forever the person throws the ball into the pond and then the dog gives the ball to her.",
    );
    fill(&mut root, &[("person", 6), ("ball", 7), ("dog", 8), ("pond", 9)]);
    let got = format_s2(&root);
    assert!(start.elapsed().as_millis() < 50);
    validate(&root).unwrap();
    let want = include_str!("golden/listing3.txt");
    assert_eq!(normalize_listing(&got), normalize_listing(want), "\n{got}");
}

#[test]
fn listing_four() {
    let lex = Lexicon::default();
    let start = Instant::now();
    let root = compile(&lex, "Every few seconds the frog hops to a lily.");
    let got = format_s2(&root);
    assert!(start.elapsed().as_millis() < 50);
    validate(&root).unwrap();
    let want = include_str!("golden/listing4.txt");
    assert_eq!(normalize_listing(&got), normalize_listing(want), "\n{got}");
}

#[test]
fn build_is_idempotent() {
    let lex = Lexicon::default();
    let p = parse_text(&lex, "When balls collide with paddles, paddles reflect balls.").unwrap();
    let a = build_s2(&lex, &p[0], &[]).unwrap();
    let b = build_s2(&lex, &p[0], std::slice::from_ref(&a)).unwrap();
    assert_eq!(normalize_listing(&format_s2(&a)), normalize_listing(&format_s2(&b)));
}
