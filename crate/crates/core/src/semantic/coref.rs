use std::collections::BTreeMap;

use super::{ElementId, IdGen, NodeType, S2Element, SemanticError};
use crate::lexicon::Lexicon;

#[derive(Debug, Clone)]
struct Mention {
    id: ElementId,
    order: usize,
    action: Option<ElementId>,
    role: NodeType,
}

fn collect(e: &S2Element, action: Option<ElementId>, out: &mut Vec<Mention>) {
    let action = if e.node_type == NodeType::Action {
        Some(e.id)
    } else {
        action
    };
    if e.is_noun() {
        out.push(Mention {
            id: e.id,
            order: e.token_ref.unwrap_or(usize::MAX),
            action,
            role: e.node_type,
        });
    }
    for list in e.children.values() {
        for c in list {
            collect(c, action, out);
        }
    }
}

fn mentions(root: &S2Element) -> Vec<Mention> {
    let mut out = Vec::new();
    collect(root, None, &mut out);
    out.sort_by_key(|m| m.order);
    out
}

fn agents_by_action(root: &S2Element) -> BTreeMap<ElementId, Vec<ElementId>> {
    let mut out = BTreeMap::new();
    for e in root.walk().filter(|e| e.node_type == NodeType::Action) {
        out.insert(e.id, e.get(NodeType::Agent).iter().map(|a| a.id).collect());
    }
    out
}

/// (plural, animate); `None` matches either.
fn pronoun_features(lemma: &str) -> (Option<bool>, Option<bool>) {
    match lemma {
        "he" | "him" | "she" | "her" | "his" => (Some(false), Some(true)),
        "it" | "its" => (Some(false), Some(false)),
        "they" | "them" | "their" => (Some(true), None),
        _ => (None, None),
    }
}

fn candidate_features(lex: &Lexicon, e: &S2Element) -> (bool, Option<bool>) {
    let spec = e.noun_spec();
    let plural = spec.as_ref().is_some_and(|s| s.plural);
    let animate = if spec.as_ref().is_some_and(|s| s.deictic) {
        None
    } else {
        Some(lex.is_animate(&e.label))
    };
    (plural, animate)
}

fn usable_antecedent(e: &S2Element) -> bool {
    e.is_noun() && !e.is_pronoun() && e.kind != "SELF"
}

fn pick<'a>(lex: &Lexicon, pronoun: &str, candidates: &[&'a S2Element]) -> Option<&'a S2Element> {
    let (want_plural, want_animate) = pronoun_features(pronoun);
    let number_ok = |e: &S2Element| want_plural.is_none_or(|p| candidate_features(lex, e).0 == p);
    let animacy_ok = |e: &S2Element| {
        let (_, a) = candidate_features(lex, e);
        match (want_animate, a) {
            (Some(w), Some(a)) => w == a,
            _ => true,
        }
    };
    candidates
        .iter()
        .find(|e| number_ok(e) && animacy_ok(e))
        .or_else(|| candidates.iter().find(|e| number_ok(e)))
        .or_else(|| candidates.first())
        .copied()
}

fn same_reference(a: &S2Element, b: &S2Element) -> bool {
    let (Some(sa), Some(sb)) = (a.noun_spec(), b.noun_spec()) else {
        return false;
    };
    let mut ta = sa.adjectives.clone();
    let mut tb = sb.adjectives.clone();
    ta.sort();
    tb.sort();
    a.tag == "NOUN"
        && b.tag == "NOUN"
        && sa.lemma == sb.lemma
        && ta == tb
        && sa.plural == sb.plural
        && sb.determiner.as_deref() == Some("the")
}

/// Replaces pronouns and repeated definite nouns with copies of their
/// antecedents. Returns the number of substitutions; pronouns left without an
/// antecedent are reported in the error after all other substitutions are made.
pub fn resolve_coreference(
    lex: &Lexicon,
    root: &mut S2Element,
    history: &[S2Element],
    ids: &mut IdGen,
) -> Result<usize, SemanticError> {
    let ms = mentions(root);
    let agents = agents_by_action(root);
    let mut resolved: Vec<Option<S2Element>> = vec![None; ms.len()];
    let mut subs = 0;
    let mut unresolved = Vec::new();

    for (i, m) in ms.iter().enumerate() {
        let Some(current) = root.find(m.id).cloned() else {
            continue;
        };
        let earlier: Vec<S2Element> = (0..i)
            .rev()
            .filter_map(|j| {
                resolved[j]
                    .clone()
                    .or_else(|| root.find(ms[j].id).cloned())
                    .map(|e| (j, e))
            })
            .filter(|(j, e)| {
                let own_agent = m.role != NodeType::Agent
                    && m.action
                        .and_then(|a| agents.get(&a))
                        .is_some_and(|ag| ag.contains(&ms[*j].id));
                usable_antecedent(e) && !own_agent
            })
            .map(|(_, e)| e)
            .collect();

        let antecedent = if current.is_pronoun() && current.kind != "SELF" {
            let mut pool: Vec<&S2Element> = earlier.iter().collect();
            let hist: Vec<S2Element> = history
                .iter()
                .rev()
                .flat_map(|h| {
                    let mut hm = mentions(h);
                    hm.reverse();
                    hm.into_iter()
                        .filter_map(|m| h.find(m.id).cloned())
                        .collect::<Vec<_>>()
                })
                .filter(usable_antecedent)
                .collect();
            let found = pick(lex, &current.label, &pool).cloned();
            match found {
                Some(f) => Some(f),
                None => {
                    pool = hist.iter().collect();
                    pick(lex, &current.label, &pool).cloned()
                }
            }
        } else if current.tag == "NOUN"
            && current.refers_to.is_none()
            && current.noun_spec().is_some_and(|s| s.determiner.as_deref() == Some("the"))
        {
            earlier.iter().find(|e| same_reference(e, &current)).cloned()
        } else {
            None
        };

        match antecedent {
            Some(ante) => {
                let mut copy = ante.deep_copy(ids);
                copy.node_type = current.node_type;
                copy.key = ante.key;
                copy.refers_to = Some(ante.id);
                copy.token_ref = current.token_ref;
                copy.parent = current.parent;
                if let Some(slot) = root.find_mut(m.id) {
                    *slot = copy.clone();
                }
                resolved[i] = Some(copy);
                subs += 1;
            }
            None if current.is_pronoun() && current.kind != "SELF" => unresolved.push(m.id),
            None => {}
        }
    }
    if unresolved.is_empty() {
        Ok(subs)
    } else {
        Err(SemanticError::UnresolvedPronoun(unresolved))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grammar::{parse_sentence, tokenize};
    use crate::semantic::Builder;

    fn build(lex: &Lexicon, ids: &mut IdGen, text: &str) -> S2Element {
        let p = parse_sentence(lex, &tokenize(lex, text)).unwrap();
        Builder::new(lex, ids).build(&[p]).unwrap()
    }

    #[test]
    fn her_refers_to_person() {
        let lex = Lexicon::default();
        let mut ids = IdGen::default();
        let mut root = build(
            &lex,
            &mut ids,
            "Forever the person throws the ball into the pond and then the dog gives the ball to her.",
        );
        let n = resolve_coreference(&lex, &mut root, &[], &mut ids).unwrap();
        assert_eq!(n, 2);
        let throw = root.first(NodeType::CmdList).unwrap().first(NodeType::Action).unwrap();
        let person = throw.first(NodeType::Agent).unwrap();
        let ball = throw.first(NodeType::DirectObject).unwrap();
        let give = throw.first(NodeType::SequenceThen).unwrap();
        let her = give
            .first(NodeType::Preposition)
            .unwrap()
            .first(NodeType::Object)
            .unwrap();
        assert_eq!(her.refers_to, Some(person.id));
        assert_eq!(her.label, "person");
        assert_eq!(her.key, Some(NodeType::Agent));
        let ball2 = give.first(NodeType::DirectObject).unwrap();
        assert_eq!(ball2.refers_to, Some(ball.id));
        assert_eq!(give.first(NodeType::Agent).unwrap().refers_to, None);
    }

    #[test]
    fn pronoun_from_history_ignores_gender() {
        let lex = Lexicon::default();
        let mut ids = IdGen::default();
        let first = build(&lex, &mut ids, "The dog jumped.");
        let mut second = build(&lex, &mut ids, "She jumped again.");
        resolve_coreference(&lex, &mut second, std::slice::from_ref(&first), &mut ids).unwrap();
        let a = second.first(NodeType::CmdList).unwrap().first(NodeType::Action).unwrap();
        let she = a.first(NodeType::Agent).unwrap();
        assert_eq!(she.label, "dog");
        assert!(she.refers_to.is_some());
    }

    #[test]
    fn unresolved_pronoun() {
        let lex = Lexicon::default();
        let mut ids = IdGen::default();
        let mut root = build(&lex, &mut ids, "It moves.");
        let e = resolve_coreference(&lex, &mut root, &[], &mut ids).unwrap_err();
        assert!(matches!(e, SemanticError::UnresolvedPronoun(v) if v.len() == 1));
    }

    #[test]
    fn they_picks_most_recent_plural() {
        let lex = Lexicon::default();
        let mut ids = IdGen::default();
        let h = build(&lex, &mut ids, "the dogs chase the cats");
        let mut root = build(&lex, &mut ids, "they jump");
        // "chase" is not a built-in verb, but coreference does not care.
        resolve_coreference(&lex, &mut root, std::slice::from_ref(&h), &mut ids).unwrap();
        let a = root.first(NodeType::CmdList).unwrap().first(NodeType::Action).unwrap();
        assert_eq!(a.first(NodeType::Agent).unwrap().label, "cat");
    }

    #[test]
    fn chains_terminate_at_non_pronouns() {
        let lex = Lexicon::default();
        let mut ids = IdGen::default();
        let mut root = build(&lex, &mut ids, "The proximity teleports to the boy and then it attaches to him and disappears");
        resolve_coreference(&lex, &mut root, &[], &mut ids).unwrap();
        for e in root.walk().filter(|e| e.refers_to.is_some()) {
            let target = root.find(e.refers_to.unwrap()).unwrap();
            assert!(!target.is_pronoun());
            assert_ne!(target.tag, "PRON");
        }
        let attach = root
            .first(NodeType::CmdList).unwrap()
            .first(NodeType::Action).unwrap()
            .first(NodeType::SequenceThen).unwrap();
        assert_eq!(attach.first(NodeType::Agent).unwrap().label, "proximity");
        let him = attach.first(NodeType::Preposition).unwrap().first(NodeType::Object).unwrap();
        assert_eq!(him.label, "boy");
    }
}
