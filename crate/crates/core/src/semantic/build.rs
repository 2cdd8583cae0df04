use super::{Annotation, IdGen, NodeType, S2Element, SemanticError, Value};
use crate::grammar::{Category, ParseNode, Relation};
use crate::lexicon::Lexicon;

type SResult<T> = Result<T, SemanticError>;

/// Builds a CMD_LIST graph for one parsed sentence. Ids continue after the
/// largest id found in `history`.
pub fn build_s2(lex: &Lexicon, parse: &ParseNode, history: &[S2Element]) -> SResult<S2Element> {
    let mut ids = IdGen::after(history);
    Builder::new(lex, &mut ids).build(std::slice::from_ref(parse))
}

pub struct Builder<'a> {
    lex: &'a Lexicon,
    ids: &'a mut IdGen,
}

impl<'a> Builder<'a> {
    pub fn new(lex: &'a Lexicon, ids: &'a mut IdGen) -> Self {
        Builder { lex, ids }
    }

    fn el(&mut self, nt: NodeType) -> S2Element {
        S2Element::new(self.ids.next(), nt)
    }

    /// One CMD per sentence under a single CMD_LIST root.
    pub fn build(&mut self, parses: &[ParseNode]) -> SResult<S2Element> {
        let mut root = self.el(NodeType::CmdList);
        root.key = None;
        for p in parses {
            if p.relation != Relation::Root {
                return Err(SemanticError::MalformedParse(format!(
                    "expected ROOT, found {}",
                    p.relation.as_str()
                )));
            }
            let cmd = self.cmd(p)?;
            root.push(NodeType::CmdList, cmd);
        }
        Ok(root)
    }

    fn cmd(&mut self, p: &ParseNode) -> SResult<S2Element> {
        let mut cmd = self.el(NodeType::CmdList).type_name("CMD");
        if let Some(cond) = p.child(Relation::Condition) {
            let mut tr = self.el(NodeType::TriggerResponse).type_name("TRIGGER_RESPONSE");
            let mut trigger = self.el(NodeType::Trigger).type_name("TRIGGER");
            let marker = cond
                .children_with(Relation::Advmod)
                .find(|c| c.token.category == Category::WhenMarker)
                .ok_or_else(|| SemanticError::MalformedParse("condition without marker".into()))?;
            let action = self.action(cond, NodeType::Action)?;
            trigger.push(NodeType::Action, action);
            let mut m = self
                .el(NodeType::Property)
                .label("marker")
                .tag("ADV")
                .type_name("PROPERTY")
                .value(Value::Text(marker.lemma().to_string()));
            m.token_ref = Some(marker.token.index);
            trigger.push(NodeType::Property, m);
            let mut response = self.el(NodeType::Response).type_name("RESPONSE");
            let action = self.action(p, NodeType::Action)?;
            response.push(NodeType::Action, action);
            tr.push(NodeType::Trigger, trigger);
            tr.push(NodeType::Response, response);
            cmd.push(NodeType::TriggerResponse, tr);
        } else {
            let action = self.action(p, NodeType::Action)?;
            cmd.push(NodeType::Action, action);
        }
        Ok(cmd)
    }

    fn action(&mut self, p: &ParseNode, key: NodeType) -> SResult<S2Element> {
        if !matches!(p.token.category, Category::Verb | Category::Unknown) {
            return Err(SemanticError::MalformedParse(format!(
                "'{}' is not a verb",
                p.token.text
            )));
        }
        let mut a = self
            .el(NodeType::Action)
            .label(&p.token.lemma)
            .tag("VERB")
            .type_name("ACTION")
            .kind("ACTION");
        a.key = Some(key);
        a.token_ref = Some(p.token.index);
        if matches!(key, NodeType::SequenceThen | NodeType::SequenceSimultaneous) {
            a.annotations.insert(Annotation::MustFillInAgent);
        }
        let copular = matches!(p.lemma(), "be" | "become");
        for c in &p.children {
            match c.relation {
                Relation::Subject => self.noun_list(&mut a, c, NodeType::Agent)?,
                Relation::Dobj if c.token.category == Category::Verb && !copular => {
                    let mut prop = self
                        .el(NodeType::Property)
                        .label("action")
                        .tag("VERB")
                        .type_name("PROPERTY")
                        .value(Value::Text(c.token.lemma.clone()));
                    prop.token_ref = Some(c.token.index);
                    a.push(NodeType::Property, prop);
                }
                Relation::Dobj => self.noun_list(&mut a, c, NodeType::DirectObject)?,
                Relation::Iobj => self.noun_list(&mut a, c, NodeType::IndirectObject)?,
                Relation::Prep => {
                    let prep = self.preposition(c)?;
                    a.push(NodeType::Preposition, prep);
                }
                Relation::Advmod => {
                    if c.token.category == Category::WhenMarker {
                        continue;
                    }
                    let (nt, el) = self.adverbial(c)?;
                    a.push(nt, el);
                }
                Relation::Amod => {
                    let prop = self.attribute(c);
                    a.push(NodeType::Property, prop);
                }
                Relation::Time => {
                    let t = self.time(c)?;
                    a.push(NodeType::Time, t);
                }
                Relation::Conj => {
                    let s = self.action(c, NodeType::SequenceSimultaneous)?;
                    a.push(NodeType::SequenceSimultaneous, s);
                }
                Relation::Seq => {
                    let s = self.action(c, NodeType::SequenceThen)?;
                    a.push(NodeType::SequenceThen, s);
                }
                Relation::Condition => {}
                other => {
                    return Err(SemanticError::MalformedParse(format!(
                        "unexpected {} under verb '{}'",
                        other.as_str(),
                        p.token.text
                    )))
                }
            }
        }
        Ok(a)
    }

    fn noun_list(&mut self, parent: &mut S2Element, np: &ParseNode, nt: NodeType) -> SResult<()> {
        let el = self.noun(np, nt)?;
        parent.push(nt, el);
        for c in np.children_with(Relation::Conj) {
            let el = self.noun(c, nt)?;
            parent.push(nt, el);
        }
        Ok(())
    }

    fn preposition(&mut self, c: &ParseNode) -> SResult<S2Element> {
        let mut prep = self
            .el(NodeType::Preposition)
            .label(c.lemma())
            .type_name(c.lemma());
        prep.token_ref = Some(c.token.index);
        for o in c.children_with(Relation::Pobj) {
            self.noun_list(&mut prep, o, NodeType::Object)?;
        }
        Ok(prep)
    }

    fn intensifiers(&mut self, parent: &mut S2Element, node: &ParseNode) {
        for i in node.children_with(Relation::Advmod) {
            let mut p = self
                .el(NodeType::Property)
                .label("intensifier")
                .tag("ADV")
                .type_name("PROPERTY")
                .value(Value::Text(i.lemma().to_string()));
            p.token_ref = Some(i.token.index);
            parent.push(NodeType::Property, p);
        }
    }

    fn adverbial(&mut self, c: &ParseNode) -> SResult<(NodeType, S2Element)> {
        if c.lemma() == "times" {
            let n = c
                .child(Relation::Nummod)
                .and_then(|n| n.token.value)
                .ok_or_else(|| SemanticError::MalformedParse("loop count without number".into()))?;
            let mut count = self
                .el(NodeType::Count)
                .label("times")
                .tag("NUM")
                .type_name("VALUE")
                .kind("LOOP")
                .value(Value::Number(n));
            count.token_ref = Some(c.token.index);
            return Ok((NodeType::Count, count));
        }
        let text = self
            .lex
            .adverb(c.lemma())
            .unwrap_or(c.lemma())
            .to_string();
        let mut prop = self
            .el(NodeType::Property)
            .label("modifier")
            .tag("ADV")
            .type_name("PROPERTY")
            .value(Value::Text(text));
        prop.token_ref = Some(c.token.index);
        self.intensifiers(&mut prop, c);
        Ok((NodeType::Property, prop))
    }

    /// Predicate adjective of a copular clause.
    fn attribute(&mut self, c: &ParseNode) -> S2Element {
        let text = Value::Text(c.lemma().to_string());
        let value = if c.child(Relation::Neg).is_some() {
            Value::List(vec![text, Value::Flag(false)])
        } else {
            text
        };
        let mut prop = self
            .el(NodeType::Property)
            .label("attribute")
            .tag("ADJ")
            .type_name("PROPERTY")
            .value(value);
        prop.token_ref = Some(c.token.index);
        self.intensifiers(&mut prop, c);
        prop
    }

    fn time(&mut self, c: &ParseNode) -> SResult<S2Element> {
        let interval = c
            .child(Relation::Det)
            .is_some_and(|d| d.lemma() == "every");
        let mut t = self
            .el(NodeType::Time)
            .label(c.lemma())
            .tag("TIME")
            .type_name(if interval { "INTERVAL" } else { "DURATION" });
        t.token_ref = Some(c.token.index);
        if let Some(n) = c.child(Relation::Nummod).and_then(|n| n.token.value) {
            t.value = Some(Value::Number(n));
        }
        for a in c.children_with(Relation::Amod) {
            let mut p = self
                .el(NodeType::Property)
                .label("trait")
                .tag("ADJ")
                .type_name("PROPERTY")
                .value(Value::Text(a.lemma().to_string()));
            p.token_ref = Some(a.token.index);
            t.push(NodeType::Property, p);
        }
        if !interval && t.value.is_none() {
            return Err(SemanticError::MalformedParse("duration without a number".into()));
        }
        Ok(t)
    }

    fn noun(&mut self, np: &ParseNode, nt: NodeType) -> SResult<S2Element> {
        let tok = &np.token;
        let mut el = match tok.category {
            Category::Num => {
                let v = tok
                    .value
                    .ok_or_else(|| SemanticError::MalformedParse("number without value".into()))?;
                let mut el = self
                    .el(nt)
                    .label(&tok.lemma)
                    .tag("NUM")
                    .type_name("VALUE")
                    .kind("NUMBER")
                    .value(Value::Number(v));
                el.token_ref = Some(tok.index);
                return Ok(el);
            }
            Category::Pron => {
                let reserved = matches!(tok.lemma.as_str(), "i" | "me");
                let mut el = self
                    .el(nt)
                    .label(if reserved { "I" } else { &tok.lemma })
                    .tag("PRON")
                    .kind(if reserved { "SELF" } else { "THING_INSTANCE" })
                    .value(Value::ThingIds(Vec::new()));
                el.token_ref = Some(tok.index);
                return Ok(el);
            }
            Category::Det => self
                .el(nt)
                .label(&tok.lemma)
                .tag("PRON")
                .kind("THING_INSTANCE")
                .value(Value::ThingIds(Vec::new())),
            Category::Noun => self
                .el(nt)
                .label(&tok.lemma)
                .tag("NOUN")
                .kind("THING_INSTANCE")
                .value(Value::ThingIds(Vec::new())),
            other => {
                return Err(SemanticError::MalformedParse(format!(
                    "'{}' ({}) cannot fill a noun role",
                    tok.text,
                    other.as_str()
                )))
            }
        };
        el.token_ref = Some(tok.index);

        let standalone_det = tok.category == Category::Det;
        let det = if standalone_det {
            Some(tok)
        } else {
            np.child(Relation::Det).map(|d| &d.token)
        };
        let number = np.child(Relation::Nummod).and_then(|n| n.token.value);
        let lemma_plural = if standalone_det {
            false
        } else {
            self.lex.noun_lemma(&tok.text.to_lowercase()).1
        };
        let det_lemma = det.map(|d| d.lemma.as_str());
        let plural = lemma_plural
            || matches!(det_lemma, Some("these" | "those"))
            || number.is_some_and(|n| n > 1.0);

        let spec = match det {
            Some(d) => {
                let specific = !matches!(d.lemma.as_str(), "a" | "an");
                let mut s = self
                    .el(NodeType::SpecificOrUnspecific)
                    .label(&d.lemma)
                    .tag("DET")
                    .type_name("VALUE")
                    .kind(if specific { "SPECIFIC" } else { "UNSPECIFIC" })
                    .value(Value::Flag(specific));
                s.token_ref = Some(d.index);
                s
            }
            None => self
                .el(NodeType::SpecificOrUnspecific)
                .type_name("VALUE")
                .kind("UNSPECIFIC")
                .value(Value::Flag(false)),
        };
        el.push(NodeType::SpecificOrUnspecific, spec);

        let count = match (number, det_lemma) {
            (Some(n), _) => self
                .el(NodeType::Count)
                .type_name("VALUE")
                .value(Value::Number(n)),
            // The indefinite article leaves the count untyped.
            (None, Some("a" | "an")) => self.el(NodeType::Count).value(Value::Number(1.0)),
            (None, Some("all" | "every")) => {
                self.el(NodeType::Count).type_name("VALUE").value(Value::All)
            }
            (None, _) if plural => self.el(NodeType::Count).type_name("VALUE").value(Value::All),
            (None, _) => self
                .el(NodeType::Count)
                .type_name("VALUE")
                .value(Value::Number(1.0)),
        };
        el.push(NodeType::Count, count);

        let plural_flag = matches!(det_lemma, Some("all")) || plural;
        let p = self
            .el(NodeType::Plural)
            .type_name("VALUE")
            .value(Value::Flag(plural_flag));
        el.push(NodeType::Plural, p);

        for c in &np.children {
            match c.relation {
                Relation::Amod => {
                    let mut prop = self
                        .el(NodeType::Property)
                        .label("trait")
                        .tag("ADJ")
                        .type_name("PROPERTY")
                        .value(Value::Text(c.lemma().to_string()));
                    prop.token_ref = Some(c.token.index);
                    self.intensifiers(&mut prop, c);
                    el.push(NodeType::Property, prop);
                }
                Relation::Neg => {
                    let prop = self
                        .el(NodeType::Property)
                        .label("negation")
                        .tag("NEG")
                        .type_name("PROPERTY")
                        .value(Value::Flag(true));
                    el.push(NodeType::Property, prop);
                }
                Relation::Prep => {
                    let prep = self.preposition(c)?;
                    el.push(NodeType::Preposition, prep);
                }
                Relation::Det | Relation::Nummod | Relation::Conj => {}
                other => {
                    return Err(SemanticError::MalformedParse(format!(
                        "unexpected {} under noun '{}'",
                        other.as_str(),
                        tok.text
                    )))
                }
            }
        }
        Ok(el)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grammar::{parse_sentence, tokenize};

    fn s2(text: &str) -> S2Element {
        let lex = Lexicon::default();
        let p = parse_sentence(&lex, &tokenize(&lex, text)).unwrap();
        build_s2(&lex, &p, &[]).unwrap()
    }

    fn action(root: &S2Element) -> &S2Element {
        root.first(NodeType::CmdList).unwrap().first(NodeType::Action).unwrap()
    }

    #[test]
    fn minimal_svo() {
        let root = s2("The dog jumps.");
        let a = action(&root);
        assert_eq!(a.label, "jump");
        let agent = a.first(NodeType::Agent).unwrap();
        let spec = agent.noun_spec().unwrap();
        assert_eq!(spec.lemma, "dog");
        assert!(spec.specific);
        assert_eq!(spec.count, crate::semantic::Count::Exactly(1.0));
        assert!(!spec.plural);
    }

    #[test]
    fn noun_determiners() {
        let root = s2("all dogs jump");
        let s = action(&root).first(NodeType::Agent).unwrap().noun_spec().unwrap();
        assert!(s.plural);
        assert_eq!(s.count, crate::semantic::Count::All);

        let root = s2("a dog jumps");
        let s = action(&root).first(NodeType::Agent).unwrap().noun_spec().unwrap();
        assert!(!s.specific);
        assert_eq!(s.count, crate::semantic::Count::Exactly(1.0));

        let root = s2("dogs jump");
        let s = action(&root).first(NodeType::Agent).unwrap().noun_spec().unwrap();
        assert!(!s.specific && s.plural);
        assert_eq!(s.determiner, None);
    }

    #[test]
    fn trigger_response_layout() {
        let root = s2("When arrows collide with balloons, arrows destroy balloons.");
        let cmd = root.first(NodeType::CmdList).unwrap();
        let tr = cmd.first(NodeType::TriggerResponse).unwrap();
        let trig = tr.first(NodeType::Trigger).unwrap();
        assert_eq!(trig.first(NodeType::Action).unwrap().label, "collide");
        assert_eq!(trig.first(NodeType::Property).unwrap().text(), Some("when"));
        let resp = tr.first(NodeType::Response).unwrap();
        assert_eq!(resp.first(NodeType::Action).unwrap().label, "destroy");
    }

    #[test]
    fn loops_and_timers() {
        let root = s2("10 times the dog jumps excitedly");
        let a = action(&root);
        let c = a.first(NodeType::Count).unwrap();
        assert_eq!((c.kind.as_str(), c.number()), ("LOOP", Some(10.0)));
        assert_eq!(a.first(NodeType::Property).unwrap().text(), Some("excited"));

        let root = s2("the square moves up for 11.18 seconds and then jumps");
        let a = action(&root);
        let t = a.first(NodeType::Time).unwrap();
        assert_eq!((t.type_name.as_str(), t.number()), ("DURATION", Some(11.18)));
        let then = a.first(NodeType::SequenceThen).unwrap();
        assert!(then.annotations.contains(&Annotation::MustFillInAgent));
        assert!(then.get(NodeType::Agent).is_empty());
    }

    #[test]
    fn negated_attribute() {
        let root = s2("The thing is not fast");
        let p = action(&root).first(NodeType::Property).unwrap();
        assert_eq!(p.value, Some(Value::List(vec![Value::Text("fast".into()), Value::Flag(false)])));
    }
}
