use super::token::{split_sentences, tokenize, Category, Token};
use super::{GrammarError, ParseNode, Relation};
use crate::lexicon::Lexicon;

type PResult<T> = Result<T, GrammarError>;

/// Tokenizes and parses every sentence in `text`.
pub fn parse_text(lex: &Lexicon, text: &str) -> PResult<Vec<ParseNode>> {
    let tokens = tokenize(lex, text);
    split_sentences(&tokens)
        .iter()
        .filter(|s| s.iter().any(|t| t.category != Category::Punct))
        .map(|s| parse_sentence(lex, s))
        .collect()
}

/// Parses one sentence into a dependency tree rooted at the main verb.
pub fn parse_sentence(lex: &Lexicon, tokens: &[Token]) -> PResult<ParseNode> {
    let mut toks = Vec::with_capacity(tokens.len());
    for t in tokens {
        if t.category != Category::Punct {
            toks.push(t.clone());
            continue;
        }
        match t.text.as_str() {
            "\"" | "'" | "\u{201c}" | "\u{201d}" | "\u{2018}" | "\u{2019}" | "`" => {}
            "." | "?" | "!" => {}
            "," | ";" => {
                let mut c = t.clone();
                c.text = ",".into();
                c.lemma = ",".into();
                toks.push(c);
            }
            other => {
                return Err(GrammarError::unsupported(
                    t.index,
                    format!("unexpected symbol '{other}'"),
                ))
            }
        }
    }
    while toks.last().is_some_and(|t| t.is_punct(",")) {
        toks.pop();
    }
    if toks.is_empty() {
        let at = tokens.first().map_or(0, |t| t.index);
        return Err(GrammarError::unsupported(at, "empty sentence"));
    }
    let mut p = Parser { lex, toks, pos: 0 };
    let root = p.sentence()?;
    if let Some(t) = p.peek() {
        return Err(GrammarError::unsupported(
            t.index,
            format!("unexpected '{}'", t.text),
        ));
    }
    Ok(root)
}

#[derive(Clone, Copy, PartialEq)]
enum Link {
    And,
    Then,
}

#[derive(Clone, Copy)]
enum NpMode {
    Subject,
    Object,
    PrepObject,
}

impl NpMode {
    fn attaches(self, prep: &str) -> bool {
        match self {
            NpMode::Subject => !matches!(prep, "for" | "by" | "up" | "down" | "left" | "right"),
            NpMode::Object => prep == "of",
            NpMode::PrepObject => matches!(prep, "of" | "on"),
        }
    }
}

struct Parser<'a> {
    lex: &'a Lexicon,
    toks: Vec<Token>,
    pos: usize,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&Token> {
        self.toks.get(self.pos)
    }

    fn tok_at(&self, i: usize) -> Option<&Token> {
        self.toks.get(i)
    }

    fn bump(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        self.pos += 1;
        t
    }

    fn here(&self) -> usize {
        match self.peek() {
            Some(t) => t.index,
            None => self.toks.last().map_or(0, |t| t.index + 1),
        }
    }

    fn err<T>(&self, reason: impl Into<String>) -> PResult<T> {
        Err(GrammarError::unsupported(self.here(), reason))
    }

    fn is_comma(&self, i: usize) -> bool {
        self.tok_at(i).is_some_and(|t| t.is_punct(","))
    }

    fn cat(&self, i: usize) -> Option<Category> {
        self.tok_at(i).map(|t| t.category)
    }

    fn lemma_at(&self, i: usize) -> Option<&str> {
        self.tok_at(i).map(|t| t.lemma.as_str())
    }

    fn text_at(&self, i: usize) -> Option<String> {
        self.tok_at(i).map(|t| t.text.to_lowercase())
    }

    // ---- sentence level -------------------------------------------------

    fn sentence(&mut self) -> PResult<ParseNode> {
        if self.cat(self.pos) == Some(Category::WhenMarker) {
            let marker = self.bump();
            let trigger = self.clause(true)?;
            if self.is_comma(self.pos) {
                self.pos += 1;
            }
            if self.cat(self.pos) == Some(Category::ConjThen) {
                self.pos += 1;
            }
            let mut root = self.command_seq()?;
            root.children.push(condition(trigger, marker));
            root.relation = Relation::Root;
            return Ok(root);
        }
        let mut root = self.command_seq()?;
        let mut at = self.pos;
        if self.is_comma(at) {
            at += 1;
        }
        if self.cat(at) == Some(Category::WhenMarker) {
            self.pos = at;
            let marker = self.bump();
            let trigger = self.clause(true)?;
            root.children.push(condition(trigger, marker));
        }
        root.relation = Relation::Root;
        Ok(root)
    }

    fn command_seq(&mut self) -> PResult<ParseNode> {
        let mut clauses = vec![self.clause(true)?];
        let mut links = Vec::new();
        loop {
            let save = self.pos;
            let mut comma = false;
            if self.is_comma(self.pos) {
                self.pos += 1;
                comma = true;
            }
            let link = match self.cat(self.pos) {
                Some(Category::ConjAnd) if self.is_over_and_over(self.pos - 1) => None,
                Some(Category::ConjAnd) => {
                    self.pos += 1;
                    if self.cat(self.pos) == Some(Category::ConjThen) {
                        self.pos += 1;
                        Some(Link::Then)
                    } else {
                        Some(Link::And)
                    }
                }
                Some(Category::ConjThen) => {
                    self.pos += 1;
                    Some(Link::Then)
                }
                Some(Category::WhenMarker) | None => None,
                Some(_) if comma => Some(Link::And),
                Some(_) => None,
            };
            let Some(link) = link else {
                self.pos = save;
                break;
            };
            if self.peek().is_none() {
                return self.err("dangling conjunction");
            }
            clauses.push(self.clause(false)?);
            links.push(link);
        }
        Ok(assemble(clauses, &links))
    }

    fn is_over_and_over(&self, i: usize) -> bool {
        self.lemma_at(i) == Some("over")
            && self.cat(i + 1) == Some(Category::ConjAnd)
            && self.lemma_at(i + 2) == Some("over")
    }

    /// clause := modifier* [subject] verb-group complement*
    fn clause(&mut self, require_subject: bool) -> PResult<ParseNode> {
        let mut prefix = Vec::new();
        while let Some(m) = self.modifier(false)? {
            prefix.push(m);
        }
        let mut subject = None;
        if self.starts_np(self.pos) && !self.starts_verb_not_np() {
            let mut np = self.np_list(NpMode::Subject)?;
            if self.is_comma(self.pos) && self.is_verb_capable(self.pos + 1) && is_bare(&np) {
                self.pos += 1;
                add_vocative_det(&mut np);
            } else if is_bare(&np) && self.is_base_form(self.pos) && !self.is_plural_np(&np) {
                add_vocative_det(&mut np);
            }
            np.relation = Relation::Subject;
            subject = Some(np);
        } else if require_subject {
            return self.err("a command needs an explicit subject");
        }
        let mut verb = self.verb_group()?;
        if let Some(s) = subject {
            verb.children.insert(0, s);
        }
        let at = verb.children.iter().filter(|c| c.relation == Relation::Subject).count();
        for (i, m) in prefix.into_iter().enumerate() {
            verb.children.insert(at + i, m);
        }
        Ok(verb)
    }

    fn starts_verb_not_np(&self) -> bool {
        match self.cat(self.pos) {
            Some(Category::Verb) => true,
            Some(Category::Unknown) => !self.np_then_verb(self.pos),
            _ => false,
        }
    }

    fn is_verb_capable(&self, i: usize) -> bool {
        matches!(self.cat(i), Some(Category::Verb | Category::Unknown))
    }

    fn is_base_form(&self, i: usize) -> bool {
        match self.tok_at(i) {
            Some(t) if t.category == Category::Verb => {
                t.text.to_lowercase() == t.lemma && t.lemma != "be" && t.lemma != "will"
            }
            _ => false,
        }
    }

    fn is_plural_np(&self, np: &ParseNode) -> bool {
        self.lex.noun_lemma(&np.token.text.to_lowercase()).1
    }

    /// Whether an NP starts at `i` and is directly followed by a verb.
    fn np_then_verb(&self, i: usize) -> bool {
        if !self.starts_np(i) {
            return false;
        }
        let mut probe = Parser {
            lex: self.lex,
            toks: self.toks.clone(),
            pos: i,
        };
        match probe.np(NpMode::Subject) {
            Ok(_) => {
                let mut j = probe.pos;
                if probe.is_comma(j) {
                    j += 1;
                }
                probe.is_verb_capable(j)
            }
            Err(_) => false,
        }
    }

    // ---- verbs ------------------------------------------------------------

    fn verb_group(&mut self) -> PResult<ParseNode> {
        let Some(t) = self.peek().cloned() else {
            return self.err("expected a verb");
        };
        match t.category {
            Category::Verb if t.lemma == "will" => {
                self.pos += 1;
                if self.cat(self.pos) == Some(Category::Neg) {
                    return self.err("negated actions are not supported");
                }
                if !self.is_verb_capable(self.pos) {
                    return self.err("expected a verb after 'will'");
                }
                self.verb_group()
            }
            Category::Verb if t.lemma == "be" => {
                self.pos += 1;
                let next = self.peek().cloned();
                match next {
                    Some(n) if n.category == Category::Neg
                        && self.is_verb_capable(self.pos + 1)
                        && self.text_at(self.pos + 1).is_some_and(|w| w.ends_with("ing")) =>
                    {
                        self.err("negated actions are not supported")
                    }
                    Some(n)
                        if self.is_verb_capable(self.pos)
                            && n.text.to_lowercase().ends_with("ing") =>
                    {
                        self.main_verb()
                    }
                    Some(n) if self.is_passive(&n) => {
                        self.err("passive voice is not supported")
                    }
                    _ => self.copular(t),
                }
            }
            Category::Verb if t.lemma == "become" => {
                self.pos += 1;
                self.copular(t)
            }
            Category::Verb if t.lemma == "stop" => {
                self.pos += 1;
                let mut node = ParseNode::new(t, Relation::Root);
                if self.is_verb_capable(self.pos)
                    && self.text_at(self.pos).is_some_and(|w| w.ends_with("ing"))
                {
                    let g = self.bump();
                    node.children.push(ParseNode::new(self.as_verb(g), Relation::Dobj));
                }
                self.complements(&mut node)?;
                Ok(node)
            }
            Category::Verb | Category::Unknown => self.main_verb(),
            _ => self.err(format!("expected a verb, found '{}'", t.text)),
        }
    }

    fn is_passive(&self, t: &Token) -> bool {
        let w = t.text.to_lowercase();
        match t.category {
            Category::Verb => {
                self.lex.is_participle(&w)
                    || (w.ends_with("ed") && self.lex.verb_lemma(&w).is_some())
                    || (w.ends_with("en") && self.lex.verb_lemma(&w).is_some())
            }
            Category::Unknown => {
                w.ends_with("ed") && self.lemma_at(self.pos + 1) == Some("by")
            }
            _ => false,
        }
    }

    fn as_verb(&self, mut t: Token) -> Token {
        if t.category == Category::Unknown {
            t.lemma = self.lex.guess_verb_lemma(&t.text.to_lowercase());
            t.category = Category::Verb;
        }
        t
    }

    fn main_verb(&mut self) -> PResult<ParseNode> {
        let t = self.bump();
        let t = self.as_verb(t);
        let mut node = ParseNode::new(t, Relation::Root);
        self.complements(&mut node)?;
        Ok(node)
    }

    fn copular(&mut self, be: Token) -> PResult<ParseNode> {
        let mut node = ParseNode::new(be, Relation::Root);
        loop {
            let neg = if self.cat(self.pos) == Some(Category::Neg) {
                Some(self.bump())
            } else {
                None
            };
            if let Some(adj) = self.predicate_adjective()? {
                let mut adj = adj;
                if let Some(n) = neg {
                    adj.children.insert(0, ParseNode::new(n, Relation::Neg));
                }
                node.children.push(adj);
            } else if self.starts_np(self.pos) {
                let mut np = self.np(NpMode::PrepObject)?;
                if let Some(n) = neg {
                    np.children.insert(0, ParseNode::new(n, Relation::Neg));
                }
                np.relation = Relation::Dobj;
                node.children.push(np);
            } else {
                return self.err("expected a noun or adjective after the verb");
            }
            let sep = self.cat(self.pos) == Some(Category::ConjAnd) || self.is_comma(self.pos);
            if !sep {
                break;
            }
            let after = self.pos + 1;
            let after = if self.is_comma(self.pos) && self.cat(after) == Some(Category::ConjAnd) {
                after + 1
            } else {
                after
            };
            let continues = matches!(self.cat(after), Some(Category::Neg))
                || self.adjective_follows(after)
                || (self.starts_np(after) && !self.np_then_verb(after));
            if !continues || self.cat(after) == Some(Category::ConjThen) {
                break;
            }
            self.pos = after;
        }
        self.complements(&mut node)?;
        Ok(node)
    }

    /// intensifier* ADJ not followed by a noun, or an unknown word standing alone.
    fn adjective_follows(&self, i: usize) -> bool {
        let mut j = i;
        while self.tok_at(j).is_some_and(|t| self.lex.is_intensifier(&t.lemma)) {
            j += 1;
        }
        match self.cat(j) {
            Some(Category::Adj) | Some(Category::Adv) => !self.noun_follows(j + 1),
            Some(Category::Unknown) => {
                !self.noun_follows(j + 1) && !self.is_verb_capable(j + 1) || self.tok_at(j + 1).is_none()
            }
            _ => false,
        }
    }

    fn predicate_adjective(&mut self) -> PResult<Option<ParseNode>> {
        if !self.adjective_follows(self.pos) {
            return Ok(None);
        }
        let mut intens = Vec::new();
        while self.peek().is_some_and(|t| self.lex.is_intensifier(&t.lemma)) {
            intens.push(self.bump());
        }
        let mut t = self.bump();
        if t.category != Category::Adj {
            t.category = Category::Adj;
            if let Some(a) = self.lex.adverb(&t.lemma) {
                t.lemma = a.to_string();
            }
        }
        let mut node = ParseNode::new(t, Relation::Amod);
        for i in intens {
            node.children.push(ParseNode::new(i, Relation::Advmod));
        }
        Ok(Some(node))
    }

    fn complements(&mut self, verb: &mut ParseNode) -> PResult<()> {
        loop {
            if let Some(m) = self.modifier(true)? {
                verb.children.push(m);
                continue;
            }
            let Some(t) = self.peek().cloned() else {
                break;
            };
            match t.category {
                Category::Punct | Category::ConjAnd | Category::ConjThen | Category::WhenMarker => {
                    break
                }
                Category::Prep => {
                    let prep = self.bump();
                    let direction = self.lex.is_direction(&prep.lemma);
                    if !self.starts_np(self.pos) || self.np_then_verb(self.pos) {
                        if direction || prep.lemma == "away" {
                            verb.children.push(ParseNode::new(prep, Relation::Prep));
                            continue;
                        }
                        return Err(GrammarError::unsupported(
                            prep.index,
                            format!("dangling preposition '{}'", prep.text),
                        ));
                    }
                    let mut obj = self.np_list(NpMode::PrepObject)?;
                    obj.relation = Relation::Pobj;
                    verb.children.push(ParseNode::new(prep, Relation::Prep).with(obj));
                }
                Category::Neg => return self.err("negated actions are not supported"),
                _ if self.starts_np(self.pos) => {
                    if self.np_then_verb(self.pos) {
                        break;
                    }
                    let mut obj = self.np_list(NpMode::Object)?;
                    let dobj = verb.children.iter().position(|c| c.relation == Relation::Dobj);
                    let iobj = verb.children.iter().any(|c| c.relation == Relation::Iobj);
                    match (dobj, iobj) {
                        (None, _) => obj.relation = Relation::Dobj,
                        (Some(d), false) => {
                            verb.children[d].relation = Relation::Iobj;
                            obj.relation = Relation::Dobj;
                        }
                        (Some(_), true) => return self.err("too many objects"),
                    }
                    verb.children.push(obj);
                }
                _ => return self.err(format!("unexpected '{}'", t.text)),
            }
        }
        Ok(())
    }

    /// Loop markers, time phrases and adverbs. `after_verb` also admits
    /// adjectives used adverbially ("moves fast").
    fn modifier(&mut self, after_verb: bool) -> PResult<Option<ParseNode>> {
        let Some(t) = self.peek().cloned() else {
            return Ok(None);
        };
        let i = self.pos;
        if t.category == Category::Adv {
            if let Some(lemma) = self.lex.loop_word(&t.lemma) {
                let mut tok = self.bump();
                tok.lemma = lemma.to_string();
                return Ok(Some(ParseNode::new(tok, Relation::Advmod)));
            }
        }
        if self.is_over_and_over(i) && t.category == Category::Prep {
            self.pos += 3;
            let tok = Token::synthetic("over and over", "forever", t.index, Category::Adv);
            return Ok(Some(ParseNode::new(tok, Relation::Advmod)));
        }
        if t.category == Category::Num && self.text_at(i + 1).as_deref() == Some("times") {
            let n = self.bump();
            let mut times = self.bump();
            times.lemma = "times".into();
            let node = ParseNode::new(times, Relation::Advmod).with(ParseNode::new(n, Relation::Nummod));
            return Ok(Some(node));
        }
        if t.category == Category::Det && t.lemma == "every" {
            let mut j = i + 1;
            let qual = match self.tok_at(j) {
                Some(q) if q.category == Category::Num || q.lemma == "few" => {
                    j += 1;
                    Some(q.clone())
                }
                _ => None,
            };
            if self.cat(j) == Some(Category::TimeUnit) && !self.noun_follows(j + 1) {
                let every = self.bump();
                let qual = qual.map(|_| self.bump());
                let unit = self.bump();
                let mut node = ParseNode::new(unit, Relation::Time)
                    .with(ParseNode::new(every, Relation::Det));
                if let Some(q) = qual {
                    let rel = if q.category == Category::Num {
                        Relation::Nummod
                    } else {
                        Relation::Amod
                    };
                    let mut q = q;
                    if rel == Relation::Amod {
                        q.category = Category::Adj;
                    }
                    node.children.push(ParseNode::new(q, rel));
                }
                return Ok(Some(node));
            }
        }
        if t.category == Category::Prep
            && t.lemma == "for"
            && self.cat(i + 1) == Some(Category::Num)
            && self.cat(i + 2) == Some(Category::TimeUnit)
        {
            self.pos += 1;
            let n = self.bump();
            let unit = self.bump();
            return Ok(Some(
                ParseNode::new(unit, Relation::Time).with(ParseNode::new(n, Relation::Nummod)),
            ));
        }
        // intensifier* adverb
        let mut j = i;
        while self.tok_at(j).is_some_and(|x| self.lex.is_intensifier(&x.lemma)) {
            j += 1;
        }
        let adverbial = match self.tok_at(j) {
            Some(x) if x.category == Category::Adv && !self.lex.is_intensifier(&x.lemma) => true,
            Some(x) if after_verb && x.category == Category::Adj => {
                self.lex.adverb(&x.lemma).is_some() && !self.noun_follows(j + 1)
            }
            _ => false,
        };
        if adverbial {
            let mut intens = Vec::new();
            while self.pos < j {
                intens.push(self.bump());
            }
            let mut adv = self.bump();
            adv.category = Category::Adv;
            let mut node = ParseNode::new(adv, Relation::Advmod);
            for x in intens {
                node.children.push(ParseNode::new(x, Relation::Advmod));
            }
            return Ok(Some(node));
        }
        Ok(None)
    }

    // ---- noun phrases -----------------------------------------------------

    fn noun_follows(&self, i: usize) -> bool {
        let mut j = i;
        loop {
            match self.tok_at(j) {
                Some(t) if t.category == Category::Adj => j += 1,
                Some(t) if self.lex.is_intensifier(&t.lemma) => j += 1,
                Some(t) if t.category == Category::TimeUnit && t.lemma == "second" => j += 1,
                Some(t) if t.category == Category::Prep && self.lex.is_direction(&t.lemma) => {
                    j += 1
                }
                Some(t) => return matches!(t.category, Category::Noun | Category::Unknown),
                None => return false,
            }
            if j > i + 8 {
                return false;
            }
        }
    }

    /// "every [few|N] unit" at `i`.
    fn is_every_phrase(&self, i: usize) -> bool {
        if self.lemma_at(i) != Some("every") {
            return false;
        }
        let j = match self.tok_at(i + 1) {
            Some(q) if q.category == Category::Num || q.lemma == "few" => i + 2,
            _ => i + 1,
        };
        self.cat(j) == Some(Category::TimeUnit) && !self.noun_follows(j + 1)
    }

    fn starts_np(&self, i: usize) -> bool {
        let Some(t) = self.tok_at(i) else {
            return false;
        };
        match t.category {
            Category::Det | Category::Noun | Category::Pron | Category::Unknown => true,
            Category::Num => self.text_at(i + 1).as_deref() != Some("times"),
            Category::Adj | Category::Adv | Category::TimeUnit | Category::Prep => {
                let modifier_like = t.category == Category::Adj
                    || self.lex.is_intensifier(&t.lemma)
                    || t.lemma == "second"
                    || self.lex.is_direction(&t.lemma);
                modifier_like && self.noun_follows(i)
            }
            _ => false,
        }
    }

    fn np_list(&mut self, mode: NpMode) -> PResult<ParseNode> {
        let mut head = self.np(mode)?;
        loop {
            let i = self.pos;
            let joined = if self.cat(i) == Some(Category::ConjAnd) {
                Some(i + 1)
            } else if self.is_comma(i) {
                if self.cat(i + 1) == Some(Category::ConjAnd) {
                    Some(i + 2)
                } else {
                    Some(i + 1)
                }
            } else {
                None
            };
            let Some(next) = joined else { break };
            if self.cat(next) == Some(Category::ConjThen)
                || self.is_every_phrase(next)
                || !self.starts_np(next)
                || self.np_then_verb(next)
            {
                break;
            }
            self.pos = next;
            let mut other = self.np(mode)?;
            other.relation = Relation::Conj;
            head.children.push(other);
        }
        Ok(head)
    }

    /// np := DET? NUM? premodifier* head PP*
    fn np(&mut self, mode: NpMode) -> PResult<ParseNode> {
        let mut pre = Vec::new();
        if self.cat(self.pos) == Some(Category::Det) {
            let det = self.bump();
            let deictic = self.lex.is_deictic(&det.lemma);
            if det.lemma == "all" {
                if self.lemma_at(self.pos) == Some("of") && self.lemma_at(self.pos + 1) == Some("the") {
                    self.pos += 2;
                } else if self.lemma_at(self.pos) == Some("the") {
                    self.pos += 1;
                }
            }
            if deictic && !self.starts_np(self.pos) {
                // Bare "this"/"that" stands for the selected thing.
                return Ok(ParseNode::new(det, Relation::Subject));
            }
            if deictic && self.np_then_verb(self.pos) && self.cat(self.pos) != Some(Category::Noun) {
                return Ok(ParseNode::new(det, Relation::Subject));
            }
            pre.push(ParseNode::new(det, Relation::Det));
        }
        if self.cat(self.pos) == Some(Category::Num) && self.text_at(self.pos + 1).as_deref() != Some("times") {
            let n = self.bump();
            if !self.noun_follows(self.pos) {
                // Number literal ("equals 3").
                if pre.is_empty() {
                    return Ok(ParseNode::new(n, Relation::Dobj));
                }
                let mut node = ParseNode::new(n, Relation::Dobj);
                node.children = pre;
                return Ok(node);
            }
            pre.push(ParseNode::new(n, Relation::Nummod));
        }
        loop {
            let Some(t) = self.peek().cloned() else { break };
            let intens = self.lex.is_intensifier(&t.lemma);
            let modifier = t.category == Category::Adj
                || intens
                || (t.category == Category::TimeUnit && t.lemma == "second")
                || (t.category == Category::Prep && self.lex.is_direction(&t.lemma));
            if !modifier || !self.noun_follows(self.pos) {
                break;
            }
            let mut chain = Vec::new();
            while self.peek().is_some_and(|x| self.lex.is_intensifier(&x.lemma)) {
                chain.push(self.bump());
            }
            let mut adj = self.bump();
            adj.category = Category::Adj;
            let mut node = ParseNode::new(adj, Relation::Amod);
            for c in chain {
                node.children.push(ParseNode::new(c, Relation::Advmod));
            }
            pre.push(node);
        }
        let Some(t) = self.peek().cloned() else {
            return self.err("expected a noun");
        };
        let mut head = match t.category {
            Category::Noun => self.bump(),
            Category::Unknown => {
                let mut h = self.bump();
                h.lemma = self.lex.noun_lemma(&h.text.to_lowercase()).0;
                h.category = Category::Noun;
                h
            }
            Category::Pron if pre.is_empty() => self.bump(),
            _ => return self.err(format!("expected a noun, found '{}'", t.text)),
        };
        if head.category == Category::Noun {
            head.lemma = self.lex.noun_lemma(&head.text.to_lowercase()).0;
        }
        let mut node = ParseNode::new(head, Relation::Subject);
        node.children = pre;
        while self.cat(self.pos) == Some(Category::Prep) {
            let prep = self.peek().cloned().expect("peeked");
            if !mode.attaches(&prep.lemma) || !self.starts_np(self.pos + 1) {
                break;
            }
            if matches!(mode, NpMode::Subject) {
                // Attach only if a verb eventually follows the PP object.
                let mut probe = Parser {
                    lex: self.lex,
                    toks: self.toks.clone(),
                    pos: self.pos + 1,
                };
                let ok = probe.np(NpMode::Subject).is_ok()
                    && (probe.is_verb_capable(probe.pos) || probe.is_comma(probe.pos));
                if !ok {
                    break;
                }
            }
            let prep = self.bump();
            let inner_mode = match mode {
                NpMode::Subject => NpMode::Subject,
                _ => NpMode::PrepObject,
            };
            let mut obj = self.np(inner_mode)?;
            obj.relation = Relation::Pobj;
            node.children.push(ParseNode::new(prep, Relation::Prep).with(obj));
        }
        Ok(node)
    }
}

fn condition(mut trigger: ParseNode, marker: Token) -> ParseNode {
    trigger.relation = Relation::Condition;
    trigger.children.push(ParseNode::new(marker, Relation::Advmod));
    trigger
}

/// Groups clauses: "and" joins clauses that run together, "then" starts the next group.
fn assemble(clauses: Vec<ParseNode>, links: &[Link]) -> ParseNode {
    let mut groups: Vec<Vec<ParseNode>> = Vec::new();
    for (i, c) in clauses.into_iter().enumerate() {
        if i == 0 || links[i - 1] == Link::Then {
            groups.push(vec![c]);
        } else {
            groups.last_mut().expect("group").push(c);
        }
    }
    let mut next: Option<ParseNode> = None;
    while let Some(group) = groups.pop() {
        let mut it = group.into_iter();
        let mut head = it.next().expect("non-empty group");
        for mut c in it {
            c.relation = Relation::Conj;
            head.children.push(c);
        }
        if let Some(mut n) = next.take() {
            n.relation = Relation::Seq;
            head.children.push(n);
        }
        next = Some(head);
    }
    let mut root = next.expect("at least one clause");
    root.relation = Relation::Root;
    root
}

fn is_bare(np: &ParseNode) -> bool {
    np.token.category == Category::Noun
        && np.children.iter().all(|c| c.relation != Relation::Det && c.relation != Relation::Nummod)
        && !np.children.iter().any(|c| c.relation == Relation::Conj)
}

fn add_vocative_det(np: &mut ParseNode) {
    let det = Token::synthetic("the", "the", np.token.index, Category::Det);
    np.children.insert(0, ParseNode::new(det, Relation::Det));
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> PResult<ParseNode> {
        let lex = Lexicon::default();
        let toks = tokenize(&lex, s);
        parse_sentence(&lex, &toks)
    }

    fn dump(s: &str) -> String {
        parse(s).unwrap_or_else(|e| panic!("{s}: {e}")).dump()
    }

    #[test]
    fn simple_svo() {
        assert_eq!(
            dump("The frog hops to a lily."),
            "ROOT hop VERB\n  SUBJECT frog NOUN\n    DET the DET\n  PREP to PREP\n    POBJ lily NOUN\n      DET a DET\n"
        );
    }

    #[test]
    fn tense_forms_collapse() {
        let base = parse("the dog jumps").unwrap();
        for s in ["the dog jumped", "the dog will jump", "the dog is jumping", "dog, jump", "dog jump"] {
            assert!(parse(s).unwrap().same_shape(&base), "{s}\n{}", dump(s));
        }
    }

    #[test]
    fn subjectless_imperative_rejected() {
        assert!(matches!(
            parse("Make a star"),
            Err(GrammarError::UnsupportedGrammar { .. })
        ));
    }

    #[test]
    fn passive_rejected() {
        for s in ["the ball is thrown", "the ball was moved by the dog", "the dog is jumped"] {
            assert!(parse(s).is_err(), "{s}");
        }
    }

    #[test]
    fn dangling_preposition_rejected() {
        let e = parse("the dog jumps on").unwrap_err();
        assert!(matches!(e, GrammarError::UnsupportedGrammar { position: 3, .. }), "{e:?}");
        assert!(parse("The boy moves to the house and then to the tree.").is_err());
    }

    #[test]
    fn conditional_with_comma() {
        let t = parse("When boys collide with trees, boys move to houses").unwrap();
        assert_eq!(t.lemma(), "move");
        let c = t.child(Relation::Condition).unwrap();
        assert_eq!(c.lemma(), "collide");
        assert_eq!(c.child(Relation::Advmod).unwrap().lemma(), "when");
    }

    #[test]
    fn conditional_without_comma() {
        let t = parse("When I press the switch I create wind at the wall").unwrap();
        assert_eq!(t.lemma(), "create");
        assert_eq!(t.child(Relation::Subject).unwrap().lemma(), "i");
        assert_eq!(t.child(Relation::Dobj).unwrap().lemma(), "wind");
        let c = t.child(Relation::Condition).unwrap();
        assert_eq!(c.child(Relation::Dobj).unwrap().lemma(), "switch");
    }

    #[test]
    fn ordinal_adjectives_split_clauses() {
        let t = parse("When balls collide with first goals second scores increase").unwrap();
        assert_eq!(t.lemma(), "increase");
        let subj = t.child(Relation::Subject).unwrap();
        assert_eq!(subj.lemma(), "score");
        assert_eq!(subj.child(Relation::Amod).unwrap().lemma(), "second");
    }

    #[test]
    fn sequence_and_conjunction_nesting() {
        let t = parse("The proximity teleports to the boy and then it attaches to him and disappears").unwrap();
        assert_eq!(t.lemma(), "teleport");
        let s = t.child(Relation::Seq).unwrap();
        assert_eq!(s.lemma(), "attach");
        let c = s.child(Relation::Conj).unwrap();
        assert_eq!(c.lemma(), "disappear");
        assert!(c.child(Relation::Subject).is_none());
    }

    #[test]
    fn loop_prefixes() {
        let t = parse("10 times the dog jumps excitedly").unwrap();
        let times = t.children_with(Relation::Advmod).find(|c| c.lemma() == "times").unwrap();
        assert_eq!(times.child(Relation::Nummod).unwrap().token.value, Some(10.0));
        assert!(t.children_with(Relation::Advmod).any(|c| c.lemma() == "excitedly"));

        let t = parse("the dog jumps over and over").unwrap();
        assert_eq!(t.child(Relation::Advmod).unwrap().lemma(), "forever");
        let t = parse("Endlessly the dog jumps").unwrap();
        assert_eq!(t.child(Relation::Advmod).unwrap().lemma(), "forever");

        let t = parse("Every few seconds the frog hops to a lily.").unwrap();
        let time = t.child(Relation::Time).unwrap();
        assert_eq!(time.lemma(), "second");
        assert_eq!(time.child(Relation::Det).unwrap().lemma(), "every");
        assert_eq!(time.child(Relation::Amod).unwrap().lemma(), "few");
    }

    #[test]
    fn duration_and_direction() {
        let t = parse("the square moves up for 11.18 seconds and then jumps").unwrap();
        let up = t.child(Relation::Prep).unwrap();
        assert_eq!(up.lemma(), "up");
        assert!(up.children.is_empty());
        let time = t.child(Relation::Time).unwrap();
        assert_eq!(time.child(Relation::Nummod).unwrap().token.value, Some(11.18));
        assert_eq!(t.child(Relation::Seq).unwrap().lemma(), "jump");
    }

    #[test]
    fn hierarchy_attaches_to_subject() {
        let t = parse("the blades on the windmill rotate").unwrap();
        let subj = t.child(Relation::Subject).unwrap();
        assert_eq!(subj.lemma(), "blade");
        let on = subj.child(Relation::Prep).unwrap();
        assert_eq!(on.child(Relation::Pobj).unwrap().lemma(), "windmill");
    }

    #[test]
    fn copular_forms() {
        let t = parse("This is the first score, goal.").unwrap();
        assert_eq!(t.lemma(), "be");
        assert_eq!(t.child(Relation::Subject).unwrap().token.category, Category::Det);
        assert_eq!(t.children_with(Relation::Dobj).count(), 2);

        let t = parse("The thing is not fast").unwrap();
        let a = t.child(Relation::Amod).unwrap();
        assert_eq!(a.lemma(), "fast");
        assert!(a.child(Relation::Neg).is_some());

        let t = parse("treats become not nearby").unwrap();
        assert_eq!(t.lemma(), "become");
        assert!(t.child(Relation::Amod).unwrap().child(Relation::Neg).is_some());

        let t = parse("this is a boy and this is a ball").unwrap();
        assert_eq!(t.child(Relation::Conj).unwrap().lemma(), "be");
    }

    #[test]
    fn stop_form() {
        let t = parse("The square stops moving").unwrap();
        assert_eq!(t.lemma(), "stop");
        assert_eq!(t.child(Relation::Dobj).unwrap().lemma(), "move");
    }

    #[test]
    fn double_object() {
        let t = parse("the dog gives the boy the ball").unwrap();
        assert_eq!(t.child(Relation::Iobj).unwrap().lemma(), "boy");
        assert_eq!(t.child(Relation::Dobj).unwrap().lemma(), "ball");
    }

    #[test]
    fn unknown_verbs_parse() {
        let t = parse("When lights flicker, forever lights disappear for 0.1 seconds and then lights appear for 0.1 seconds").unwrap();
        assert_eq!(t.lemma(), "disappear");
        assert_eq!(t.child(Relation::Condition).unwrap().lemma(), "flicker");
        assert_eq!(t.child(Relation::Seq).unwrap().lemma(), "appear");
    }

    #[test]
    fn number_literal_objects() {
        let t = parse("when the score exceeds 3, the dog jumps").unwrap();
        let c = t.child(Relation::Condition).unwrap();
        assert_eq!(c.child(Relation::Dobj).unwrap().token.value, Some(3.0));
    }

    #[test]
    fn listing_three_shape() {
        let t = parse("Forever the person throws the ball into the pond and then the dog gives the ball to her.").unwrap();
        assert_eq!(t.lemma(), "throw");
        let give = t.child(Relation::Seq).unwrap();
        assert_eq!(give.child(Relation::Prep).unwrap().child(Relation::Pobj).unwrap().lemma(), "her");
    }

    #[test]
    fn deterministic() {
        let s = "When the ball collides with the water, water moves up for 0.2 seconds and then water moves down for 0.2 seconds";
        assert_eq!(dump(s), dump(s));
    }
}
