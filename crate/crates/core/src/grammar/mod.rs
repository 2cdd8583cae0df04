//! Tokenizer and recursive-descent parser for the closed command grammar.

mod parse;
mod token;

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

pub use parse::{parse_sentence, parse_text};
pub use token::{split_sentences, tokenize, Category, Token};

#[derive(Debug, Clone, PartialEq, thiserror::Error, Serialize, Deserialize)]
pub enum GrammarError {
    #[error("unsupported grammar at token {position}: {reason}")]
    UnsupportedGrammar { position: usize, reason: String },
    #[error("'{0}' is already a known verb")]
    KnownVerb(String),
}

impl GrammarError {
    pub(crate) fn unsupported(position: usize, reason: impl Into<String>) -> Self {
        GrammarError::UnsupportedGrammar {
            position,
            reason: reason.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Relation {
    Root,
    Subject,
    Dobj,
    Iobj,
    Pobj,
    Prep,
    Advmod,
    Amod,
    Nummod,
    Det,
    Neg,
    Conj,
    Seq,
    Condition,
    Time,
}

impl Relation {
    pub fn as_str(self) -> &'static str {
        match self {
            Relation::Root => "ROOT",
            Relation::Subject => "SUBJECT",
            Relation::Dobj => "DOBJ",
            Relation::Iobj => "IOBJ",
            Relation::Pobj => "POBJ",
            Relation::Prep => "PREP",
            Relation::Advmod => "ADVMOD",
            Relation::Amod => "AMOD",
            Relation::Nummod => "NUMMOD",
            Relation::Det => "DET",
            Relation::Neg => "NEG",
            Relation::Conj => "CONJ",
            Relation::Seq => "SEQ",
            Relation::Condition => "CONDITION",
            Relation::Time => "TIME",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParseNode {
    pub token: Token,
    pub relation: Relation,
    pub children: Vec<ParseNode>,
}

impl ParseNode {
    pub fn new(token: Token, relation: Relation) -> Self {
        ParseNode {
            token,
            relation,
            children: Vec::new(),
        }
    }

    pub fn with(mut self, child: ParseNode) -> Self {
        self.children.push(child);
        self
    }

    pub fn lemma(&self) -> &str {
        &self.token.lemma
    }

    pub fn child(&self, rel: Relation) -> Option<&ParseNode> {
        self.children.iter().find(|c| c.relation == rel)
    }

    pub fn children_with(&self, rel: Relation) -> impl Iterator<Item = &ParseNode> {
        self.children.iter().filter(move |c| c.relation == rel)
    }

    /// Equality on relations, lemmas, categories and values; ignores surface text
    /// and token positions.
    pub fn same_shape(&self, other: &ParseNode) -> bool {
        self.relation == other.relation
            && self.token.lemma == other.token.lemma
            && self.token.category == other.token.category
            && self.token.value == other.token.value
            && self.children.len() == other.children.len()
            && self
                .children
                .iter()
                .zip(&other.children)
                .all(|(a, b)| a.same_shape(b))
    }

    /// Stable indented rendering: `RELATION lemma CATEGORY [value]`, two spaces per level.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        self.dump_into(&mut out, 0);
        out
    }

    fn dump_into(&self, out: &mut String, depth: usize) {
        let _ = write!(
            out,
            "{}{} {} {}",
            "  ".repeat(depth),
            self.relation.as_str(),
            self.token.lemma,
            self.token.category.as_str()
        );
        if let Some(v) = self.token.value {
            let _ = write!(out, " {v}");
        }
        out.push('\n');
        for c in &self.children {
            c.dump_into(out, depth + 1);
        }
    }
}
