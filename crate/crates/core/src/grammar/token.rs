use serde::{Deserialize, Serialize};

use crate::lexicon::Lexicon;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Category {
    Noun,
    Verb,
    Adj,
    Adv,
    Det,
    Prep,
    Num,
    Pron,
    ConjAnd,
    ConjThen,
    WhenMarker,
    Neg,
    TimeUnit,
    Punct,
    Unknown,
}

impl Category {
    pub fn as_str(self) -> &'static str {
        match self {
            Category::Noun => "NOUN",
            Category::Verb => "VERB",
            Category::Adj => "ADJ",
            Category::Adv => "ADV",
            Category::Det => "DET",
            Category::Prep => "PREP",
            Category::Num => "NUM",
            Category::Pron => "PRON",
            Category::ConjAnd => "CONJ_AND",
            Category::ConjThen => "CONJ_THEN",
            Category::WhenMarker => "WHEN_MARKER",
            Category::Neg => "NEG",
            Category::TimeUnit => "TIME_UNIT",
            Category::Punct => "PUNCT",
            Category::Unknown => "UNKNOWN",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Token {
    pub text: String,
    pub lemma: String,
    pub index: usize,
    pub category: Category,
    /// Numeric value for NUM tokens.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
}

impl Token {
    /// A token that does not come from the input, e.g. the implied "the" of a vocative.
    pub fn synthetic(text: &str, lemma: &str, index: usize, category: Category) -> Self {
        Token {
            text: text.to_string(),
            lemma: lemma.to_string(),
            index,
            category,
            value: None,
        }
    }

    pub fn is_punct(&self, c: &str) -> bool {
        self.category == Category::Punct && self.text == c
    }

    /// Sentence-final punctuation.
    pub fn is_terminator(&self) -> bool {
        self.category == Category::Punct && matches!(self.text.as_str(), "." | "?" | "!")
    }
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

/// Splits text into tokens. Never fails: unrecognized words become UNKNOWN.
pub fn tokenize(lex: &Lexicon, text: &str) -> Vec<Token> {
    let chars: Vec<char> = text.chars().collect();
    let mut raw: Vec<String> = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            if i + 1 < chars.len() && chars[i] == '.' && chars[i + 1].is_ascii_digit() {
                i += 1;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
            }
            raw.push(chars[start..i].iter().collect());
        } else if is_word_char(c) {
            let start = i;
            while i < chars.len()
                && (is_word_char(chars[i])
                    || ((chars[i] == '\'' || chars[i] == '-')
                        && i + 1 < chars.len()
                        && chars[i + 1].is_alphabetic()))
            {
                i += 1;
            }
            raw.push(chars[start..i].iter().collect());
        } else {
            raw.push(c.to_string());
            i += 1;
        }
    }

    let mut out: Vec<Token> = Vec::with_capacity(raw.len());
    for (index, text) in raw.into_iter().enumerate() {
        let prev = out.last().map(|t| t.category);
        out.push(classify(lex, text, index, prev));
    }
    out
}

fn classify(lex: &Lexicon, text: String, index: usize, prev: Option<Category>) -> Token {
    let w = text.to_lowercase();
    let tok = |lemma: &str, category| Token {
        text: text.clone(),
        lemma: lemma.to_string(),
        index,
        category,
        value: None,
    };
    let first = w.chars().next().unwrap_or(' ');
    if first.is_ascii_digit() {
        let value = w.parse::<f64>().ok();
        return Token {
            value,
            ..tok(&w, Category::Num)
        };
    }
    if !is_word_char(first) {
        return tok(&w, Category::Punct);
    }
    match w.as_str() {
        "and" => return tok(&w, Category::ConjAnd),
        "then" => return tok(&w, Category::ConjThen),
        "when" | "as" | "after" | "whenever" => {
            let lemma = if w == "whenever" { "when" } else { &w };
            return tok(lemma, Category::WhenMarker);
        }
        "not" | "don't" | "doesn't" => return tok("not", Category::Neg),
        "will" => return tok("will", Category::Verb),
        _ => {}
    }
    if lex.is_determiner(&w) {
        return tok(&w, Category::Det);
    }
    if lex.is_pronoun(&w) {
        return tok(&w, Category::Pron);
    }
    if let Some(v) = lex.number_word(&w) {
        return Token {
            value: Some(v),
            ..tok(&w, Category::Num)
        };
    }
    if let Some((unit, _)) = lex.time_unit(&w) {
        let unit = unit.to_string();
        return tok(&unit, Category::TimeUnit);
    }
    if lex.is_preposition(&w) {
        return tok(&w, Category::Prep);
    }
    if lex.loop_word(&w).is_some() || lex.is_intensifier(&w) {
        return tok(&w, Category::Adv);
    }
    if lex.adverb(&w).is_some() && !lex.is_adjective(&w) {
        return tok(&w, Category::Adv);
    }
    if lex.is_adjective(&w) {
        return tok(&w, Category::Adj);
    }
    let verb = lex.verb_lemma(&w);
    let noun = lex.known_noun_form(&w);
    match (verb, noun) {
        (Some(v), true) => {
            let nominal = matches!(
                prev,
                Some(Category::Det | Category::Adj | Category::Num | Category::Prep)
            );
            if nominal {
                let (lemma, _) = lex.noun_lemma(&w);
                tok(&lemma, Category::Noun)
            } else {
                tok(&v, Category::Verb)
            }
        }
        (Some(v), false) => tok(&v, Category::Verb),
        (None, true) => {
            let (lemma, _) = lex.noun_lemma(&w);
            tok(&lemma, Category::Noun)
        }
        (None, false) => tok(&w, Category::Unknown),
    }
}

/// Splits a token stream on '.', '?' and '!'. The terminator stays with its sentence.
pub fn split_sentences(tokens: &[Token]) -> Vec<Vec<Token>> {
    let mut out = Vec::new();
    let mut current = Vec::new();
    for t in tokens {
        current.push(t.clone());
        if t.is_terminator() {
            out.push(std::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        out.push(current);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cats(text: &str) -> Vec<(String, Category)> {
        tokenize(&Lexicon::default(), text)
            .into_iter()
            .map(|t| (t.lemma, t.category))
            .collect()
    }

    #[test]
    fn frog_sentence() {
        use Category::*;
        let got = cats("The frog hops to a lily.");
        let want = [
            ("the", Det),
            ("frog", Noun),
            ("hop", Verb),
            ("to", Prep),
            ("a", Det),
            ("lily", Noun),
            (".", Punct),
        ];
        assert_eq!(got.len(), want.len());
        for (g, w) in got.iter().zip(want) {
            assert_eq!((g.0.as_str(), g.1), w);
        }
    }

    #[test]
    fn empty_input() {
        assert!(tokenize(&Lexicon::default(), "").is_empty());
        assert!(tokenize(&Lexicon::default(), "   \n").is_empty());
    }

    #[test]
    fn decimals_are_single_numbers() {
        let toks = tokenize(
            &Lexicon::default(),
            "the square moves up for 11.18 seconds",
        );
        let num: Vec<_> = toks.iter().filter(|t| t.category == Category::Num).collect();
        assert_eq!(num.len(), 1);
        assert_eq!(num[0].text, "11.18");
        assert_eq!(num[0].value, Some(11.18));
        assert_eq!(toks.last().unwrap().lemma, "second");
        assert_eq!(toks.last().unwrap().category, Category::TimeUnit);
    }

    #[test]
    fn trailing_period_after_number_is_punct() {
        let toks = tokenize(&Lexicon::default(), "it equals 3.");
        assert_eq!(toks[2].text, "3");
        assert!(toks[3].is_terminator());
    }

    #[test]
    fn unknown_words_keep_lowercase_lemma() {
        let toks = tokenize(&Lexicon::default(), "Lights Flicker");
        assert_eq!(toks[0].category, Category::Noun);
        assert_eq!(toks[0].lemma, "light");
        assert_eq!(toks[1].category, Category::Unknown);
        assert_eq!(toks[1].lemma, "flicker");
    }

    #[test]
    fn markers_and_negation() {
        use Category::*;
        let got = cats("after it is not fast then");
        let c: Vec<_> = got.iter().map(|g| g.1).collect();
        assert_eq!(c, vec![WhenMarker, Pron, Verb, Neg, Adj, ConjThen]);
        assert_eq!(got[2].0, "be");
    }

    #[test]
    fn sentences_split_outside_decimals() {
        let lex = Lexicon::default();
        let toks = tokenize(&lex, "The dog jumped. She moves for 1.5 seconds! ok");
        let s = split_sentences(&toks);
        assert_eq!(s.len(), 3);
        assert_eq!(s[1].len(), 6);
    }

    proptest! {
        #[test]
        fn indices_are_contiguous(text in "[a-zA-Z0-9 .,!?']{0,60}") {
            let toks = tokenize(&Lexicon::default(), &text);
            for (i, t) in toks.iter().enumerate() {
                prop_assert_eq!(t.index, i);
            }
        }

        #[test]
        fn respacing_round_trips(text in "[a-zA-Z0-9 .,!?'-]{0,60}") {
            let lex = Lexicon::default();
            let toks = tokenize(&lex, &text);
            let joined = toks.iter().map(|t| t.text.as_str()).collect::<Vec<_>>().join(" ");
            prop_assert_eq!(tokenize(&lex, &joined), toks);
        }
    }
}
