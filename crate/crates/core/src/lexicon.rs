//! Word tables, lemmatization rules and numeric tuning for the closed grammar.
//!
//! The lexicon ships as a versioned JSON document embedded in the binary.
//! `ENGINE_LEXICON` points at a replacement file when set.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::grammar::GrammarError;

const DEFAULT_LEXICON: &str = include_str!("../data/lexicon.json");

/// Environment variable naming an alternative lexicon file.
pub const LEXICON_ENV: &str = "ENGINE_LEXICON";

#[derive(Debug, thiserror::Error)]
pub enum LexiconError {
    #[error("cannot read lexicon {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("malformed lexicon: {0}")]
    Json(#[from] serde_json::Error),
}

/// Per-adjective effect on motion and magnitude.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdjectiveEffect {
    #[serde(default = "one")]
    pub speed: f64,
    #[serde(default = "one")]
    pub magnitude: f64,
}

fn one() -> f64 {
    1.0
}

/// Numeric table used by the verb library.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tuning {
    /// px/s
    pub base_speed: f64,
    /// rad/s
    pub base_angular_speed: f64,
    /// px
    pub jump_height: f64,
    /// s
    pub jump_duration: f64,
    pub hop_height_factor: f64,
    /// Interval used for "every few seconds".
    pub few_seconds: f64,
    /// Step applied by increase/decrease on number entities.
    pub number_step: f64,
    pub adjectives: BTreeMap<String, AdjectiveEffect>,
    pub intensifiers: BTreeMap<String, f64>,
}

impl Tuning {
    /// Effect of one adjective after applying its intensifier chain.
    ///
    /// Intensifiers scale the distance from neutral: an amplifying factor is
    /// multiplied by the chain product, a damping factor is divided by it, so
    /// "very slow" is slower than "slow" and "very fast" faster than "fast".
    pub fn adjective_effect(&self, adjective: &str, intensifiers: &[String]) -> AdjectiveEffect {
        let Some(base) = self.adjectives.get(adjective) else {
            return AdjectiveEffect {
                speed: 1.0,
                magnitude: 1.0,
            };
        };
        let chain: f64 = intensifiers
            .iter()
            .map(|w| self.intensifiers.get(w).copied().unwrap_or(1.0))
            .product();
        AdjectiveEffect {
            speed: intensify(base.speed, chain),
            magnitude: intensify(base.magnitude, chain),
        }
    }
}

fn intensify(factor: f64, chain: f64) -> f64 {
    if factor == 1.0 || chain == 1.0 {
        factor
    } else if factor > 1.0 {
        factor * chain
    } else {
        factor / chain
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct LexiconFile {
    version: String,
    nouns: Vec<String>,
    animate_nouns: Vec<String>,
    verbs: BTreeMap<String, Vec<String>>,
    adjectives: Vec<String>,
    adverbs: BTreeMap<String, String>,
    intensifiers: Vec<String>,
    determiners: Vec<String>,
    deictics: Vec<String>,
    prepositions: Vec<String>,
    directions: Vec<String>,
    pronouns: Vec<String>,
    time_units: BTreeMap<String, f64>,
    number_words: BTreeMap<String, f64>,
    irregular_verbs: BTreeMap<String, String>,
    irregular_participles: Vec<String>,
    irregular_plurals: BTreeMap<String, String>,
    loop_words: BTreeMap<String, String>,
    synonyms: BTreeMap<String, Vec<String>>,
    modulation: Tuning,
}

/// Closed-class word lists plus open-class seeds for nouns and verbs.
#[derive(Debug, Clone)]
pub struct Lexicon {
    pub version: String,
    nouns: BTreeSet<String>,
    animate: BTreeSet<String>,
    verbs: BTreeMap<String, Vec<String>>,
    adjectives: BTreeSet<String>,
    adverbs: BTreeMap<String, String>,
    intensifiers: BTreeSet<String>,
    determiners: BTreeSet<String>,
    deictics: BTreeSet<String>,
    prepositions: BTreeSet<String>,
    directions: BTreeSet<String>,
    pronouns: BTreeSet<String>,
    time_units: BTreeMap<String, f64>,
    number_words: BTreeMap<String, f64>,
    irregular_verbs: BTreeMap<String, String>,
    participles: BTreeSet<String>,
    irregular_plurals: BTreeMap<String, String>,
    loop_words: BTreeMap<String, String>,
    synonyms: BTreeMap<String, Vec<String>>,
    pub tuning: Tuning,
}

impl Default for Lexicon {
    fn default() -> Self {
        Lexicon::from_json(DEFAULT_LEXICON).expect("embedded lexicon is valid")
    }
}

fn lower_set(items: Vec<String>) -> BTreeSet<String> {
    items.into_iter().map(|s| s.to_lowercase()).collect()
}

impl Lexicon {
    pub fn from_json(text: &str) -> Result<Self, LexiconError> {
        let file: LexiconFile = serde_json::from_str(text)?;
        Ok(Lexicon {
            version: file.version,
            nouns: lower_set(file.nouns),
            animate: lower_set(file.animate_nouns),
            verbs: file.verbs,
            adjectives: lower_set(file.adjectives),
            adverbs: file.adverbs,
            intensifiers: lower_set(file.intensifiers),
            determiners: lower_set(file.determiners),
            deictics: lower_set(file.deictics),
            prepositions: lower_set(file.prepositions),
            directions: lower_set(file.directions),
            pronouns: lower_set(file.pronouns),
            time_units: file.time_units,
            number_words: file.number_words,
            irregular_verbs: file.irregular_verbs,
            participles: lower_set(file.irregular_participles),
            irregular_plurals: file.irregular_plurals,
            loop_words: file.loop_words,
            synonyms: file.synonyms,
            tuning: file.modulation,
        })
    }

    pub fn from_path(path: &Path) -> Result<Self, LexiconError> {
        let text = std::fs::read_to_string(path).map_err(|source| LexiconError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Lexicon::from_json(&text)
    }

    /// Loads the file named by `ENGINE_LEXICON`, or the embedded default.
    pub fn from_env() -> Result<Self, LexiconError> {
        match std::env::var_os(LEXICON_ENV) {
            Some(path) => Lexicon::from_path(Path::new(&path)),
            None => Ok(Lexicon::default()),
        }
    }

    /// Copy of this lexicon with a verb removed; used to exercise substitution.
    pub fn without_verb(&self, lemma: &str) -> Self {
        let mut out = self.clone();
        out.verbs.remove(lemma);
        out
    }

    pub fn with_verb(&self, lemma: &str) -> Self {
        let mut out = self.clone();
        out.verbs.entry(lemma.to_string()).or_default();
        out
    }

    pub fn verbs(&self) -> impl Iterator<Item = &str> {
        self.verbs.keys().map(String::as_str)
    }

    pub fn is_verb(&self, lemma: &str) -> bool {
        self.verbs.contains_key(lemma)
    }

    pub fn verb_prepositions(&self, lemma: &str) -> &[String] {
        self.verbs.get(lemma).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn is_noun(&self, lemma: &str) -> bool {
        self.nouns.contains(lemma)
    }

    pub fn is_animate(&self, lemma: &str) -> bool {
        self.animate.contains(lemma)
    }

    pub fn is_adjective(&self, word: &str) -> bool {
        self.adjectives.contains(word)
    }

    /// Adjective form of an adverb ("excitedly" -> "excited").
    pub fn adverb(&self, word: &str) -> Option<&str> {
        self.adverbs.get(word).map(String::as_str)
    }

    pub fn is_intensifier(&self, word: &str) -> bool {
        self.intensifiers.contains(word)
    }

    pub fn is_determiner(&self, word: &str) -> bool {
        self.determiners.contains(word)
    }

    pub fn is_deictic(&self, word: &str) -> bool {
        self.deictics.contains(word)
    }

    pub fn is_preposition(&self, word: &str) -> bool {
        self.prepositions.contains(word)
    }

    pub fn is_direction(&self, word: &str) -> bool {
        self.directions.contains(word)
    }

    pub fn is_pronoun(&self, word: &str) -> bool {
        self.pronouns.contains(word)
    }

    pub fn loop_word(&self, word: &str) -> Option<&str> {
        self.loop_words.get(word).map(String::as_str)
    }

    pub fn number_word(&self, word: &str) -> Option<f64> {
        self.number_words.get(word).copied()
    }

    pub fn is_participle(&self, word: &str) -> bool {
        self.participles.contains(word)
    }

    /// Singular unit lemma and its length in seconds.
    pub fn time_unit(&self, word: &str) -> Option<(&str, f64)> {
        if let Some((k, v)) = self.time_units.get_key_value(word) {
            return Some((k.as_str(), *v));
        }
        let singular = word.strip_suffix('s')?;
        self.time_units
            .get_key_value(singular)
            .map(|(k, v)| (k.as_str(), *v))
    }

    /// Base form of an inflected verb if the base is in the lexicon.
    pub fn verb_lemma(&self, word: &str) -> Option<String> {
        if let Some(base) = self.irregular_verbs.get(word) {
            return Some(base.clone());
        }
        verb_candidates(word)
            .into_iter()
            .find(|c| self.verbs.contains_key(c))
    }

    /// Best-effort base form for a verb not in the lexicon.
    pub fn guess_verb_lemma(&self, word: &str) -> String {
        self.verb_lemma(word).unwrap_or_else(|| heuristic_verb_lemma(word))
    }

    /// Singular lemma and plurality. Unknown words fall back to suffix rules.
    pub fn noun_lemma(&self, word: &str) -> (String, bool) {
        if let Some(base) = self.irregular_plurals.get(word) {
            return (base.clone(), true);
        }
        if self.nouns.contains(word) {
            return (word.to_string(), false);
        }
        for cand in plural_candidates(word) {
            if self.nouns.contains(&cand) {
                return (cand, true);
            }
        }
        heuristic_singular(word)
    }

    /// Whether `word` looks like some inflection of a known noun.
    pub fn known_noun_form(&self, word: &str) -> bool {
        self.irregular_plurals.contains_key(word)
            || self.nouns.contains(word)
            || plural_candidates(word).iter().any(|c| self.nouns.contains(c))
    }

    /// Known verbs that may stand in for an unknown one, best first.
    pub fn suggest_verbs(&self, unknown: &str) -> Result<Vec<String>, GrammarError> {
        if self.is_verb(unknown) {
            return Err(GrammarError::KnownVerb(unknown.to_string()));
        }
        Ok(self
            .synonyms
            .get(unknown)
            .map(|list| {
                list.iter()
                    .filter(|v| self.is_verb(v))
                    .take(5)
                    .cloned()
                    .collect()
            })
            .unwrap_or_default())
    }

    pub fn synonym_keys(&self) -> impl Iterator<Item = &str> {
        self.synonyms.keys().map(String::as_str)
    }
}

fn verb_candidates(word: &str) -> Vec<String> {
    let mut out = vec![word.to_string()];
    if let Some(s) = word.strip_suffix('s') {
        out.push(s.to_string());
    }
    if let Some(s) = word.strip_suffix("es") {
        out.push(s.to_string());
    }
    if let Some(s) = word.strip_suffix("ies") {
        out.push(format!("{s}y"));
    }
    if let Some(s) = word.strip_suffix("ied") {
        out.push(format!("{s}y"));
    }
    if let Some(s) = word.strip_suffix('d') {
        out.push(s.to_string());
    }
    if let Some(s) = word.strip_suffix("ed") {
        out.push(s.to_string());
        if let Some(u) = undouble(s) {
            out.push(u);
        }
    }
    if let Some(s) = word.strip_suffix("ing") {
        out.push(s.to_string());
        out.push(format!("{s}e"));
        if let Some(u) = undouble(s) {
            out.push(u);
        }
    }
    out
}

fn undouble(stem: &str) -> Option<String> {
    let b = stem.as_bytes();
    let n = b.len();
    (n >= 2 && b[n - 1] == b[n - 2] && !b"aeiou".contains(&b[n - 1]))
        .then(|| stem[..n - 1].to_string())
}

fn heuristic_verb_lemma(word: &str) -> String {
    if let Some(s) = word.strip_suffix("ing").filter(|s| s.len() >= 2) {
        return undouble(s).unwrap_or_else(|| s.to_string());
    }
    if let Some(s) = word.strip_suffix("ied").filter(|s| s.len() >= 2) {
        return format!("{s}y");
    }
    if let Some(s) = word.strip_suffix("ed").filter(|s| s.len() >= 2) {
        return undouble(s).unwrap_or_else(|| s.to_string());
    }
    if let Some(s) = word.strip_suffix("ies").filter(|s| s.len() >= 2) {
        return format!("{s}y");
    }
    for suffix in ["sses", "shes", "ches", "xes", "zes"] {
        if word.ends_with(suffix) {
            return word[..word.len() - 2].to_string();
        }
    }
    if word.ends_with("ss") {
        return word.to_string();
    }
    match word.strip_suffix('s') {
        Some(s) if s.len() >= 2 => s.to_string(),
        _ => word.to_string(),
    }
}

fn plural_candidates(word: &str) -> Vec<String> {
    let mut out = Vec::new();
    if let Some(s) = word.strip_suffix("ies") {
        out.push(format!("{s}y"));
    }
    if let Some(s) = word.strip_suffix("es") {
        out.push(s.to_string());
    }
    if let Some(s) = word.strip_suffix('s') {
        out.push(s.to_string());
    }
    out
}

fn heuristic_singular(word: &str) -> (String, bool) {
    if word.len() > 4 {
        if let Some(s) = word.strip_suffix("ies") {
            return (format!("{s}y"), true);
        }
    }
    for suffix in ["sses", "shes", "ches", "xes", "zes"] {
        if word.ends_with(suffix) {
            return (word[..word.len() - 2].to_string(), true);
        }
    }
    if word.len() > 2
        && word.ends_with('s')
        && !word.ends_with("ss")
        && !word.ends_with("us")
        && !word.ends_with("is")
    {
        return (word[..word.len() - 1].to_string(), true);
    }
    (word.to_string(), false)
}
