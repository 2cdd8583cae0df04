use serde::{Deserialize, Serialize};

pub type WordId = u64;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error, Serialize, Deserialize)]
#[error("word range {first}..={last} is not in the transcript")]
pub struct RangeError {
    pub first: WordId,
    pub last: WordId,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Word {
    pub id: WordId,
    pub text: String,
    pub selected: bool,
    /// Utterance the word came from.
    pub segment: u64,
}

/// Finalized speech as a list of words with stable ids. Each new utterance
/// becomes the selection.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transcript {
    words: Vec<Word>,
    next_id: WordId,
    next_segment: u64,
}

impl Transcript {
    pub fn words(&self) -> &[Word] {
        &self.words
    }

    pub fn word(&self, id: WordId) -> Option<&Word> {
        self.words.iter().find(|w| w.id == id)
    }

    fn fresh(&mut self, text: &str, segment: u64) -> Vec<Word> {
        text.split_whitespace()
            .map(|t| {
                self.next_id += 1;
                Word {
                    id: self.next_id,
                    text: t.to_string(),
                    selected: true,
                    segment,
                }
            })
            .collect()
    }

    pub fn append_speech(&mut self, text: &str) -> Vec<WordId> {
        let segment = self.next_segment;
        self.next_segment += 1;
        let new = self.fresh(text, segment);
        if !new.is_empty() {
            for w in &mut self.words {
                w.selected = false;
            }
        }
        let ids = new.iter().map(|w| w.id).collect();
        self.words.extend(new);
        ids
    }

    fn span(&self, first: WordId, last: WordId) -> Result<(usize, usize), RangeError> {
        let pos = |id| self.words.iter().position(|w| w.id == id);
        match (pos(first), pos(last)) {
            (Some(a), Some(b)) if a <= b => Ok((a, b)),
            _ => Err(RangeError { first, last }),
        }
    }

    /// Replaces the words `first..=last` with typed text.
    pub fn edit_text(&mut self, first: WordId, last: WordId, replacement: &str) -> Result<Vec<WordId>, RangeError> {
        let (a, b) = self.span(first, last)?;
        let segment = self.words[a].segment;
        let new = self.fresh(replacement, segment);
        let ids = new.iter().map(|w| w.id).collect();
        self.words.splice(a..=b, new);
        Ok(ids)
    }

    pub fn select_words(&mut self, first: WordId, last: WordId, on: bool) -> Result<(), RangeError> {
        let (a, b) = self.span(first, last)?;
        for w in &mut self.words[a..=b] {
            w.selected = on;
        }
        Ok(())
    }

    pub fn selected(&self) -> Vec<&Word> {
        self.words.iter().filter(|w| w.selected).collect()
    }

    pub fn selected_text(&self) -> String {
        self.selected().iter().map(|w| w.text.as_str()).collect::<Vec<_>>().join(" ")
    }

    pub fn discard(&mut self) {
        self.words.clear();
    }
}
