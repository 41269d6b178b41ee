//! Tokenization and the keyword vocabulary.

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::model::TermId;

/// Lowercases, splits on non-alphanumerics, drops tokens shorter than
/// `min_len` and any token on the stoplist.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tokenizer {
    pub min_len: usize,
    pub stoplist: BTreeSet<String>,
}

impl Default for Tokenizer {
    fn default() -> Self {
        Self { min_len: 2, stoplist: BTreeSet::new() }
    }
}

impl Tokenizer {
    pub fn with_stoplist<I, S>(words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        Self { stoplist: words.into_iter().map(|w| w.as_ref().to_lowercase()).collect(), ..Self::default() }
    }

    pub fn tokens<'a>(&'a self, text: &'a str) -> impl Iterator<Item = String> + 'a {
        text.split(|c: char| !c.is_alphanumeric())
            .filter(|tok| tok.chars().count() >= self.min_len)
            .map(str::to_lowercase)
            .filter(|tok| !self.stoplist.contains(tok))
    }
}

/// Keyword strings to dense ids, in first-seen order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocabulary {
    words: Vec<String>,
    #[serde(skip)]
    ids: HashMap<String, TermId>,
}

impl Vocabulary {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_words(words: Vec<String>) -> Self {
        let ids = words.iter().enumerate().map(|(i, w)| (w.clone(), TermId(i as u32))).collect();
        Self { words, ids }
    }

    pub fn intern(&mut self, word: &str) -> TermId {
        if let Some(&id) = self.ids.get(word) {
            return id;
        }
        let id = TermId(self.words.len() as u32);
        self.words.push(word.to_owned());
        self.ids.insert(word.to_owned(), id);
        id
    }

    pub fn get(&self, word: &str) -> Option<TermId> {
        self.ids.get(word).copied()
    }

    pub fn word(&self, id: TermId) -> Option<&str> {
        self.words.get(id.0 as usize).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    /// Rebuilds the lookup table after deserialization.
    pub(crate) fn reindex(&mut self) {
        self.ids = self.words.iter().enumerate().map(|(i, w)| (w.clone(), TermId(i as u32))).collect();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tokenizer_rules() {
        let tok = Tokenizer::with_stoplist(["the"]);
        let got: Vec<String> = tok.tokens("The QUICK-brown fox, a #rust_lang 42!").collect();
        assert_eq!(got, vec!["quick", "brown", "fox", "rust", "lang", "42"]);
    }

    #[test]
    fn vocabulary_first_seen_order() {
        let mut v = Vocabulary::new();
        assert_eq!(v.intern("b"), TermId(0));
        assert_eq!(v.intern("a"), TermId(1));
        assert_eq!(v.intern("b"), TermId(0));
        assert_eq!(v.word(TermId(1)), Some("a"));
        assert_eq!(v.get("zz"), None);
        let mut round: Vocabulary = serde_json::from_str(&serde_json::to_string(&v).unwrap()).unwrap();
        round.reindex();
        assert_eq!(round.get("a"), Some(TermId(1)));
    }
}
