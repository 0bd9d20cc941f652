//! Frequency-pruned token vocabulary for the classifier.

use std::collections::{BTreeMap, HashMap};

use crate::corpus::Corpus;
use crate::error::{Error, Result};

/// Id for out-of-vocabulary tokens. It has no embedding row; it only takes
/// part in n-gram hashing so that n-grams over unknown words stay
/// deterministic.
pub const UNK_ID: u32 = u32::MAX;

/// Token -> dense id map with per-token frequencies.
///
/// Ids are assigned by (frequency descending, token lexicographic), which
/// makes vocabulary construction deterministic.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    pub(crate) tokens: Vec<String>,
    pub(crate) freqs: Vec<u64>,
    pub(crate) ids: HashMap<String, u32>,
    pub(crate) min_count: u64,
}

impl Vocabulary {
    /// Builds the vocabulary, dropping tokens seen fewer than `min_count`
    /// times.
    pub fn build(corpus: &Corpus, min_count: u64) -> Result<Self> {
        let mut counts: BTreeMap<&str, u64> = BTreeMap::new();
        for doc in corpus.documents() {
            for token in doc.tokens.iter() {
                *counts.entry(token).or_insert(0) += 1;
            }
        }
        let mut kept: Vec<(&str, u64)> = counts
            .into_iter()
            .filter(|(_, c)| *c >= min_count)
            .collect();
        if kept.is_empty() {
            return Err(Error::Data(format!(
                "vocabulary is empty after pruning at min_count {min_count}"
            )));
        }
        kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));

        let tokens: Vec<String> = kept.iter().map(|(t, _)| t.to_string()).collect();
        let freqs: Vec<u64> = kept.iter().map(|(_, c)| *c).collect();
        let ids = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();
        Ok(Vocabulary {
            tokens,
            freqs,
            ids,
            min_count,
        })
    }

    pub(crate) fn from_parts(tokens: Vec<String>, freqs: Vec<u64>, min_count: u64) -> Self {
        let ids = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();
        Vocabulary {
            tokens,
            freqs,
            ids,
            min_count,
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn min_count(&self) -> u64 {
        self.min_count
    }

    pub fn id(&self, token: &str) -> Option<u32> {
        self.ids.get(token).copied()
    }

    /// In-vocabulary id, or [`UNK_ID`] for unknown tokens.
    pub fn id_or_unk(&self, token: &str) -> u32 {
        self.id(token).unwrap_or(UNK_ID)
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    pub fn freq(&self, id: u32) -> Option<u64> {
        self.freqs.get(id as usize).copied()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::tests::toy_corpus;

    #[test]
    fn ids_ordered_by_freq_then_token() {
        // a:5, b:2, c:1
        let corpus = toy_corpus(&[("a a a b", 0), ("a a b c", 1)], 2);
        let vocab = Vocabulary::build(&corpus, 2).unwrap();
        assert_eq!(vocab.len(), 2);
        assert_eq!(vocab.id("a"), Some(0));
        assert_eq!(vocab.id("b"), Some(1));
        assert_eq!(vocab.id("c"), None);
        assert_eq!(vocab.id_or_unk("c"), UNK_ID);
        assert_eq!(vocab.freq(0), Some(5));
    }

    #[test]
    fn min_count_one_keeps_everything() {
        let corpus = toy_corpus(&[("a b c", 0), ("d", 1)], 2);
        let vocab = Vocabulary::build(&corpus, 1).unwrap();
        assert_eq!(vocab.len(), 4);
    }

    #[test]
    fn all_pruned_is_an_error() {
        let corpus = toy_corpus(&[("a b", 0), ("c d", 1)], 2);
        assert!(Vocabulary::build(&corpus, 10).is_err());
    }

    #[test]
    fn equal_freq_ties_break_lexicographically() {
        let corpus = toy_corpus(&[("zz aa", 0), ("zz aa", 1)], 2);
        let vocab = Vocabulary::build(&corpus, 1).unwrap();
        assert_eq!(vocab.id("aa"), Some(0));
        assert_eq!(vocab.id("zz"), Some(1));
    }
}
