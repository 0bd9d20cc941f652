//! Add-k smoothed n-gram language models.
//!
//! A model of order `n` stores context -> (word -> count) tables for every
//! order `1..=n`; scoring uses the order-`n` table. Sentences are padded
//! with `n-1` begin markers and one end marker, so probabilities are
//! bit-reproducible. Tokens below the training `min_count` map to a reserved
//! UNK type, as does every out-of-vocabulary token at scoring time.
//!
//! The conditional distribution is `P(w|h) = (count(h,w) + k) /
//! (count(h) + k * |A|)` where the prediction alphabet `A` is the word
//! vocabulary plus UNK and the end marker (the begin marker is never
//! predicted). For `k > 0` every conditional distribution normalizes to 1
//! over `A`; for `k = 0` an unseen event is reported as an explicit
//! zero-probability error rather than negative infinity.

use std::collections::{BTreeMap, HashMap};

use crate::corpus::{Corpus, TokenSequence};
use crate::error::{Error, Result};

/// Token id within a model's private vocabulary.
pub type LmTokenId = u32;

pub const UNK: LmTokenId = 0;
pub const EOS: LmTokenId = 1;
pub const BOS: LmTokenId = 2;
const FIRST_WORD_ID: LmTokenId = 3;

/// Orders above this are rejected: sparse corpora cannot support them.
pub const MAX_ORDER: usize = 4;

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub(crate) struct ContextCounts {
    pub(crate) total: u64,
    pub(crate) words: BTreeMap<LmTokenId, u64>,
}

/// A trained n-gram model.
#[derive(Debug, Clone, PartialEq)]
pub struct NGramModel {
    pub(crate) order: usize,
    pub(crate) k: f64,
    pub(crate) min_count: u64,
    /// Word types in id order (ids start at [`FIRST_WORD_ID`]).
    pub(crate) vocab: Vec<String>,
    pub(crate) token_ids: HashMap<String, LmTokenId>,
    /// `tables[m-1]` holds the order-`m` counts, keyed by `m-1` context ids.
    pub(crate) tables: Vec<BTreeMap<Vec<LmTokenId>, ContextCounts>>,
    pub(crate) total_tokens: u64,
    /// Free-form note on what the model was trained on (e.g. a class filter).
    pub(crate) descriptor: String,
}

/// Training options for [`train_lm`].
#[derive(Debug, Clone)]
pub struct LmOptions {
    pub order: usize,
    pub k: f64,
    pub min_count: u64,
    pub descriptor: String,
}

impl Default for LmOptions {
    fn default() -> Self {
        LmOptions {
            order: 2,
            k: 0.1,
            min_count: 1,
            descriptor: String::new(),
        }
    }
}

/// Trains an n-gram model over the corpus documents.
pub fn train_lm(corpus: &Corpus, options: &LmOptions) -> Result<NGramModel> {
    if options.order < 2 {
        return Err(Error::Config(format!(
            "n-gram order must be >= 2, got {} (a context-independent model has no practical value here)",
            options.order
        )));
    }
    if options.order > MAX_ORDER {
        return Err(Error::Config(format!(
            "n-gram order must be <= {MAX_ORDER}, got {}",
            options.order
        )));
    }
    if options.k < 0.0 || !options.k.is_finite() {
        return Err(Error::Config(format!(
            "smoothing constant must be finite and >= 0, got {}",
            options.k
        )));
    }

    let mut freqs: BTreeMap<&str, u64> = BTreeMap::new();
    let mut total_tokens = 0u64;
    for doc in corpus.documents() {
        for token in doc.tokens.iter() {
            *freqs.entry(token).or_insert(0) += 1;
            total_tokens += 1;
        }
    }
    let vocab: Vec<String> = freqs
        .iter()
        .filter(|(_, &c)| c >= options.min_count)
        .map(|(t, _)| t.to_string())
        .collect();
    let token_ids: HashMap<String, LmTokenId> = vocab
        .iter()
        .enumerate()
        .map(|(i, t)| (t.clone(), FIRST_WORD_ID + i as LmTokenId))
        .collect();

    let mut model = NGramModel {
        order: options.order,
        k: options.k,
        min_count: options.min_count,
        vocab,
        token_ids,
        tables: vec![BTreeMap::new(); options.order],
        total_tokens,
        descriptor: options.descriptor.clone(),
    };

    for doc in corpus.documents() {
        let ids: Vec<LmTokenId> = doc.tokens.iter().map(|t| model.id_of(t)).collect();
        for m in 1..=options.order {
            let mut padded = vec![BOS; m - 1];
            padded.extend_from_slice(&ids);
            padded.push(EOS);
            for window in padded.windows(m) {
                let (context, word) = window.split_at(m - 1);
                let entry = model.tables[m - 1]
                    .entry(context.to_vec())
                    .or_default();
                entry.total += 1;
                *entry.words.entry(word[0]).or_insert(0) += 1;
            }
        }
    }
    Ok(model)
}

impl NGramModel {
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn descriptor(&self) -> &str {
        &self.descriptor
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab.len()
    }

    /// Size of the prediction alphabet: word types plus UNK and EOS.
    pub fn alphabet_size(&self) -> usize {
        self.vocab.len() + 2
    }

    /// Ids of every predictable event, for normalization checks.
    pub fn alphabet_ids(&self) -> Vec<LmTokenId> {
        let mut ids = vec![UNK, EOS];
        ids.extend((0..self.vocab.len()).map(|i| FIRST_WORD_ID + i as LmTokenId));
        ids
    }

    pub fn id_of(&self, token: &str) -> LmTokenId {
        self.token_ids.get(token).copied().unwrap_or(UNK)
    }

    /// Observed order-n contexts, in deterministic order.
    pub fn observed_contexts(&self) -> impl Iterator<Item = &[LmTokenId]> {
        self.tables[self.order - 1].keys().map(Vec::as_slice)
    }

    /// Smoothed conditional probability `P(word | context)` at order n.
    pub fn conditional_prob(&self, context: &[LmTokenId], word: LmTokenId) -> Result<f64> {
        if context.len() != self.order - 1 {
            return Err(Error::Config(format!(
                "context length {} does not match order {}",
                context.len(),
                self.order
            )));
        }
        let (count_hw, count_h) = match self.tables[self.order - 1].get(context) {
            Some(entry) => (
                entry.words.get(&word).copied().unwrap_or(0),
                entry.total,
            ),
            None => (0, 0),
        };
        let a = self.alphabet_size() as f64;
        if self.k > 0.0 {
            Ok((count_hw as f64 + self.k) / (count_h as f64 + self.k * a))
        } else if count_hw == 0 || count_h == 0 {
            Err(Error::Numeric(format!(
                "zero probability for event {word} after context {context:?} with k = 0"
            )))
        } else {
            Ok(count_hw as f64 / count_h as f64)
        }
    }

    /// Natural-log probability of the sentence, including the end marker.
    pub fn sentence_logprob(&self, sentence: &TokenSequence) -> Result<f64> {
        let mut seq = vec![BOS; self.order - 1];
        seq.extend(sentence.iter().map(|t| self.id_of(t)));
        seq.push(EOS);

        let mut logprob = 0.0;
        for i in (self.order - 1)..seq.len() {
            let p = self.conditional_prob(&seq[i - (self.order - 1)..i], seq[i])?;
            logprob += p.ln();
        }
        Ok(logprob)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::tests::toy_corpus;

    fn toy_model(k: f64) -> NGramModel {
        let corpus = toy_corpus(&[("the cat sat", 0), ("the cat ran", 1)], 2);
        train_lm(
            &corpus,
            &LmOptions {
                order: 2,
                k,
                ..LmOptions::default()
            },
        )
        .unwrap()
    }

    #[test]
    fn bigram_hand_counts() {
        let model = toy_model(0.0);
        let the = model.id_of("the");
        let cat = model.id_of("cat");
        let p = model.conditional_prob(&[the], cat).unwrap();
        assert!((p - 1.0).abs() < 1e-15, "P(cat|the) = {p}");
        let sat = model.id_of("sat");
        let p = model.conditional_prob(&[cat], sat).unwrap();
        assert!((p - 0.5).abs() < 1e-15, "P(sat|cat) = {p}");
    }

    #[test]
    fn toy_sentence_logprob_matches_hand_value() {
        let model = toy_model(0.0);
        let sentence: TokenSequence =
            ["the", "cat", "sat"].iter().map(|s| s.to_string()).collect();
        let lp = model.sentence_logprob(&sentence).unwrap();
        assert!((lp - 0.5f64.ln()).abs() < 1e-12, "{lp}");
    }

    #[test]
    fn order_bounds_enforced() {
        let corpus = toy_corpus(&[("a b", 0), ("c d", 1)], 2);
        for bad in [0, 1, 5] {
            let err = train_lm(
                &corpus,
                &LmOptions {
                    order: bad,
                    ..LmOptions::default()
                },
            )
            .unwrap_err();
            assert!(matches!(err, Error::Config(_)), "order {bad}: {err}");
        }
        for good in [2, 3, 4] {
            assert!(train_lm(
                &corpus,
                &LmOptions {
                    order: good,
                    ..LmOptions::default()
                },
            )
            .is_ok());
        }
    }

    #[test]
    fn training_is_deterministic() {
        let a = toy_model(0.1);
        let b = toy_model(0.1);
        assert_eq!(a, b);
    }

    #[test]
    fn every_context_normalizes_with_smoothing() {
        let model = toy_model(0.1);
        let alphabet = model.alphabet_ids();
        let contexts: Vec<Vec<LmTokenId>> =
            model.observed_contexts().map(|c| c.to_vec()).collect();
        assert!(!contexts.is_empty());
        for context in contexts {
            let total: f64 = alphabet
                .iter()
                .map(|&w| model.conditional_prob(&context, w).unwrap())
                .sum();
            assert!(
                (total - 1.0).abs() < 1e-9,
                "context {context:?} sums to {total}"
            );
        }
    }

    #[test]
    fn unseen_context_is_uniform_under_smoothing() {
        let model = toy_model(0.5);
        // UNK never occurs in the toy corpus, so [UNK] is an unseen context
        let p = model.conditional_prob(&[UNK], EOS).unwrap();
        assert!((p - 1.0 / model.alphabet_size() as f64).abs() < 1e-12);
    }

    #[test]
    fn zero_probability_is_an_explicit_error_at_k_zero() {
        let model = toy_model(0.0);
        let sentence: TokenSequence =
            ["cat", "the"].iter().map(|s| s.to_string()).collect();
        let err = model.sentence_logprob(&sentence).unwrap_err();
        assert!(matches!(err, Error::Numeric(_)), "{err}");
        assert!(err.to_string().contains("zero probability"));
    }

    #[test]
    fn any_sentence_is_finite_with_smoothing() {
        let model = toy_model(0.1);
        let sentence: TokenSequence = ["unseen", "words", "entirely"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let lp = model.sentence_logprob(&sentence).unwrap();
        assert!(lp.is_finite());
    }

    #[test]
    fn empty_sentence_scores_eos_only() {
        let model = toy_model(0.1);
        let lp = model.sentence_logprob(&TokenSequence::default()).unwrap();
        let expect = model.conditional_prob(&[BOS], EOS).unwrap().ln();
        assert_eq!(lp, expect);
    }

    #[test]
    fn min_count_maps_rare_tokens_to_unk() {
        let corpus = toy_corpus(&[("common common rare", 0), ("common word word", 1)], 2);
        let model = train_lm(
            &corpus,
            &LmOptions {
                order: 2,
                k: 0.1,
                min_count: 2,
                descriptor: String::new(),
            },
        )
        .unwrap();
        assert_eq!(model.id_of("rare"), UNK);
        assert_ne!(model.id_of("common"), UNK);
    }
}
