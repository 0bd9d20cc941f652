//! The supervised classifier: averaged word and hashed n-gram embeddings
//! feeding a hierarchical softmax over the label Huffman tree.
//!
//! A document's hidden representation is the mean of the embedding rows of
//! its in-vocabulary words plus its hashed word n-grams; the hidden layer is
//! linear. Each internal tree node is a binary logistic decision
//! `sigmoid(x . theta)`, a label's probability is the product along its
//! path, and training maximizes the mean log-likelihood by stochastic
//! gradient ascent with a linearly decaying learning rate.
//!
//! Word n-grams restore the order sensitivity that plain averaging loses
//! ("do you like ..." vs "you do like ..." hash to different buckets).
//! N-grams are mapped into a fixed number of bucket rows by 64-bit FNV-1a
//! over the token ids, each id contributing its four little-endian bytes,
//! ids separated by a single `0xFF` byte. Out-of-vocabulary tokens
//! participate with the reserved UNK id, but only real vocabulary words
//! contribute their own embedding rows.
//!
//! Everything is deterministic for a fixed seed: embedding initialization,
//! per-epoch document shuffling, and the update order. An opt-in parallel
//! mode trades that determinism for throughput.

use rand::distr::{Distribution, Uniform};
use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use std::sync::atomic::{AtomicU32, AtomicU64, Ordering};

use crate::corpus::{Corpus, LabelId, LabelTable, TokenSequence};
use crate::error::{Error, Result};
use crate::hash::Fnv1a64;
use crate::huffman::HuffmanTree;
use crate::rng::stream_rng;
use crate::vocab::Vocabulary;

/// Classifier hyperparameters. `ngram_max < ngram_min` disables n-grams.
#[derive(Debug, Clone, PartialEq)]
pub struct Hyperparams {
    pub dim: usize,
    pub ngram_min: usize,
    pub ngram_max: usize,
    pub buckets: usize,
    pub lr: f64,
    pub epochs: usize,
    pub min_count: u64,
    pub seed: u64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            dim: 100,
            ngram_min: 2,
            ngram_max: 2,
            buckets: 2_000_000,
            lr: 0.1,
            epochs: 5,
            min_count: 5,
            seed: 42,
        }
    }
}

impl Hyperparams {
    pub fn ngrams_enabled(&self) -> bool {
        self.ngram_max >= self.ngram_min
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::Config("embedding dimension must be >= 1".into()));
        }
        if self.ngrams_enabled() {
            if self.ngram_min < 2 {
                return Err(Error::Config(format!(
                    "n-gram minimum must be >= 2 when enabled, got {}",
                    self.ngram_min
                )));
            }
            if self.buckets == 0 {
                return Err(Error::Config("bucket count must be > 0".into()));
            }
        }
        if !(self.lr > 0.0) || !self.lr.is_finite() {
            return Err(Error::Config(format!(
                "learning rate must be positive and finite, got {}",
                self.lr
            )));
        }
        Ok(())
    }
}

/// Dense row-major embedding matrix: one row per vocabulary word, then one
/// per n-gram bucket.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    pub(crate) rows: usize,
    pub(crate) dim: usize,
    pub(crate) data: Vec<f32>,
}

impl EmbeddingMatrix {
    pub(crate) fn zeroed(rows: usize, dim: usize) -> Self {
        EmbeddingMatrix {
            rows,
            dim,
            data: vec![0.0; rows * dim],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, r: usize) -> &[f32] {
        &self.data[r * self.dim..(r + 1) * self.dim]
    }

    pub(crate) fn row_mut(&mut self, r: usize) -> &mut [f32] {
        &mut self.data[r * self.dim..(r + 1) * self.dim]
    }
}

/// The document feature vector (mean of contributing embedding rows).
#[derive(Debug, Clone, PartialEq)]
pub struct DocVector(pub Vec<f64>);

impl DocVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }
}

/// Per-epoch mean log-likelihood, recorded during training.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainLog {
    pub epoch_objectives: Vec<f64>,
}

/// Update scheduling. The deterministic mode is the default and the only one
/// that guarantees byte-identical models for a fixed seed; the parallel mode
/// applies unsynchronized updates from several threads.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrainMode {
    Deterministic,
    Parallel { threads: usize },
}

/// Numerically stable logistic sigmoid.
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn dot_f32(x: &[f64], theta: &[f32]) -> f64 {
    x.iter()
        .zip(theta.iter())
        .map(|(a, b)| a * f64::from(*b))
        .sum()
}

/// Bucketed ids for every contiguous word n-gram with `ngram_min <= n <=
/// ngram_max`. Ids land in `vocab_size..vocab_size + buckets`. Returns an
/// empty sequence when `ngram_max < ngram_min`.
pub fn ngram_ids(
    token_ids: &[u32],
    ngram_min: usize,
    ngram_max: usize,
    buckets: usize,
    vocab_size: usize,
) -> Vec<u32> {
    if ngram_max < ngram_min || buckets == 0 {
        return Vec::new();
    }
    let mut out = Vec::new();
    for n in ngram_min..=ngram_max {
        if n == 0 || n > token_ids.len() {
            continue;
        }
        for window in token_ids.windows(n) {
            let mut h = Fnv1a64::new();
            for (i, id) in window.iter().enumerate() {
                if i > 0 {
                    h.update(&[0xFF]);
                }
                h.update(&id.to_le_bytes());
            }
            out.push(vocab_size as u32 + (h.finish() % buckets as u64) as u32);
        }
    }
    out
}

/// Log-probability of the path, reading parameters as `f64` vectors aligned
/// with the path steps. Shared by training, the fused head, and the gradient
/// checks.
pub fn path_log_prob(x: &[f64], bits: &[u8], thetas: &[Vec<f64>]) -> f64 {
    bits.iter()
        .zip(thetas.iter())
        .map(|(&bit, theta)| {
            let z: f64 = x.iter().zip(theta.iter()).map(|(a, b)| a * b).sum();
            let p = sigmoid(z);
            if bit == 1 { p.ln() } else { (1.0 - p).ln() }
        })
        .sum()
}

/// Log-probability plus its analytic gradients: per-step parameter gradients
/// and the gradient with respect to `x`.
///
/// For each step, `d logP / dz = bit - sigmoid(z)`; the parameter gradient is
/// that scalar times `x`, and the `x` gradient accumulates it times `theta`.
pub fn path_log_prob_grads(
    x: &[f64],
    bits: &[u8],
    thetas: &[Vec<f64>],
) -> (f64, Vec<Vec<f64>>, Vec<f64>) {
    let mut log_prob = 0.0;
    let mut theta_grads = Vec::with_capacity(bits.len());
    let mut x_grad = vec![0.0; x.len()];
    for (&bit, theta) in bits.iter().zip(thetas.iter()) {
        let z: f64 = x.iter().zip(theta.iter()).map(|(a, b)| a * b).sum();
        let p = sigmoid(z);
        log_prob += if bit == 1 { p.ln() } else { (1.0 - p).ln() };
        let g = f64::from(bit) - p;
        theta_grads.push(x.iter().map(|&xi| g * xi).collect());
        for (xg, t) in x_grad.iter_mut().zip(theta.iter()) {
            *xg += g * t;
        }
    }
    (log_prob, theta_grads, x_grad)
}

/// Label probabilities from a feature vector: per label, the product along
/// its path of `sigmoid(x . theta)` for bit 1 and the complement for bit 0.
pub(crate) fn hs_predict(tree: &HuffmanTree, x: &[f64]) -> Vec<f64> {
    (0..tree.num_labels())
        .map(|label| {
            tree.path(label as LabelId)
                .iter()
                .map(|step| {
                    let p = sigmoid(dot_f32(x, tree.theta(step.node)));
                    if step.bit == 1 {
                        p
                    } else {
                        1.0 - p
                    }
                })
                .product()
        })
        .collect()
}

/// The trained (or initialized) classifier.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierModel {
    pub(crate) labels: LabelTable,
    pub(crate) vocab: Vocabulary,
    pub(crate) embeddings: EmbeddingMatrix,
    pub(crate) tree: HuffmanTree,
    pub(crate) hyper: Hyperparams,
}

impl ClassifierModel {
    /// Fresh model: seeded uniform embeddings in `[-1/(2 dim), 1/(2 dim)]`,
    /// zero node parameters, label tree from the frequency map.
    pub fn init(
        labels: LabelTable,
        label_freqs: &[u64],
        vocab: Vocabulary,
        hyper: Hyperparams,
    ) -> Result<Self> {
        hyper.validate()?;
        if labels.len() != label_freqs.len() {
            return Err(Error::Data(
                "label table and frequency map disagree on size".into(),
            ));
        }
        let tree = HuffmanTree::build(label_freqs, hyper.dim)?;
        let rows = vocab.len()
            + if hyper.ngrams_enabled() {
                hyper.buckets
            } else {
                0
            };
        let mut embeddings = EmbeddingMatrix::zeroed(rows, hyper.dim);
        let bound = 1.0 / (2.0 * hyper.dim as f64);
        let dist = Uniform::new(-bound as f32, bound as f32)
            .map_err(|e| Error::Config(format!("bad init bound: {e}")))?;
        let mut rng = stream_rng(hyper.seed, "init");
        for v in embeddings.data.iter_mut() {
            *v = dist.sample(&mut rng);
        }
        Ok(ClassifierModel {
            labels,
            vocab,
            embeddings,
            tree,
            hyper,
        })
    }

    /// Convenience: vocabulary, tree, init, and training in one call.
    pub fn fit(corpus: &Corpus, hyper: Hyperparams) -> Result<(Self, TrainLog)> {
        let vocab = Vocabulary::build(corpus, hyper.min_count)?;
        let label_freqs: Vec<u64> = corpus.label_counts().iter().map(|&c| c as u64).collect();
        let mut model = ClassifierModel::init(corpus.labels().clone(), &label_freqs, vocab, hyper)?;
        let log = model.train(corpus, TrainMode::Deterministic)?;
        Ok((model, log))
    }

    pub fn labels(&self) -> &LabelTable {
        &self.labels
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn hyper(&self) -> &Hyperparams {
        &self.hyper
    }

    pub fn tree(&self) -> &HuffmanTree {
        &self.tree
    }

    pub fn embeddings(&self) -> &EmbeddingMatrix {
        &self.embeddings
    }

    /// Embedding-row ids contributing to a document: in-vocabulary word ids
    /// plus hashed n-gram ids.
    pub fn input_ids(&self, tokens: &TokenSequence) -> Vec<u32> {
        let mut ids: Vec<u32> = tokens.iter().filter_map(|t| self.vocab.id(t)).collect();
        if self.hyper.ngrams_enabled() {
            let hashed: Vec<u32> = tokens.iter().map(|t| self.vocab.id_or_unk(t)).collect();
            ids.extend(ngram_ids(
                &hashed,
                self.hyper.ngram_min,
                self.hyper.ngram_max,
                self.hyper.buckets,
                self.vocab.len(),
            ));
        }
        ids
    }

    /// Mean of the contributing embedding rows; the zero vector when nothing
    /// contributes.
    pub fn doc_vector(&self, tokens: &TokenSequence) -> DocVector {
        let ids = self.input_ids(tokens);
        DocVector(self.mean_of_rows(&ids))
    }

    fn mean_of_rows(&self, ids: &[u32]) -> Vec<f64> {
        let mut x = vec![0.0f64; self.hyper.dim];
        if ids.is_empty() {
            return x;
        }
        for &id in ids {
            for (acc, v) in x.iter_mut().zip(self.embeddings.row(id as usize)) {
                *acc += f64::from(*v);
            }
        }
        let inv = 1.0 / ids.len() as f64;
        for v in x.iter_mut() {
            *v *= inv;
        }
        x
    }

    /// Probability of the positive branch at one node: `sigmoid(x . theta)`.
    pub fn node_prob(&self, x: &DocVector, internal: usize) -> f64 {
        sigmoid(dot_f32(x.as_slice(), self.tree.theta(internal)))
    }

    /// Per-label probabilities; they sum to 1 by tree construction.
    pub fn predict(&self, tokens: &TokenSequence) -> Vec<f64> {
        let x = self.doc_vector(tokens);
        hs_predict(&self.tree, x.as_slice())
    }

    pub fn predict_from_vector(&self, x: &DocVector) -> Vec<f64> {
        hs_predict(&self.tree, x.as_slice())
    }

    /// Label id with the highest probability (lowest id wins ties).
    pub fn predict_label(&self, tokens: &TokenSequence) -> LabelId {
        let probs = self.predict(tokens);
        let mut best = 0usize;
        for (i, p) in probs.iter().enumerate() {
            if *p > probs[best] {
                best = i;
            }
        }
        best as LabelId
    }

    /// Stochastic gradient ascent on the mean log-likelihood. The learning
    /// rate decays linearly to zero over `epochs * documents` updates.
    pub fn train(&mut self, corpus: &Corpus, mode: TrainMode) -> Result<TrainLog> {
        if corpus.labels().len() != self.labels.len() {
            return Err(Error::Data(
                "corpus label table does not match the model".into(),
            ));
        }
        match mode {
            TrainMode::Deterministic => self.train_deterministic(corpus),
            TrainMode::Parallel { threads } => self.train_parallel(corpus, threads),
        }
    }

    fn train_deterministic(&mut self, corpus: &Corpus) -> Result<TrainLog> {
        let docs: Vec<(Vec<u32>, LabelId)> = corpus
            .documents()
            .iter()
            .map(|d| (self.input_ids(&d.tokens), d.label))
            .collect();
        let total_updates = (self.hyper.epochs * docs.len()) as f64;
        let mut order: Vec<usize> = (0..docs.len()).collect();
        let mut shuffle_rng = stream_rng(self.hyper.seed, "shuffle");

        let mut log = TrainLog::default();
        let mut t = 0u64;
        for epoch in 0..self.hyper.epochs {
            order.shuffle(&mut shuffle_rng);
            let mut objective = 0.0;
            for &i in &order {
                let lr = self.hyper.lr * (1.0 - t as f64 / total_updates);
                let (ids, label) = &docs[i];
                let log_prob = self.update_doc(ids, *label, lr);
                objective += log_prob;
                t += 1;
                if !log_prob.is_finite() {
                    return Err(Error::Numeric(format!(
                        "objective diverged at epoch {epoch}, update {t}: log-likelihood {log_prob}"
                    )));
                }
            }
            log.epoch_objectives.push(objective / docs.len() as f64);
        }
        Ok(log)
    }

    /// One ascent step on one document; returns the pre-update
    /// log-likelihood.
    fn update_doc(&mut self, ids: &[u32], label: LabelId, lr: f64) -> f64 {
        let x = self.mean_of_rows(ids);
        let path = self.tree.path(label).to_vec();
        let bits: Vec<u8> = path.iter().map(|s| s.bit).collect();
        let thetas: Vec<Vec<f64>> = path
            .iter()
            .map(|s| self.tree.theta(s.node).iter().map(|&v| f64::from(v)).collect())
            .collect();

        let (log_prob, theta_grads, x_grad) = path_log_prob_grads(&x, &bits, &thetas);

        for (step, grad) in path.iter().zip(theta_grads.iter()) {
            let theta = self.tree.theta_mut(step.node);
            for (t, g) in theta.iter_mut().zip(grad.iter()) {
                *t = (f64::from(*t) + lr * g) as f32;
            }
        }
        if !ids.is_empty() {
            let scale = lr / ids.len() as f64;
            for &id in ids {
                let row = self.embeddings.row_mut(id as usize);
                for (r, g) in row.iter_mut().zip(x_grad.iter()) {
                    *r = (f64::from(*r) + scale * g) as f32;
                }
            }
        }
        log_prob
    }

    /// Unsynchronized multi-threaded training: updates race and the result
    /// is not bitwise reproducible. Excluded from acceptance runs.
    fn train_parallel(&mut self, corpus: &Corpus, threads: usize) -> Result<TrainLog> {
        if threads == 0 {
            return Err(Error::Config("parallel training needs >= 1 thread".into()));
        }
        let docs: Vec<(Vec<u32>, LabelId)> = corpus
            .documents()
            .iter()
            .map(|d| (self.input_ids(&d.tokens), d.label))
            .collect();
        let paths: Vec<(Vec<u8>, Vec<usize>)> = (0..self.labels.len())
            .map(|l| {
                let path = self.tree.path(l as LabelId);
                (
                    path.iter().map(|s| s.bit).collect(),
                    path.iter().map(|s| s.node).collect(),
                )
            })
            .collect();

        let emb: Vec<AtomicU32> = self
            .embeddings
            .data
            .iter()
            .map(|v| AtomicU32::new(v.to_bits()))
            .collect();
        let thetas: Vec<AtomicU32> = self
            .tree
            .thetas
            .iter()
            .map(|v| AtomicU32::new(v.to_bits()))
            .collect();
        let dim = self.hyper.dim;
        let lr0 = self.hyper.lr;
        let total_updates = (self.hyper.epochs * docs.len()) as f64;
        let step_counter = AtomicU64::new(0);

        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;

        let mut order: Vec<usize> = (0..docs.len()).collect();
        let mut shuffle_rng = stream_rng(self.hyper.seed, "shuffle");
        let mut log = TrainLog::default();

        for _ in 0..self.hyper.epochs {
            order.shuffle(&mut shuffle_rng);
            let chunk = docs.len().div_ceil(threads);
            let objective: f64 = pool.install(|| {
                order
                    .par_chunks(chunk)
                    .map(|part| {
                        let mut x = vec![0.0f64; dim];
                        let mut sum = 0.0;
                        for &i in part {
                            let (ids, label) = &docs[i];
                            let t = step_counter.fetch_add(1, Ordering::Relaxed);
                            let lr = lr0 * (1.0 - t as f64 / total_updates);
                            // hidden vector from racy reads
                            x.iter_mut().for_each(|v| *v = 0.0);
                            for &id in ids {
                                let base = id as usize * dim;
                                for (d, v) in x.iter_mut().enumerate() {
                                    *v += f64::from(f32::from_bits(
                                        emb[base + d].load(Ordering::Relaxed),
                                    ));
                                }
                            }
                            if !ids.is_empty() {
                                let inv = 1.0 / ids.len() as f64;
                                x.iter_mut().for_each(|v| *v *= inv);
                            }
                            let (bits, nodes) = &paths[*label as usize];
                            let mut x_grad = vec![0.0f64; dim];
                            for (&bit, &node) in bits.iter().zip(nodes.iter()) {
                                let base = node * dim;
                                let mut z = 0.0;
                                for (d, xv) in x.iter().enumerate() {
                                    z += xv
                                        * f64::from(f32::from_bits(
                                            thetas[base + d].load(Ordering::Relaxed),
                                        ));
                                }
                                let p = sigmoid(z);
                                sum += if bit == 1 { p.ln() } else { (1.0 - p).ln() };
                                let g = f64::from(bit) - p;
                                for (d, xv) in x.iter().enumerate() {
                                    let slot = &thetas[base + d];
                                    let old = f64::from(f32::from_bits(
                                        slot.load(Ordering::Relaxed),
                                    ));
                                    x_grad[d] += g * old;
                                    slot.store(
                                        ((old + lr * g * xv) as f32).to_bits(),
                                        Ordering::Relaxed,
                                    );
                                }
                            }
                            if !ids.is_empty() {
                                let scale = lr / ids.len() as f64;
                                for &id in ids {
                                    let base = id as usize * dim;
                                    for (d, g) in x_grad.iter().enumerate() {
                                        let slot = &emb[base + d];
                                        let old = f64::from(f32::from_bits(
                                            slot.load(Ordering::Relaxed),
                                        ));
                                        slot.store(
                                            ((old + scale * g) as f32).to_bits(),
                                            Ordering::Relaxed,
                                        );
                                    }
                                }
                            }
                        }
                        sum
                    })
                    .sum()
            });
            let mean = objective / docs.len() as f64;
            if !mean.is_finite() {
                return Err(Error::Numeric(format!(
                    "objective diverged in parallel training: {mean}"
                )));
            }
            log.epoch_objectives.push(mean);
        }

        for (dst, src) in self.embeddings.data.iter_mut().zip(emb.iter()) {
            *dst = f32::from_bits(src.load(Ordering::Relaxed));
        }
        for (dst, src) in self.tree.thetas.iter_mut().zip(thetas.iter()) {
            *dst = f32::from_bits(src.load(Ordering::Relaxed));
        }
        Ok(log)
    }

    /// Fraction of documents whose argmax prediction matches the gold label.
    pub fn accuracy(&self, corpus: &Corpus) -> f64 {
        let correct = corpus
            .documents()
            .iter()
            .filter(|d| self.predict_label(&d.tokens) == d.label)
            .count();
        correct as f64 / corpus.len() as f64
    }
}

/// Builds a linearly separable two-class corpus with disjoint vocabularies;
/// used by tests and benchmarks as a convergence sanity check.
pub fn separable_corpus(docs_per_class: usize, tokens_per_doc: usize, seed: u64) -> Corpus {
    use crate::corpus::{Document, Provenance};

    let labels = LabelTable::from_names(vec!["0".into(), "1".into()]).expect("distinct");
    let mut rng = stream_rng(seed, "separable-corpus");
    let vocab_a: Vec<String> = (0..20).map(|i| format!("calm{i}")).collect();
    let vocab_b: Vec<String> = (0..20).map(|i| format!("rage{i}")).collect();
    let mut documents = Vec::new();
    for label in 0..2u32 {
        let vocab = if label == 0 { &vocab_a } else { &vocab_b };
        for d in 0..docs_per_class {
            let tokens: Vec<String> = (0..tokens_per_doc)
                .map(|_| vocab[rng.random_range(0..vocab.len())].clone())
                .collect();
            documents.push(Document {
                id: format!("{label}-{d}"),
                tokens: TokenSequence::new(tokens),
                label,
            });
        }
    }
    Corpus::from_documents(
        documents,
        labels,
        Provenance {
            source: "synthetic-separable".into(),
            preprocess_digest: String::new(),
        },
    )
    .expect("nonempty")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::tests::toy_corpus;

    fn small_hyper() -> Hyperparams {
        Hyperparams {
            dim: 10,
            buckets: 1_000,
            min_count: 1,
            ..Hyperparams::default()
        }
    }

    fn seq(words: &[&str]) -> TokenSequence {
        words.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn sigmoid_values() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!((sigmoid(2.0) - 0.880797).abs() < 1e-6);
        for z in [-30.0, -3.0, -0.5, 0.7, 4.0, 25.0] {
            assert!((sigmoid(z) + sigmoid(-z) - 1.0).abs() < 1e-12);
            assert!(sigmoid(z) > 0.0 && sigmoid(z) < 1.0);
        }
    }

    #[test]
    fn ngram_ids_disabled_and_deterministic() {
        let ids = [1u32, 2, 3];
        assert!(ngram_ids(&ids, 2, 1, 100, 10).is_empty());
        let a = ngram_ids(&ids, 2, 2, 100, 10);
        let b = ngram_ids(&ids, 2, 2, 100, 10);
        assert_eq!(a, b);
        assert_eq!(a.len(), 2);
        for &id in &a {
            assert!((10..110).contains(&id));
        }
    }

    #[test]
    fn ngram_ids_are_order_sensitive() {
        // "do you like" vs "you do like"
        let a = ngram_ids(&[5, 6, 7], 2, 2, 1_000_000, 0);
        let b = ngram_ids(&[6, 5, 7], 2, 2, 1_000_000, 0);
        let mut a_sorted = a.clone();
        let mut b_sorted = b.clone();
        a_sorted.sort_unstable();
        b_sorted.sort_unstable();
        assert_ne!(a_sorted, b_sorted);
    }

    fn init_model(hyper: Hyperparams, corpus: &Corpus) -> ClassifierModel {
        let vocab = Vocabulary::build(corpus, hyper.min_count).unwrap();
        let freqs: Vec<u64> = corpus.label_counts().iter().map(|&c| c as u64).collect();
        ClassifierModel::init(corpus.labels().clone(), &freqs, vocab, hyper).unwrap()
    }

    #[test]
    fn doc_vector_mean_semantics() {
        let corpus = toy_corpus(&[("alpha beta", 0), ("alpha beta", 1)], 2);
        let hyper = Hyperparams {
            ngram_min: 2,
            ngram_max: 1, // disabled
            ..small_hyper()
        };
        let model = init_model(hyper, &corpus);

        // single known token -> its row exactly
        let x = model.doc_vector(&seq(&["alpha"]));
        let row = model.embeddings.row(model.vocab.id("alpha").unwrap() as usize);
        for (a, b) in x.as_slice().iter().zip(row.iter()) {
            assert_eq!(*a, f64::from(*b));
        }

        // all-unknown tokens -> zero vector
        let x = model.doc_vector(&seq(&["zzz", "qqq"]));
        assert!(x.as_slice().iter().all(|&v| v == 0.0));

        // two tokens -> componentwise mean
        let x = model.doc_vector(&seq(&["alpha", "beta"]));
        let ra = model.embeddings.row(model.vocab.id("alpha").unwrap() as usize);
        let rb = model.embeddings.row(model.vocab.id("beta").unwrap() as usize);
        for ((v, a), b) in x.as_slice().iter().zip(ra.iter()).zip(rb.iter()) {
            let mean = (f64::from(*a) + f64::from(*b)) / 2.0;
            assert!((v - mean).abs() < 1e-15);
        }
    }

    #[test]
    fn doc_vector_permutation_invariance_depends_on_ngrams() {
        let corpus = toy_corpus(&[("do you like apples", 0), ("eat apples now do", 1)], 2);
        let no_ngrams = init_model(
            Hyperparams {
                ngram_min: 2,
                ngram_max: 1,
                ..small_hyper()
            },
            &corpus,
        );
        let with_bigrams = init_model(small_hyper(), &corpus);

        let fwd = seq(&["do", "you", "like", "apples"]);
        let rev = seq(&["you", "do", "like", "apples"]);
        assert_eq!(
            no_ngrams.doc_vector(&fwd),
            no_ngrams.doc_vector(&rev),
            "averaging alone must be order-blind"
        );
        assert_ne!(
            with_bigrams.doc_vector(&fwd),
            with_bigrams.doc_vector(&rev),
            "bigrams must restore order sensitivity"
        );
    }

    #[test]
    fn zero_vector_probabilities_follow_depth() {
        // binary: {0.5, 0.5}
        let corpus = toy_corpus(&[("a", 0), ("b", 1)], 2);
        let model = init_model(small_hyper(), &corpus);
        let probs = model.predict(&seq(&["unknown-token"]));
        assert_eq!(probs, vec![0.5, 0.5]);

        // three labels, freqs {5,3,2} -> depths {1,2,2} -> {0.5, 0.25, 0.25}
        let labels = LabelTable::from_names(vec!["0".into(), "1".into(), "2".into()]).unwrap();
        let vocab_corpus = toy_corpus(&[("w x", 0), ("y", 1), ("z", 2)], 3);
        let vocab = Vocabulary::build(&vocab_corpus, 1).unwrap();
        let model =
            ClassifierModel::init(labels, &[5, 3, 2], vocab, small_hyper()).unwrap();
        let probs = model.predict(&seq(&["totally-unknown"]));
        assert_eq!(probs, vec![0.5, 0.25, 0.25]);
    }

    #[test]
    fn probabilities_sum_to_one_after_training() {
        let corpus = separable_corpus(20, 8, 3);
        let (model, _) = ClassifierModel::fit(
            &corpus,
            Hyperparams {
                dim: 10,
                epochs: 2,
                min_count: 1,
                buckets: 100,
                ..Hyperparams::default()
            },
        )
        .unwrap();
        for doc in corpus.documents().iter().take(20) {
            let sum: f64 = model.predict(&doc.tokens).iter().sum();
            assert!((sum - 1.0).abs() < 1e-9, "sum {sum}");
        }
    }

    #[test]
    fn separable_corpus_converges() {
        let corpus = separable_corpus(100, 10, 11);
        let (model, log) = ClassifierModel::fit(
            &corpus,
            Hyperparams {
                dim: 10,
                lr: 0.1,
                epochs: 5,
                min_count: 1,
                buckets: 1_000,
                seed: 7,
                ..Hyperparams::default()
            },
        )
        .unwrap();
        assert_eq!(model.accuracy(&corpus), 1.0);
        assert_eq!(log.epoch_objectives.len(), 5);
        // the objective is a log-likelihood: negative, and improving overall
        assert!(log.epoch_objectives[4] > log.epoch_objectives[0]);
    }

    #[test]
    fn zero_epochs_is_a_no_op() {
        let corpus = toy_corpus(&[("a b", 0), ("c d", 1)], 2);
        let hyper = Hyperparams {
            epochs: 0,
            min_count: 1,
            ..small_hyper()
        };
        let (model, log) = ClassifierModel::fit(&corpus, hyper.clone()).unwrap();
        assert!(log.epoch_objectives.is_empty());
        let fresh = init_model(hyper, &corpus);
        assert_eq!(model, fresh);
    }

    #[test]
    fn training_is_deterministic() {
        let corpus = separable_corpus(10, 6, 5);
        let hyper = Hyperparams {
            dim: 8,
            epochs: 3,
            min_count: 1,
            buckets: 64,
            seed: 123,
            ..Hyperparams::default()
        };
        let (a, _) = ClassifierModel::fit(&corpus, hyper.clone()).unwrap();
        let (b, _) = ClassifierModel::fit(&corpus, hyper).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn divergence_is_reported() {
        // conflicting labels for the same text plus an absurd learning rate
        // saturate a sigmoid to exactly 0/1 and blow up the log-likelihood
        let corpus = toy_corpus(&[("same text here", 0), ("same text here", 1)], 2);
        let hyper = Hyperparams {
            dim: 4,
            lr: 1e15,
            epochs: 3,
            min_count: 1,
            ngram_min: 2,
            ngram_max: 1,
            ..Hyperparams::default()
        };
        let err = ClassifierModel::fit(&corpus, hyper).unwrap_err();
        assert!(matches!(err, Error::Numeric(_)), "{err}");
    }

    #[test]
    fn parallel_mode_trains_to_separation() {
        let corpus = separable_corpus(100, 8, 17);
        let hyper = Hyperparams {
            dim: 10,
            epochs: 5,
            min_count: 1,
            buckets: 256,
            ..Hyperparams::default()
        };
        let vocab = Vocabulary::build(&corpus, 1).unwrap();
        let freqs: Vec<u64> = corpus.label_counts().iter().map(|&c| c as u64).collect();
        let mut model =
            ClassifierModel::init(corpus.labels().clone(), &freqs, vocab, hyper).unwrap();
        model
            .train(&corpus, TrainMode::Parallel { threads: 2 })
            .unwrap();
        assert!(model.accuracy(&corpus) > 0.95);
    }
}
