//! Corpus augmentation by token masking, externally computed document
//! embeddings, and the fused classification head.
//!
//! Masking follows the 80/10/10 recipe: a fixed fraction of positions is
//! chosen uniformly without replacement, and each chosen position is
//! replaced by the literal `[MASK]` token with probability 0.8, by a random
//! vocabulary token with 0.1, or kept unchanged with 0.1. Masked copies keep
//! their labels, which makes the procedure usable as label-preserving
//! training augmentation.
//!
//! The fused head consumes the concatenation of the frozen base model's
//! document vector and an external embedding, each half rescaled so its mean
//! L2 norm over the training set is 1 (preventing either half from
//! dominating by scale alone). The head is its own hierarchical-softmax
//! tree, trained exactly like the base classifier's node parameters, with
//! all embeddings frozen.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::classifier::{hs_predict, path_log_prob_grads, ClassifierModel, TrainLog};
use crate::corpus::{Corpus, Document, LabelId, TokenSequence};
use crate::error::{Error, Result};
use crate::huffman::HuffmanTree;
use crate::rng::{stream_rng, stream_seed};
use crate::vocab::Vocabulary;

/// The literal mask token. It enters vocabularies like any other token.
pub const MASK_TOKEN: &str = "[MASK]";

/// What happened at one target position.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MaskAction {
    Mask,
    Random,
    Keep,
}

/// One masking target: the position, its original token, and the action.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskTarget {
    pub position: usize,
    pub original: String,
    pub action: MaskAction,
}

/// A sequence with masking applied.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskedSequence {
    pub tokens: TokenSequence,
    pub targets: Vec<MaskTarget>,
}

/// Masks `round(rate * len)` positions (round half up), chosen uniformly
/// without replacement; actions are drawn 0.8/0.1/0.1 per target.
/// Deterministic per seed. An empty sequence yields no targets.
pub fn mask_tokens(
    seq: &TokenSequence,
    rate: f64,
    vocab: &Vocabulary,
    seed: u64,
) -> Result<MaskedSequence> {
    if !(rate > 0.0 && rate < 1.0) {
        return Err(Error::Config(format!(
            "mask rate must be in (0,1), got {rate}"
        )));
    }
    let len = seq.len();
    let count = (rate * len as f64).round() as usize;

    let mut rng = stream_rng(seed, "mask");
    let mut positions: Vec<usize> = rand::seq::index::sample(&mut rng, len, count).into_vec();
    positions.sort_unstable();

    let mut tokens: Vec<String> = seq.tokens().to_vec();
    let mut targets = Vec::with_capacity(count);
    for position in positions {
        let original = tokens[position].clone();
        let roll: f64 = rng.random();
        let action = if roll < 0.8 {
            MaskAction::Mask
        } else if roll < 0.9 {
            MaskAction::Random
        } else {
            MaskAction::Keep
        };
        match action {
            MaskAction::Mask => tokens[position] = MASK_TOKEN.to_string(),
            MaskAction::Random => {
                let pick = rng.random_range(0..vocab.len()) as u32;
                tokens[position] = vocab.token(pick).expect("id in range").to_string();
            }
            MaskAction::Keep => {}
        }
        targets.push(MaskTarget {
            position,
            original,
            action,
        });
    }
    Ok(MaskedSequence {
        tokens: TokenSequence::new(tokens),
        targets,
    })
}

/// Original corpus plus `copies` masked variants of every document, labels
/// preserved. Copy `c` of document `id` gets id `id#m<c+1>`.
pub fn augment_corpus(
    corpus: &Corpus,
    rate: f64,
    copies: usize,
    vocab: &Vocabulary,
    seed: u64,
) -> Result<Corpus> {
    let mut documents: Vec<Document> = corpus.documents().to_vec();
    for copy in 0..copies {
        for doc in corpus.documents() {
            let doc_seed = stream_seed(seed, &format!("augment/{copy}/{}", doc.id));
            let masked = mask_tokens(&doc.tokens, rate, vocab, doc_seed)?;
            documents.push(Document {
                id: format!("{}#m{}", doc.id, copy + 1),
                tokens: masked.tokens,
                label: doc.label,
            });
        }
    }
    Corpus::from_documents(documents, corpus.labels().clone(), corpus.provenance().clone())
}

/// Externally computed per-document embeddings.
#[derive(Debug, Clone, PartialEq)]
pub struct DocEmbeddings {
    pub(crate) dim: usize,
    pub(crate) vectors: BTreeMap<String, Vec<f32>>,
    pub(crate) source: String,
}

impl DocEmbeddings {
    pub fn new(dim: usize, source: impl Into<String>) -> Self {
        DocEmbeddings {
            dim,
            vectors: BTreeMap::new(),
            source: source.into(),
        }
    }

    pub fn insert(&mut self, id: impl Into<String>, vector: Vec<f32>) -> Result<()> {
        let id = id.into();
        if vector.len() != self.dim {
            return Err(Error::Data(format!(
                "embedding for {id:?} has dimension {}, expected {}",
                vector.len(),
                self.dim
            )));
        }
        if vector.iter().any(|v| !v.is_finite()) {
            return Err(Error::Data(format!("embedding for {id:?} has non-finite values")));
        }
        if self.vectors.insert(id.clone(), vector).is_some() {
            return Err(Error::Data(format!("duplicate document id {id:?}")));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn get(&self, id: &str) -> Option<&[f32]> {
        self.vectors.get(id).map(Vec::as_slice)
    }
}

/// Reads the embedding file: header line `N e`, then `N` lines
/// `doc_id f_1 ... f_e`, whitespace-separated.
pub fn load_embeddings(path: &Path) -> Result<DocEmbeddings> {
    let file = File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut lines = BufReader::new(file).lines().enumerate();

    let header = match lines.next() {
        Some((_, line)) => line.map_err(|e| Error::io(path.display().to_string(), e))?,
        None => return Err(Error::Data("embedding file is empty".into())),
    };
    let mut parts = header.split_whitespace();
    let n: usize = parts
        .next()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::Data("embedding header must be \"N e\"".into()))?;
    let e: usize = parts
        .next()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::Data("embedding header must be \"N e\"".into()))?;
    if parts.next().is_some() {
        return Err(Error::Data("embedding header must be \"N e\"".into()));
    }

    let mut embeddings = DocEmbeddings::new(e, path.display().to_string());
    for (i, line) in lines {
        let line_no = i + 1;
        let line = line.map_err(|err| Error::io(path.display().to_string(), err))?;
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split_whitespace();
        let id = fields.next().expect("nonempty line has a first field");
        let values: Vec<f32> = fields
            .map(|s| {
                s.parse::<f32>().map_err(|_| {
                    Error::Data(format!("line {line_no}: non-numeric field {s:?}"))
                })
            })
            .collect::<Result<_>>()?;
        if values.len() != e {
            return Err(Error::Data(format!(
                "line {line_no}: {} values, expected {e}",
                values.len()
            )));
        }
        embeddings
            .insert(id, values)
            .map_err(|err| Error::Data(format!("line {line_no}: {err}")))?;
    }
    if embeddings.len() != n {
        return Err(Error::Data(format!(
            "embedding file declares {n} rows but contains {}",
            embeddings.len()
        )));
    }
    Ok(embeddings)
}

/// Hyperparameters for fused-head training.
#[derive(Debug, Clone)]
pub struct FusedHyper {
    pub lr: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for FusedHyper {
    fn default() -> Self {
        FusedHyper {
            lr: 0.1,
            epochs: 5,
            seed: 42,
        }
    }
}

/// Hierarchical-softmax head over `[base document vector ; external
/// embedding]`, with per-half norm calibration scales.
#[derive(Debug, Clone, PartialEq)]
pub struct FusionHead {
    pub(crate) base_dim: usize,
    pub(crate) ext_dim: usize,
    pub(crate) scale_base: f32,
    pub(crate) scale_ext: f32,
    pub(crate) tree: HuffmanTree,
    pub(crate) source: String,
}

impl FusionHead {
    pub fn base_dim(&self) -> usize {
        self.base_dim
    }

    pub fn ext_dim(&self) -> usize {
        self.ext_dim
    }

    pub fn scales(&self) -> (f32, f32) {
        (self.scale_base, self.scale_ext)
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn tree(&self) -> &HuffmanTree {
        &self.tree
    }

    fn fused_vector(&self, base_vec: &[f64], external: &[f32]) -> Vec<f64> {
        let sb = f64::from(self.scale_base);
        let se = f64::from(self.scale_ext);
        base_vec
            .iter()
            .map(|v| v * sb)
            .chain(external.iter().map(|v| f64::from(*v) * se))
            .collect()
    }
}

fn l2_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn l2_norm_f32(v: &[f32]) -> f64 {
    v.iter().map(|x| f64::from(*x) * f64::from(*x)).sum::<f64>().sqrt()
}

/// Trains the fused head on frozen base vectors and external embeddings.
/// Every training document must have an embedding, keyed by document id.
pub fn train_fused(
    base: &ClassifierModel,
    embeddings: &DocEmbeddings,
    corpus: &Corpus,
    hyper: &FusedHyper,
) -> Result<(FusionHead, TrainLog)> {
    if !(hyper.lr > 0.0) || !hyper.lr.is_finite() {
        return Err(Error::Config(format!(
            "learning rate must be positive and finite, got {}",
            hyper.lr
        )));
    }
    let base_dim = base.hyper().dim;
    let ext_dim = embeddings.dim();

    let mut base_vecs = Vec::with_capacity(corpus.len());
    let mut ext_vecs: Vec<&[f32]> = Vec::with_capacity(corpus.len());
    for doc in corpus.documents() {
        base_vecs.push(base.doc_vector(&doc.tokens).0);
        ext_vecs.push(embeddings.get(&doc.id).ok_or_else(|| {
            Error::Data(format!("missing embedding for document id {:?}", doc.id))
        })?);
    }

    let n = corpus.len() as f64;
    let mean_base: f64 = base_vecs.iter().map(|v| l2_norm(v)).sum::<f64>() / n;
    let mean_ext: f64 = ext_vecs.iter().map(|v| l2_norm_f32(v)).sum::<f64>() / n;
    let scale_base = if mean_base > 0.0 { 1.0 / mean_base } else { 1.0 } as f32;
    let scale_ext = if mean_ext > 0.0 { 1.0 / mean_ext } else { 1.0 } as f32;

    let label_freqs: Vec<u64> = corpus.label_counts().iter().map(|&c| c as u64).collect();
    let tree = HuffmanTree::build(&label_freqs, base_dim + ext_dim)?;
    let mut head = FusionHead {
        base_dim,
        ext_dim,
        scale_base,
        scale_ext,
        tree,
        source: embeddings.source().to_string(),
    };

    let fused: Vec<Vec<f64>> = base_vecs
        .iter()
        .zip(ext_vecs.iter())
        .map(|(b, e)| head.fused_vector(b, e))
        .collect();
    let labels: Vec<LabelId> = corpus.documents().iter().map(|d| d.label).collect();

    let total_updates = (hyper.epochs * fused.len()) as f64;
    let mut order: Vec<usize> = (0..fused.len()).collect();
    let mut shuffle_rng = stream_rng(hyper.seed, "fuse-shuffle");
    let mut log = TrainLog::default();
    let mut t = 0u64;

    for epoch in 0..hyper.epochs {
        order.shuffle(&mut shuffle_rng);
        let mut objective = 0.0;
        for &i in &order {
            let lr = hyper.lr * (1.0 - t as f64 / total_updates);
            let path = head.tree.path(labels[i]).to_vec();
            let bits: Vec<u8> = path.iter().map(|s| s.bit).collect();
            let thetas: Vec<Vec<f64>> = path
                .iter()
                .map(|s| head.tree.theta(s.node).iter().map(|&v| f64::from(v)).collect())
                .collect();
            let (log_prob, theta_grads, _) = path_log_prob_grads(&fused[i], &bits, &thetas);
            for (step, grad) in path.iter().zip(theta_grads.iter()) {
                let theta = head.tree.theta_mut(step.node);
                for (tv, g) in theta.iter_mut().zip(grad.iter()) {
                    *tv = (f64::from(*tv) + lr * g) as f32;
                }
            }
            objective += log_prob;
            t += 1;
            if !log_prob.is_finite() {
                return Err(Error::Numeric(format!(
                    "fused objective diverged at epoch {epoch}, update {t}: {log_prob}"
                )));
            }
        }
        log.epoch_objectives.push(objective / fused.len() as f64);
    }
    Ok((head, log))
}

/// Label probabilities from the fused representation.
pub fn predict_fused(
    head: &FusionHead,
    base: &ClassifierModel,
    tokens: &TokenSequence,
    external: &[f32],
) -> Result<Vec<f64>> {
    if base.hyper().dim != head.base_dim {
        return Err(Error::Data(format!(
            "base model dimension {} does not match head {}",
            base.hyper().dim,
            head.base_dim
        )));
    }
    if external.len() != head.ext_dim {
        return Err(Error::Data(format!(
            "external vector dimension {} does not match head {}",
            external.len(),
            head.ext_dim
        )));
    }
    let base_vec = base.doc_vector(tokens);
    let fused = head.fused_vector(base_vec.as_slice(), external);
    Ok(hs_predict(&head.tree, &fused))
}

/// Argmax label under the fused head.
pub fn predict_fused_label(
    head: &FusionHead,
    base: &ClassifierModel,
    tokens: &TokenSequence,
    external: &[f32],
) -> Result<LabelId> {
    let probs = predict_fused(head, base, tokens, external)?;
    let mut best = 0usize;
    for (i, p) in probs.iter().enumerate() {
        if *p > probs[best] {
            best = i;
        }
    }
    Ok(best as LabelId)
}
