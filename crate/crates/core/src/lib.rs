//! Core library of the violent-text detection toolkit.
//!
//! The pipeline runs in stages, each housed in its own module:
//!
//! - [`corpus`] — CSV ingestion, preprocessing (emoticon stripping,
//!   tokenization, stopword removal), label parsing, stratified splits.
//! - [`features`] — per-term contingency counts and the feature-selection
//!   statistics built on them (document frequency, mutual information,
//!   information gain, chi-square).
//! - [`keywords`] — chi-square/frequency/part-of-speech/position keyword
//!   scoring and ranked extraction.
//! - [`lm`] / [`rules`] — add-k smoothed n-gram language models and
//!   keyword-pattern rule matching with a two-model log-likelihood-ratio
//!   constraint.
//! - [`vocab`], [`huffman`], [`classifier`] — the supervised classifier:
//!   frequency-pruned vocabulary, label Huffman tree, averaged word plus
//!   hashed n-gram embeddings, hierarchical-softmax training by SGD.
//! - [`fusion`] — masking-based corpus augmentation, external document
//!   embeddings, and the fused classification head.
//! - [`eval`] — confusion matrices, accuracy/precision/recall/F1, and the
//!   multi-model comparison harness.
//! - [`model_io`] — the versioned `VTXT` binary container holding trained
//!   classifiers, language models, and fusion heads.

pub mod classifier;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod features;
pub mod fusion;
pub mod hash;
pub mod huffman;
pub mod keywords;
pub mod lm;
pub mod model_io;
pub mod rng;
pub mod rules;
pub mod vocab;

pub use classifier::{ClassifierModel, DocVector, Hyperparams, TrainLog, TrainMode};
pub use corpus::{
    Corpus, Document, Label, LabelId, LabelTable, PreprocessConfig, RawRecord, TokenSequence,
};
pub use error::{Error, Result};
pub use eval::{ComparisonTable, ConfusionMatrix, MetricsMode, MetricsReport};
pub use features::{ContingencyTable, FeatureMethod, MiForm, TermScore};
pub use fusion::{DocEmbeddings, FusionHead, MaskAction, MaskedSequence};
pub use huffman::HuffmanTree;
pub use keywords::{KeywordScore, PosLexicon, PosTag, PositionRule};
pub use lm::NGramModel;
pub use model_io::ModelFile;
pub use rules::{Rule, RuleMatch, Slot};
pub use vocab::Vocabulary;
