//! The versioned `VTXT` binary model container.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic  "VTXT"
//! u16    format version (currently 1)
//! u16    section count
//! per section:
//!   [u8;4] tag      "CLSF" classifier | "NGLM" n-gram model | "FUSE" fusion head
//!   u64    payload length
//!   bytes  payload
//! ```
//!
//! The classifier payload holds hyperparameters, the label table, the
//! vocabulary (length-prefixed UTF-8 tokens with frequencies), the embedding
//! matrix (row-major 32-bit floats), and the label tree in preorder (node
//! type byte, then label id for leaves or the parameter vector for internal
//! nodes). A container may hold several language models (for example one per
//! class) and a fusion head; a fusion head is only valid alongside the base
//! classifier it was trained against.
//!
//! Serialization is canonical: saving a loaded model reproduces the file
//! byte for byte.

use std::collections::BTreeMap;
use std::path::Path;

use crate::classifier::{ClassifierModel, EmbeddingMatrix, Hyperparams};
use crate::corpus::LabelTable;
use crate::error::{Error, Result};
use crate::fusion::FusionHead;
use crate::huffman::{HuffmanTree, Node, NodeKind};
use crate::lm::{ContextCounts, NGramModel};
use crate::vocab::Vocabulary;

pub const MAGIC: [u8; 4] = *b"VTXT";
pub const FORMAT_VERSION: u16 = 1;

const TAG_CLASSIFIER: [u8; 4] = *b"CLSF";
const TAG_LM: [u8; 4] = *b"NGLM";
const TAG_FUSION: [u8; 4] = *b"FUSE";

#[derive(Default)]
struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }
    fn u16(&mut self, v: u16) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    fn f32(&mut self, v: f32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    fn string(&mut self, s: &str) {
        self.u32(s.len() as u32);
        self.buf.extend_from_slice(s.as_bytes());
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(buf: &'a [u8]) -> Self {
        Reader { buf, pos: 0 }
    }

    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(Error::Truncated(format!(
                "{what} needs {n} bytes at offset {}",
                self.pos
            )));
        }
        let slice = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(slice)
    }

    fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }
    fn u16(&mut self, what: &str) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().unwrap()))
    }
    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }
    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }
    fn f32(&mut self, what: &str) -> Result<f32> {
        Ok(f32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }
    fn f64(&mut self, what: &str) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }
    fn string(&mut self, what: &str) -> Result<String> {
        let len = self.u32(what)? as usize;
        let bytes = self.take(len, what)?;
        String::from_utf8(bytes.to_vec())
            .map_err(|_| Error::Data(format!("{what}: invalid UTF-8")))
    }

    fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }
}

fn write_tree(w: &mut Writer, tree: &HuffmanTree) {
    fn rec(w: &mut Writer, tree: &HuffmanTree, idx: usize) {
        match &tree.nodes[idx].kind {
            NodeKind::Leaf(label) => {
                w.u8(0);
                w.u32(*label);
            }
            NodeKind::Internal { left, right } => {
                w.u8(1);
                for v in tree.theta(tree.internal_index[idx]) {
                    w.f32(*v);
                }
                rec(w, tree, *left);
                rec(w, tree, *right);
            }
        }
    }
    rec(w, tree, tree.root);
}

fn read_tree(r: &mut Reader, dim: usize) -> Result<HuffmanTree> {
    fn rec(
        r: &mut Reader,
        dim: usize,
        nodes: &mut Vec<Node>,
        thetas: &mut Vec<f32>,
    ) -> Result<usize> {
        match r.u8("tree node type")? {
            0 => {
                let label = r.u32("leaf label id")?;
                nodes.push(Node {
                    kind: NodeKind::Leaf(label),
                });
                Ok(nodes.len() - 1)
            }
            1 => {
                let idx = nodes.len();
                nodes.push(Node {
                    kind: NodeKind::Internal { left: 0, right: 0 },
                });
                for _ in 0..dim {
                    thetas.push(r.f32("node parameter")?);
                }
                let left = rec(r, dim, nodes, thetas)?;
                let right = rec(r, dim, nodes, thetas)?;
                nodes[idx].kind = NodeKind::Internal { left, right };
                Ok(idx)
            }
            other => Err(Error::Data(format!("bad tree node type {other}"))),
        }
    }
    let mut nodes = Vec::new();
    let mut thetas = Vec::new();
    let root = rec(r, dim, &mut nodes, &mut thetas)?;
    HuffmanTree::from_parts(nodes, root, thetas, dim)
}

fn write_classifier(model: &ClassifierModel) -> Vec<u8> {
    let mut w = Writer::default();
    let h = &model.hyper;
    w.u32(h.dim as u32);
    w.u32(h.ngram_min as u32);
    w.u32(h.ngram_max as u32);
    w.u64(h.buckets as u64);
    w.f64(h.lr);
    w.u32(h.epochs as u32);
    w.u64(h.min_count);
    w.u64(h.seed);

    w.u32(model.labels.len() as u32);
    for name in model.labels.names() {
        w.string(name);
    }

    w.u32(model.vocab.tokens.len() as u32);
    for (token, freq) in model.vocab.tokens.iter().zip(model.vocab.freqs.iter()) {
        w.string(token);
        w.u64(*freq);
    }
    w.u64(model.vocab.min_count);

    w.u64(model.embeddings.rows as u64);
    w.u32(model.embeddings.dim as u32);
    for v in &model.embeddings.data {
        w.f32(*v);
    }

    write_tree(&mut w, &model.tree);
    w.buf
}

fn read_classifier(bytes: &[u8]) -> Result<ClassifierModel> {
    let mut r = Reader::new(bytes);
    let hyper = Hyperparams {
        dim: r.u32("dim")? as usize,
        ngram_min: r.u32("ngram_min")? as usize,
        ngram_max: r.u32("ngram_max")? as usize,
        buckets: r.u64("buckets")? as usize,
        lr: r.f64("lr")?,
        epochs: r.u32("epochs")? as usize,
        min_count: r.u64("min_count")?,
        seed: r.u64("seed")?,
    };

    let n_labels = r.u32("label count")? as usize;
    let mut names = Vec::with_capacity(n_labels);
    for _ in 0..n_labels {
        names.push(r.string("label name")?);
    }
    let labels = LabelTable::from_names(names)?;

    let n_tokens = r.u32("vocabulary size")? as usize;
    let mut tokens = Vec::with_capacity(n_tokens);
    let mut freqs = Vec::with_capacity(n_tokens);
    for _ in 0..n_tokens {
        tokens.push(r.string("vocabulary token")?);
        freqs.push(r.u64("token frequency")?);
    }
    let vocab_min_count = r.u64("vocabulary min_count")?;
    let vocab = Vocabulary::from_parts(tokens, freqs, vocab_min_count);

    let rows = r.u64("matrix rows")? as usize;
    let dim = r.u32("matrix dim")? as usize;
    if dim != hyper.dim {
        return Err(Error::Data(format!(
            "matrix dimension {dim} does not match hyperparameter {}",
            hyper.dim
        )));
    }
    let expected_rows = vocab.len()
        + if hyper.ngrams_enabled() {
            hyper.buckets
        } else {
            0
        };
    if rows != expected_rows {
        return Err(Error::Data(format!(
            "matrix has {rows} rows, expected {expected_rows}"
        )));
    }
    let mut data = Vec::with_capacity(rows * dim);
    for _ in 0..rows * dim {
        data.push(r.f32("matrix value")?);
    }
    let embeddings = EmbeddingMatrix { rows, dim, data };

    let tree = read_tree(&mut r, hyper.dim)?;
    if tree.num_labels() != labels.len() {
        return Err(Error::Data(format!(
            "tree has {} leaves for {} labels",
            tree.num_labels(),
            labels.len()
        )));
    }
    if r.remaining() != 0 {
        return Err(Error::Data(format!(
            "classifier section has {} trailing bytes",
            r.remaining()
        )));
    }
    Ok(ClassifierModel {
        labels,
        vocab,
        embeddings,
        tree,
        hyper,
    })
}

fn write_lm(model: &NGramModel) -> Vec<u8> {
    let mut w = Writer::default();
    w.u32(model.order as u32);
    w.f64(model.k);
    w.u64(model.min_count);
    w.u64(model.total_tokens);
    w.string(&model.descriptor);

    w.u32(model.vocab.len() as u32);
    for token in &model.vocab {
        w.string(token);
    }

    for table in &model.tables {
        w.u64(table.len() as u64);
        for (context, counts) in table {
            for id in context {
                w.u32(*id);
            }
            w.u64(counts.total);
            w.u32(counts.words.len() as u32);
            for (word, count) in &counts.words {
                w.u32(*word);
                w.u64(*count);
            }
        }
    }
    w.buf
}

fn read_lm(bytes: &[u8]) -> Result<NGramModel> {
    let mut r = Reader::new(bytes);
    let order = r.u32("lm order")? as usize;
    if order == 0 {
        return Err(Error::Data("lm order 0 in model file".into()));
    }
    let k = r.f64("lm smoothing")?;
    let min_count = r.u64("lm min_count")?;
    let total_tokens = r.u64("lm total tokens")?;
    let descriptor = r.string("lm descriptor")?;

    let n_tokens = r.u32("lm vocabulary size")? as usize;
    let mut vocab = Vec::with_capacity(n_tokens);
    for _ in 0..n_tokens {
        vocab.push(r.string("lm token")?);
    }
    let token_ids = vocab
        .iter()
        .enumerate()
        .map(|(i, t)| (t.clone(), 3 + i as u32))
        .collect();

    let mut tables = Vec::with_capacity(order);
    for m in 1..=order {
        let n_contexts = r.u64("lm context count")? as usize;
        let mut table = BTreeMap::new();
        for _ in 0..n_contexts {
            let mut context = Vec::with_capacity(m - 1);
            for _ in 0..m - 1 {
                context.push(r.u32("lm context id")?);
            }
            let total = r.u64("lm context total")?;
            let n_words = r.u32("lm continuation count")? as usize;
            let mut words = BTreeMap::new();
            for _ in 0..n_words {
                let word = r.u32("lm continuation id")?;
                let count = r.u64("lm continuation count value")?;
                words.insert(word, count);
            }
            table.insert(context, ContextCounts { total, words });
        }
        tables.push(table);
    }
    if r.remaining() != 0 {
        return Err(Error::Data(format!(
            "lm section has {} trailing bytes",
            r.remaining()
        )));
    }
    Ok(NGramModel {
        order,
        k,
        min_count,
        vocab,
        token_ids,
        tables,
        total_tokens,
        descriptor,
    })
}

fn write_fusion(head: &FusionHead) -> Vec<u8> {
    let mut w = Writer::default();
    w.u32(head.base_dim as u32);
    w.u32(head.ext_dim as u32);
    w.f32(head.scale_base);
    w.f32(head.scale_ext);
    w.string(&head.source);
    write_tree(&mut w, &head.tree);
    w.buf
}

fn read_fusion(bytes: &[u8]) -> Result<FusionHead> {
    let mut r = Reader::new(bytes);
    let base_dim = r.u32("fusion base dim")? as usize;
    let ext_dim = r.u32("fusion external dim")? as usize;
    let scale_base = r.f32("fusion base scale")?;
    let scale_ext = r.f32("fusion external scale")?;
    let source = r.string("fusion source")?;
    let tree = read_tree(&mut r, base_dim + ext_dim)?;
    if r.remaining() != 0 {
        return Err(Error::Data(format!(
            "fusion section has {} trailing bytes",
            r.remaining()
        )));
    }
    Ok(FusionHead {
        base_dim,
        ext_dim,
        scale_base,
        scale_ext,
        tree,
        source,
    })
}

/// The contents of one model file: at most one classifier, any number of
/// language models, at most one fusion head.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ModelFile {
    pub classifier: Option<ClassifierModel>,
    pub lms: Vec<NGramModel>,
    pub fusion: Option<FusionHead>,
}

impl ModelFile {
    pub fn with_classifier(model: ClassifierModel) -> Self {
        ModelFile {
            classifier: Some(model),
            ..ModelFile::default()
        }
    }

    pub fn with_lm(model: NGramModel) -> Self {
        ModelFile {
            lms: vec![model],
            ..ModelFile::default()
        }
    }

    /// Canonical byte encoding. Sections are written classifier first, then
    /// language models in order, then the fusion head.
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        if self.fusion.is_some() && self.classifier.is_none() {
            return Err(Error::Data(
                "a fusion head needs its base classifier in the same container".into(),
            ));
        }
        let mut sections: Vec<([u8; 4], Vec<u8>)> = Vec::new();
        if let Some(model) = &self.classifier {
            sections.push((TAG_CLASSIFIER, write_classifier(model)));
        }
        for lm in &self.lms {
            sections.push((TAG_LM, write_lm(lm)));
        }
        if let Some(head) = &self.fusion {
            sections.push((TAG_FUSION, write_fusion(head)));
        }

        let mut w = Writer::default();
        w.buf.extend_from_slice(&MAGIC);
        w.u16(FORMAT_VERSION);
        w.u16(sections.len() as u16);
        for (tag, payload) in sections {
            w.buf.extend_from_slice(&tag);
            w.u64(payload.len() as u64);
            w.buf.extend_from_slice(&payload);
        }
        Ok(w.buf)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        let magic = r
            .take(4, "magic")
            .map_err(|_| Error::NotAModelFile)?;
        if magic != MAGIC {
            return Err(Error::NotAModelFile);
        }
        let version = r.u16("format version")?;
        if version != FORMAT_VERSION {
            return Err(Error::UnsupportedVersion(version));
        }
        let n_sections = r.u16("section count")?;

        let mut file = ModelFile::default();
        for _ in 0..n_sections {
            let tag: [u8; 4] = r.take(4, "section tag")?.try_into().unwrap();
            let len = r.u64("section length")? as usize;
            let payload = r.take(len, "section payload")?;
            match tag {
                TAG_CLASSIFIER => {
                    if file.classifier.is_some() {
                        return Err(Error::Data("duplicate classifier section".into()));
                    }
                    file.classifier = Some(read_classifier(payload)?);
                }
                TAG_LM => file.lms.push(read_lm(payload)?),
                TAG_FUSION => {
                    if file.fusion.is_some() {
                        return Err(Error::Data("duplicate fusion section".into()));
                    }
                    file.fusion = Some(read_fusion(payload)?);
                }
                other => {
                    return Err(Error::Data(format!(
                        "unknown section tag {:?}",
                        String::from_utf8_lossy(&other)
                    )))
                }
            }
        }
        if r.remaining() != 0 {
            return Err(Error::Data(format!(
                "{} trailing bytes after the last section",
                r.remaining()
            )));
        }
        if let (Some(head), Some(base)) = (&file.fusion, &file.classifier) {
            if head.base_dim != base.hyper().dim {
                return Err(Error::Data(format!(
                    "fusion head base dimension {} does not match classifier {}",
                    head.base_dim,
                    base.hyper().dim
                )));
            }
        }
        if file.fusion.is_some() && file.classifier.is_none() {
            return Err(Error::Data(
                "fusion head present without its base classifier".into(),
            ));
        }
        Ok(file)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let bytes = self.to_bytes()?;
        std::fs::write(path, bytes).map_err(|e| Error::io(path.display().to_string(), e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes =
            std::fs::read(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        ModelFile::from_bytes(&bytes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifier::{separable_corpus, Hyperparams, TrainLog};
    use crate::corpus::TokenSequence;
    use crate::fusion::{train_fused, DocEmbeddings, FusedHyper};
    use crate::lm::{train_lm, LmOptions};

    fn trained_model() -> (ClassifierModel, TrainLog) {
        let corpus = separable_corpus(15, 6, 31);
        ClassifierModel::fit(
            &corpus,
            Hyperparams {
                dim: 8,
                epochs: 2,
                min_count: 1,
                buckets: 128,
                ..Hyperparams::default()
            },
        )
        .unwrap()
    }

    #[test]
    fn classifier_round_trip_is_byte_exact() {
        let (model, _) = trained_model();
        let file = ModelFile::with_classifier(model);
        let bytes = file.to_bytes().unwrap();
        let loaded = ModelFile::from_bytes(&bytes).unwrap();
        let bytes2 = loaded.to_bytes().unwrap();
        assert_eq!(bytes, bytes2);
    }

    #[test]
    fn predictions_survive_round_trip_bitwise() {
        let (model, _) = trained_model();
        let file = ModelFile::with_classifier(model);
        let bytes = file.to_bytes().unwrap();
        let loaded = ModelFile::from_bytes(&bytes).unwrap();
        let m1 = file.classifier.as_ref().unwrap();
        let m2 = loaded.classifier.as_ref().unwrap();
        let corpus = separable_corpus(15, 6, 31);
        for doc in corpus.documents() {
            assert_eq!(m1.predict(&doc.tokens), m2.predict(&doc.tokens));
        }
    }

    #[test]
    fn bad_magic_version_truncation_reported_distinctly() {
        let (model, _) = trained_model();
        let bytes = ModelFile::with_classifier(model).to_bytes().unwrap();

        let mut corrupt = bytes.clone();
        corrupt[0] = b'X';
        assert!(matches!(
            ModelFile::from_bytes(&corrupt),
            Err(Error::NotAModelFile)
        ));

        let mut newer = bytes.clone();
        newer[4] = 99;
        assert!(matches!(
            ModelFile::from_bytes(&newer),
            Err(Error::UnsupportedVersion(99))
        ));

        let truncated = &bytes[..bytes.len() - 7];
        assert!(matches!(
            ModelFile::from_bytes(truncated),
            Err(Error::Truncated(_))
        ));

        assert!(matches!(
            ModelFile::from_bytes(b"VT"),
            Err(Error::NotAModelFile)
        ));
    }

    #[test]
    fn full_container_round_trip() {
        let corpus = separable_corpus(10, 6, 33);
        let (model, _) = ClassifierModel::fit(
            &corpus,
            Hyperparams {
                dim: 6,
                epochs: 1,
                min_count: 1,
                buckets: 64,
                ..Hyperparams::default()
            },
        )
        .unwrap();
        let lm_a = train_lm(&corpus, &LmOptions::default()).unwrap();
        let lm_b = train_lm(
            &corpus,
            &LmOptions {
                order: 3,
                descriptor: "class=1".into(),
                ..LmOptions::default()
            },
        )
        .unwrap();
        let mut emb = DocEmbeddings::new(3, "test");
        for doc in corpus.documents() {
            emb.insert(doc.id.clone(), vec![0.5, -1.0, 2.0]).unwrap();
        }
        let (head, _) = train_fused(&model, &emb, &corpus, &FusedHyper::default()).unwrap();

        let file = ModelFile {
            classifier: Some(model),
            lms: vec![lm_a, lm_b],
            fusion: Some(head),
        };
        let bytes = file.to_bytes().unwrap();
        let loaded = ModelFile::from_bytes(&bytes).unwrap();
        // node indices may be renumbered on load; byte encoding is canonical
        assert_eq!(bytes, loaded.to_bytes().unwrap());
        assert_eq!(loaded.lms, file.lms);
        assert_eq!(loaded.lms[1].descriptor(), "class=1");

        // language model scoring survives the round trip bit-for-bit
        let sentence: TokenSequence =
            ["calm0", "calm1"].iter().map(|s| s.to_string()).collect();
        assert_eq!(
            file.lms[0].sentence_logprob(&sentence).unwrap(),
            loaded.lms[0].sentence_logprob(&sentence).unwrap()
        );
    }

    #[test]
    fn fusion_without_classifier_is_rejected() {
        let corpus = separable_corpus(10, 6, 34);
        let (model, _) = ClassifierModel::fit(
            &corpus,
            Hyperparams {
                dim: 6,
                epochs: 1,
                min_count: 1,
                buckets: 64,
                ..Hyperparams::default()
            },
        )
        .unwrap();
        let mut emb = DocEmbeddings::new(2, "test");
        for doc in corpus.documents() {
            emb.insert(doc.id.clone(), vec![0.0, 1.0]).unwrap();
        }
        let (head, _) = train_fused(&model, &emb, &corpus, &FusedHyper::default()).unwrap();
        let file = ModelFile {
            classifier: None,
            lms: vec![],
            fusion: Some(head),
        };
        assert!(file.to_bytes().is_err());
    }
}
