//! Dataset ingestion and preprocessing.
//!
//! Reads the CSV dataset (columns configurable, defaults `Content`/`Label`),
//! normalizes and tokenizes the content, parses labels into a dense id table,
//! and produces stratified train/test splits.
//!
//! The tokenizer is intentionally simple and fully specified so that every
//! downstream statistic is reproducible bit-for-bit:
//!
//! 1. NFC-normalize the text.
//! 2. If emoticon stripping is on, drop codepoints in the documented emoji
//!    blocks (see [`is_emoticon_char`]); a stripped codepoint acts as a token
//!    boundary.
//! 3. Lowercase (full Unicode case mapping) when flagged.
//! 4. A token is a maximal run of alphanumeric characters; every other
//!    non-whitespace character is detached as a single-character token.
//! 5. Tokens on the stopword list are dropped.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use rand::seq::SliceRandom;
use unicode_normalization::UnicodeNormalization;

use crate::error::{Error, Result};
use crate::hash::Fnv1a64;
use crate::rng::stream_rng;

/// Dense label id, `0..K-1`.
pub type LabelId = u32;

/// One data row exactly as read from the source file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawRecord {
    pub content: String,
    pub label: String,
    /// 1-based ordinal of the data row (header excluded).
    pub row_index: usize,
}

/// A class label: dense id plus its name as it appears in the data.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Label {
    pub id: LabelId,
    pub name: String,
}

/// Bijective id <-> name table with ids dense from zero.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelTable {
    names: Vec<String>,
}

impl LabelTable {
    /// Builds a table from names in id order. Names must be distinct.
    pub fn from_names(names: Vec<String>) -> Result<Self> {
        let distinct: BTreeSet<&String> = names.iter().collect();
        if distinct.len() != names.len() {
            return Err(Error::Data("duplicate label name in label table".into()));
        }
        Ok(LabelTable { names })
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn name(&self, id: LabelId) -> Option<&str> {
        self.names.get(id as usize).map(String::as_str)
    }

    pub fn id_of(&self, name: &str) -> Option<LabelId> {
        self.names.iter().position(|n| n == name).map(|i| i as LabelId)
    }

    pub fn iter(&self) -> impl Iterator<Item = Label> + '_ {
        self.names.iter().enumerate().map(|(i, n)| Label {
            id: i as LabelId,
            name: n.clone(),
        })
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }
}

/// An ordered sequence of normalized tokens.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct TokenSequence {
    tokens: Vec<String>,
}

impl TokenSequence {
    pub fn new(tokens: Vec<String>) -> Self {
        debug_assert!(tokens.iter().all(|t| !t.is_empty()));
        TokenSequence { tokens }
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.tokens.iter().map(String::as_str)
    }

    pub fn join(&self, sep: &str) -> String {
        self.tokens.join(sep)
    }
}

impl From<Vec<String>> for TokenSequence {
    fn from(tokens: Vec<String>) -> Self {
        TokenSequence::new(tokens)
    }
}

impl FromIterator<String> for TokenSequence {
    fn from_iter<I: IntoIterator<Item = String>>(iter: I) -> Self {
        TokenSequence::new(iter.into_iter().collect())
    }
}

/// A preprocessed, labeled document.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    /// Stable id, by default the source row index as a decimal string.
    pub id: String,
    pub tokens: TokenSequence,
    pub label: LabelId,
}

/// Where a corpus came from and how it was preprocessed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Provenance {
    pub source: String,
    pub preprocess_digest: String,
}

/// A preprocessed, labeled document collection.
#[derive(Debug, Clone)]
pub struct Corpus {
    documents: Vec<Document>,
    labels: LabelTable,
    provenance: Provenance,
}

impl Corpus {
    /// Assembles a corpus, validating that it is nonempty and that every
    /// document's label is in the table.
    pub fn from_documents(
        documents: Vec<Document>,
        labels: LabelTable,
        provenance: Provenance,
    ) -> Result<Self> {
        if documents.is_empty() {
            return Err(Error::Data("corpus has no documents".into()));
        }
        for d in &documents {
            if d.label as usize >= labels.len() {
                return Err(Error::Data(format!(
                    "document {} has label id {} outside the label table",
                    d.id, d.label
                )));
            }
        }
        Ok(Corpus {
            documents,
            labels,
            provenance,
        })
    }

    /// Full load pipeline: read the CSV, preprocess every row, parse labels.
    pub fn load(
        path: &Path,
        schema: &ColumnSchema,
        config: &PreprocessConfig,
        expected_labels: Option<&[String]>,
    ) -> Result<Self> {
        let records = load_dataset(path, schema)?;
        let skeleton = parse_labels(&records, expected_labels)?;
        let documents = records
            .iter()
            .zip(skeleton.doc_labels.iter())
            .map(|(rec, &label)| Document {
                id: rec.row_index.to_string(),
                tokens: preprocess(&rec.content, config),
                label,
            })
            .collect();
        Corpus::from_documents(
            documents,
            skeleton.labels,
            Provenance {
                source: path.display().to_string(),
                preprocess_digest: config.digest(),
            },
        )
    }

    pub fn documents(&self) -> &[Document] {
        &self.documents
    }

    pub fn labels(&self) -> &LabelTable {
        &self.labels
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    /// Document count per label id.
    pub fn label_counts(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.labels.len()];
        for d in &self.documents {
            counts[d.label as usize] += 1;
        }
        counts
    }
}

/// Column-name mapping for the source CSV.
#[derive(Debug, Clone)]
pub struct ColumnSchema {
    pub content: String,
    pub label: String,
}

impl Default for ColumnSchema {
    fn default() -> Self {
        ColumnSchema {
            content: "Content".into(),
            label: "Label".into(),
        }
    }
}

/// Preprocessing switches. The digest of this config is recorded in corpus
/// provenance so runs can be matched to the exact preprocessing used.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PreprocessConfig {
    pub lowercase: bool,
    pub strip_emoticons: bool,
    pub stopwords: BTreeSet<String>,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        PreprocessConfig {
            lowercase: true,
            strip_emoticons: true,
            stopwords: BTreeSet::new(),
        }
    }
}

impl PreprocessConfig {
    /// Stable hex digest over flags and the sorted stopword list.
    pub fn digest(&self) -> String {
        let mut h = Fnv1a64::new();
        h.update(&[u8::from(self.lowercase), u8::from(self.strip_emoticons)]);
        for w in &self.stopwords {
            h.update(w.as_bytes());
            h.update(&[0xFF]);
        }
        format!("{:016x}", h.finish())
    }
}

/// Loads a stopword file: UTF-8, one token per line, blank lines ignored.
pub fn load_stopwords(path: &Path) -> Result<BTreeSet<String>> {
    let file = File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut words = BTreeSet::new();
    for line in BufReader::new(file).lines() {
        let line = line.map_err(|e| Error::io(path.display().to_string(), e))?;
        let token = line.trim();
        if !token.is_empty() {
            words.insert(token.to_string());
        }
    }
    Ok(words)
}

/// Reads the dataset CSV into raw records, one per data row, in file order.
pub fn load_dataset(path: &Path, schema: &ColumnSchema) -> Result<Vec<RawRecord>> {
    let file = File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(BufReader::new(file));

    let headers = reader
        .headers()
        .map_err(|e| Error::Data(format!("cannot read header row: {e}")))?
        .clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Data(format!("missing column {name:?} in header")))
    };
    let content_idx = col(&schema.content)?;
    let label_idx = col(&schema.label)?;

    let mut records = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let row_index = i + 1;
        let row = row.map_err(|e| Error::Data(format!("row {row_index}: {e}")))?;
        records.push(RawRecord {
            content: row
                .get(content_idx)
                .unwrap_or_default()
                .to_string(),
            label: row.get(label_idx).unwrap_or_default().to_string(),
            row_index,
        });
    }
    if records.is_empty() {
        return Err(Error::Data("no data rows".into()));
    }
    Ok(records)
}

/// Codepoints removed by emoticon stripping. The exact blocks, so results are
/// reproducible:
///
/// - U+1F300..U+1F5FF  miscellaneous symbols and pictographs
/// - U+1F600..U+1F64F  emoticons
/// - U+1F680..U+1F6FF  transport and map symbols
/// - U+1F900..U+1F9FF  supplemental symbols and pictographs
/// - U+1FA70..U+1FAFF  symbols and pictographs extended-A
/// - U+2600..U+26FF    miscellaneous symbols
/// - U+2700..U+27BF    dingbats
/// - U+1F1E6..U+1F1FF  regional indicators
/// - U+FE00..U+FE0F    variation selectors
/// - U+200D            zero-width joiner
/// - U+20E3            combining enclosing keycap
pub fn is_emoticon_char(c: char) -> bool {
    matches!(u32::from(c),
        0x1F300..=0x1F5FF
        | 0x1F600..=0x1F64F
        | 0x1F680..=0x1F6FF
        | 0x1F900..=0x1F9FF
        | 0x1FA70..=0x1FAFF
        | 0x2600..=0x26FF
        | 0x2700..=0x27BF
        | 0x1F1E6..=0x1F1FF
        | 0xFE00..=0xFE0F
        | 0x200D
        | 0x20E3)
}

/// Normalizes and tokenizes one document. Deterministic; empty input yields
/// an empty sequence.
pub fn preprocess(raw: &str, config: &PreprocessConfig) -> TokenSequence {
    let mut tokens: Vec<String> = Vec::new();
    let mut word = String::new();
    let emit = |tok: String, out: &mut Vec<String>| {
        if !tok.is_empty() && !config.stopwords.contains(&tok) {
            out.push(tok);
        }
    };

    for c in raw.nfc() {
        if config.strip_emoticons && is_emoticon_char(c) {
            emit(std::mem::take(&mut word), &mut tokens);
            continue;
        }
        let cased: Vec<char> = if config.lowercase {
            c.to_lowercase().collect()
        } else {
            vec![c]
        };
        for lc in cased {
            if lc.is_whitespace() {
                emit(std::mem::take(&mut word), &mut tokens);
            } else if lc.is_alphanumeric() {
                word.push(lc);
            } else {
                emit(std::mem::take(&mut word), &mut tokens);
                emit(lc.to_string(), &mut tokens);
            }
        }
    }
    emit(word, &mut tokens);
    TokenSequence::new(tokens)
}

/// Label table plus the per-record label assignment.
#[derive(Debug, Clone)]
pub struct CorpusSkeleton {
    pub labels: LabelTable,
    pub doc_labels: Vec<LabelId>,
    /// Document count per label id.
    pub counts: Vec<usize>,
}

/// Parses record labels into a dense table.
///
/// With `expected` declared, ids follow the declared order and any other
/// label is rejected. Without it, labels must be non-negative integers and
/// the distinct set must be exactly `0..K-1`.
pub fn parse_labels(
    records: &[RawRecord],
    expected: Option<&[String]>,
) -> Result<CorpusSkeleton> {
    let labels = match expected {
        Some(names) => LabelTable::from_names(names.to_vec())?,
        None => {
            let mut seen: BTreeSet<u32> = BTreeSet::new();
            for rec in records {
                let id: u32 = rec.label.trim().parse().map_err(|_| {
                    Error::Data(format!(
                        "row {}: label {:?} is not a non-negative integer",
                        rec.row_index, rec.label
                    ))
                })?;
                seen.insert(id);
            }
            let k = *seen.iter().next_back().unwrap_or(&0) + 1;
            for id in 0..k {
                if !seen.contains(&id) {
                    return Err(Error::Data(format!(
                        "label ids are not dense: {id} missing from 0..{k}"
                    )));
                }
            }
            LabelTable::from_names((0..k).map(|i| i.to_string()).collect())?
        }
    };

    let mut doc_labels = Vec::with_capacity(records.len());
    let mut counts = vec![0usize; labels.len()];
    for rec in records {
        let name = rec.label.trim();
        let id = labels.id_of(name).ok_or_else(|| {
            Error::Data(format!(
                "row {}: label {:?} outside the expected set {:?}",
                rec.row_index,
                rec.label,
                labels.names()
            ))
        })?;
        doc_labels.push(id);
        counts[id as usize] += 1;
    }

    if labels.len() < 2 {
        return Err(Error::Data(
            "need >= 2 labels for supervised training".into(),
        ));
    }
    Ok(CorpusSkeleton {
        labels,
        doc_labels,
        counts,
    })
}

/// Stratified train/test split. Per-label proportions are preserved within
/// one document; the two parts are disjoint, their union is the input, and
/// the result is deterministic for a fixed seed.
pub fn split(corpus: &Corpus, test_fraction: f64, seed: u64) -> Result<(Corpus, Corpus)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::Config(format!(
            "test fraction must be in (0,1), got {test_fraction}"
        )));
    }

    let mut groups: Vec<Vec<usize>> = vec![Vec::new(); corpus.labels().len()];
    for (i, d) in corpus.documents().iter().enumerate() {
        groups[d.label as usize].push(i);
    }

    let mut rng = stream_rng(seed, "split");
    let mut test_set = BTreeSet::new();
    for group in &mut groups {
        group.shuffle(&mut rng);
        let n_test = (test_fraction * group.len() as f64).round() as usize;
        test_set.extend(group.iter().take(n_test).copied());
    }

    if test_set.is_empty() {
        return Err(Error::Config(format!(
            "fraction {test_fraction} produces an empty test split"
        )));
    }
    if test_set.len() == corpus.len() {
        return Err(Error::Config(format!(
            "fraction {test_fraction} produces an empty train split"
        )));
    }

    let pick = |keep: &dyn Fn(usize) -> bool| -> Vec<Document> {
        corpus
            .documents()
            .iter()
            .enumerate()
            .filter(|(i, _)| keep(*i))
            .map(|(_, d)| d.clone())
            .collect()
    };
    let train = Corpus::from_documents(
        pick(&|i| !test_set.contains(&i)),
        corpus.labels().clone(),
        corpus.provenance().clone(),
    )?;
    let test = Corpus::from_documents(
        pick(&|i| test_set.contains(&i)),
        corpus.labels().clone(),
        corpus.provenance().clone(),
    )?;
    Ok((train, test))
}
