//! Confusion-matrix metrics and the multi-model comparison harness.
//!
//! Accuracy, precision, recall, and F1 are computed exactly from integer
//! counts. Zero denominators follow the documented convention: precision or
//! recall with denominator 0 reports 0, and F1 reports 0 when precision +
//! recall = 0. Binary mode (class 1 positive by default) matches how the
//! comparison tables in this domain are usually presented; macro mode
//! averages per-class values unweighted for multi-class work.

use std::fmt::Write as _;

use serde::Serialize;

use crate::corpus::{Corpus, Document, LabelId};
use crate::error::{Error, Result};

/// K x K count matrix, entry (gold, predicted).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    k: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    /// Tabulates (prediction, gold) pairs. Lengths must match and be
    /// nonempty; labels must be `< k`.
    pub fn from_pairs(predictions: &[LabelId], gold: &[LabelId], k: usize) -> Result<Self> {
        if predictions.len() != gold.len() {
            return Err(Error::Data(format!(
                "{} predictions vs {} gold labels",
                predictions.len(),
                gold.len()
            )));
        }
        if predictions.is_empty() {
            return Err(Error::Data("cannot evaluate zero documents".into()));
        }
        let mut counts = vec![0u64; k * k];
        for (&p, &g) in predictions.iter().zip(gold.iter()) {
            if (p as usize) >= k || (g as usize) >= k {
                return Err(Error::Data(format!(
                    "label outside 0..{k}: prediction {p}, gold {g}"
                )));
            }
            counts[g as usize * k + p as usize] += 1;
        }
        Ok(ConfusionMatrix { k, counts })
    }

    pub fn from_counts(k: usize, counts: Vec<u64>) -> Result<Self> {
        if counts.len() != k * k {
            return Err(Error::Data(format!(
                "expected {} counts for a {k}x{k} matrix, got {}",
                k * k,
                counts.len()
            )));
        }
        Ok(ConfusionMatrix { k, counts })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn count(&self, gold: LabelId, predicted: LabelId) -> u64 {
        self.counts[gold as usize * self.k + predicted as usize]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn diagonal(&self) -> u64 {
        (0..self.k).map(|i| self.counts[i * self.k + i]).sum()
    }

    /// (TP, FP, FN, TN) with the given class as positive.
    pub fn binary_counts(&self, positive: LabelId) -> (u64, u64, u64, u64) {
        let mut tp = 0;
        let mut fp = 0;
        let mut fn_ = 0;
        let mut tn = 0;
        for gold in 0..self.k {
            for pred in 0..self.k {
                let n = self.counts[gold * self.k + pred];
                let gold_pos = gold == positive as usize;
                let pred_pos = pred == positive as usize;
                match (gold_pos, pred_pos) {
                    (true, true) => tp += n,
                    (false, true) => fp += n,
                    (true, false) => fn_ += n,
                    (false, false) => tn += n,
                }
            }
        }
        (tp, fp, fn_, tn)
    }
}

/// How precision/recall/F1 are aggregated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MetricsMode {
    Binary { positive: LabelId },
    Macro,
}

/// Per-class precision/recall/F1.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassMetrics {
    pub label: LabelId,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// The four headline metrics plus the per-class breakdown.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub per_class: Vec<ClassMetrics>,
    pub mode: MetricsMode,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn f1_of(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

/// Computes accuracy, precision, recall, and F1 from the matrix.
pub fn metrics(matrix: &ConfusionMatrix, mode: MetricsMode) -> Result<MetricsReport> {
    let total = matrix.total();
    if total == 0 {
        return Err(Error::Data("empty confusion matrix".into()));
    }
    let accuracy = matrix.diagonal() as f64 / total as f64;

    let per_class: Vec<ClassMetrics> = (0..matrix.k())
        .map(|c| {
            let (tp, fp, fn_, _) = matrix.binary_counts(c as LabelId);
            let precision = ratio(tp, tp + fp);
            let recall = ratio(tp, tp + fn_);
            ClassMetrics {
                label: c as LabelId,
                precision,
                recall,
                f1: f1_of(precision, recall),
            }
        })
        .collect();

    let (precision, recall, f1) = match mode {
        MetricsMode::Binary { positive } => {
            if positive as usize >= matrix.k() {
                return Err(Error::Config(format!(
                    "positive class {positive} outside 0..{}",
                    matrix.k()
                )));
            }
            let c = &per_class[positive as usize];
            (c.precision, c.recall, c.f1)
        }
        MetricsMode::Macro => {
            let k = per_class.len() as f64;
            let precision = per_class.iter().map(|c| c.precision).sum::<f64>() / k;
            let recall = per_class.iter().map(|c| c.recall).sum::<f64>() / k;
            let f1 = per_class.iter().map(|c| c.f1).sum::<f64>() / k;
            (precision, recall, f1)
        }
    };

    Ok(MetricsReport {
        accuracy,
        precision,
        recall,
        f1,
        per_class,
        mode,
    })
}

/// Percent with one decimal, rounded half up: the presentation used by the
/// comparison table.
pub fn format_percent(x: f64) -> String {
    format!("{:.1}", (x * 1000.0).round() / 10.0)
}

/// One comparison row: either a metrics report or a diagnostic.
#[derive(Debug, Clone)]
pub struct ComparisonRow {
    pub name: String,
    pub metrics: Option<MetricsReport>,
    pub error: Option<String>,
    /// Flags for (accuracy, precision, recall, f1): best in column.
    pub best: [bool; 4],
}

/// Model-by-model comparison over one test corpus.
#[derive(Debug, Clone)]
pub struct ComparisonTable {
    pub rows: Vec<ComparisonRow>,
}

/// A named prediction function; it sees the whole document so that
/// predictors keyed by document id (external embeddings) work too.
pub type NamedPredictor<'a> = (String, Box<dyn Fn(&Document) -> Result<LabelId> + 'a>);

/// Evaluates every named predictor on the test corpus. A predictor failing
/// on any document aborts its own row with a diagnostic; other rows are
/// unaffected. Row order equals input order.
pub fn compare(
    models: &[NamedPredictor],
    test: &Corpus,
    mode: MetricsMode,
) -> Result<ComparisonTable> {
    if models.is_empty() {
        return Err(Error::Config("need at least one model to compare".into()));
    }
    if test.is_empty() {
        return Err(Error::Data("empty test corpus".into()));
    }
    let gold: Vec<LabelId> = test.documents().iter().map(|d| d.label).collect();
    let k = test.labels().len();

    let mut rows: Vec<ComparisonRow> = Vec::with_capacity(models.len());
    for (name, predict) in models {
        let mut predictions = Vec::with_capacity(test.len());
        let mut failure: Option<String> = None;
        for doc in test.documents() {
            match predict(doc) {
                Ok(label) => predictions.push(label),
                Err(e) => {
                    failure = Some(format!("document {}: {e}", doc.id));
                    break;
                }
            }
        }
        let row = match failure {
            Some(diagnostic) => ComparisonRow {
                name: name.clone(),
                metrics: None,
                error: Some(diagnostic),
                best: [false; 4],
            },
            None => {
                let matrix = ConfusionMatrix::from_pairs(&predictions, &gold, k)?;
                ComparisonRow {
                    name: name.clone(),
                    metrics: Some(metrics(&matrix, mode)?),
                    error: None,
                    best: [false; 4],
                }
            }
        };
        rows.push(row);
    }

    // flag best full-precision value per column; ties share the flag
    for col in 0..4 {
        let value = |m: &MetricsReport| match col {
            0 => m.accuracy,
            1 => m.precision,
            2 => m.recall,
            _ => m.f1,
        };
        let best = rows
            .iter()
            .filter_map(|r| r.metrics.as_ref().map(&value))
            .fold(f64::NEG_INFINITY, f64::max);
        for row in rows.iter_mut() {
            if let Some(m) = &row.metrics {
                row.best[col] = value(m) == best;
            }
        }
    }
    Ok(ComparisonTable { rows })
}

impl ComparisonTable {
    /// Aligned plain-text table; the best value per column is starred.
    pub fn render_text(&self) -> String {
        let name_width = self
            .rows
            .iter()
            .map(|r| r.name.len())
            .chain(["Model".len()])
            .max()
            .unwrap_or(5);
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<name_width$}  {:>8}  {:>8}  {:>8}  {:>8}",
            "Model", "Acc/%", "Pre/%", "Recall/%", "F1/%"
        );
        for row in &self.rows {
            match (&row.metrics, &row.error) {
                (Some(m), _) => {
                    let cell = |v: f64, flagged: bool| {
                        let s = format_percent(v);
                        if flagged {
                            format!("{s}*")
                        } else {
                            s
                        }
                    };
                    let _ = writeln!(
                        out,
                        "{:<name_width$}  {:>8}  {:>8}  {:>8}  {:>8}",
                        row.name,
                        cell(m.accuracy, row.best[0]),
                        cell(m.precision, row.best[1]),
                        cell(m.recall, row.best[2]),
                        cell(m.f1, row.best[3]),
                    );
                }
                (None, Some(err)) => {
                    let _ = writeln!(out, "{:<name_width$}  FAILED: {err}", row.name);
                }
                (None, None) => unreachable!("row without metrics must carry an error"),
            }
        }
        out
    }

    /// CSV rows `model,acc,pre,recall,f1` in percent, one decimal. Failed
    /// rows are omitted (their diagnostics belong to the text rendering).
    pub fn render_csv(&self) -> String {
        let mut out = String::from("model,acc,pre,recall,f1\n");
        for row in &self.rows {
            if let Some(m) = &row.metrics {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{}",
                    row.name,
                    format_percent(m.accuracy),
                    format_percent(m.precision),
                    format_percent(m.recall),
                    format_percent(m.f1),
                );
            }
        }
        out
    }

    /// JSON with full-precision ratios.
    pub fn render_json(&self) -> Result<String> {
        #[derive(Serialize)]
        struct JsonRow<'a> {
            model: &'a str,
            #[serde(skip_serializing_if = "Option::is_none")]
            accuracy: Option<f64>,
            #[serde(skip_serializing_if = "Option::is_none")]
            precision: Option<f64>,
            #[serde(skip_serializing_if = "Option::is_none")]
            recall: Option<f64>,
            #[serde(skip_serializing_if = "Option::is_none")]
            f1: Option<f64>,
            #[serde(skip_serializing_if = "Option::is_none")]
            per_class: Option<&'a [ClassMetrics]>,
            #[serde(skip_serializing_if = "Option::is_none")]
            error: Option<&'a str>,
        }
        let rows: Vec<JsonRow> = self
            .rows
            .iter()
            .map(|r| JsonRow {
                model: &r.name,
                accuracy: r.metrics.as_ref().map(|m| m.accuracy),
                precision: r.metrics.as_ref().map(|m| m.precision),
                recall: r.metrics.as_ref().map(|m| m.recall),
                f1: r.metrics.as_ref().map(|m| m.f1),
                per_class: r.metrics.as_ref().map(|m| m.per_class.as_slice()),
                error: r.error.as_deref(),
            })
            .collect();
        serde_json::to_string_pretty(&rows)
            .map_err(|e| Error::Data(format!("json render: {e}")))
    }
}
