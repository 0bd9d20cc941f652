//! Feature-selection statistics over per-term contingency counts.
//!
//! Everything here is a pure function of document-level counts. For a term
//! `t` and class `c` the 2x2 contingency table is the standard
//! text-categorization reading:
//!
//! - `A` — documents of class `c` containing `t`
//! - `B` — documents not of class `c` containing `t`
//! - `C` — documents of class `c` lacking `t`
//! - `D` — documents not of class `c` lacking `t`
//!
//! with `A + B + C + D = N`, the corpus size. A term counts at most once per
//! document. All logarithms are natural; the base only rescales scores and
//! never reranks them.

use std::collections::BTreeSet;
use std::io::Write;

use rayon::prelude::*;

use crate::corpus::{Corpus, LabelId};
use crate::error::{Error, Result};

/// Document-level 2x2 contingency counts for one (term, class) pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ContingencyTable {
    pub a: u64,
    pub b: u64,
    pub c: u64,
    pub d: u64,
    pub n: u64,
}

impl ContingencyTable {
    pub fn new(a: u64, b: u64, c: u64, d: u64) -> Self {
        ContingencyTable {
            a,
            b,
            c,
            d,
            n: a + b + c + d,
        }
    }

    /// Documents containing the term, regardless of class.
    pub fn term_docs(&self) -> u64 {
        self.a + self.b
    }

    /// Documents of the class, regardless of the term.
    pub fn class_docs(&self) -> u64 {
        self.a + self.c
    }
}

/// Which statistic scored a term.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureMethod {
    Df,
    MiProbability,
    MiCounts,
    Ig,
    Chi2,
}

impl FeatureMethod {
    pub fn name(&self) -> &'static str {
        match self {
            FeatureMethod::Df => "DF",
            FeatureMethod::MiProbability => "MI_prob",
            FeatureMethod::MiCounts => "MI_counts",
            FeatureMethod::Ig => "IG",
            FeatureMethod::Chi2 => "CHI2",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "df" => Ok(FeatureMethod::Df),
            "mi-prob" | "mi_prob" | "mi" => Ok(FeatureMethod::MiProbability),
            "mi-counts" | "mi_counts" => Ok(FeatureMethod::MiCounts),
            "ig" => Ok(FeatureMethod::Ig),
            "chi2" => Ok(FeatureMethod::Chi2),
            other => Err(Error::Config(format!(
                "unknown feature method {other:?} (expected df, mi-prob, mi-counts, ig, chi2)"
            ))),
        }
    }
}

/// The two printed forms of the mutual-information statistic.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MiForm {
    /// `ln( p(t,c) / (p(t) p(c)) )` with probabilities estimated from counts.
    Probability,
    /// The count form `ln( A*D / ((A+B)(A+C)) )`. Note the `A*D` numerator;
    /// the usual count approximation of the probability form has `A*N` there.
    /// Both are exposed and this discrepancy is deliberate.
    Counts,
}

/// A term with its score under one method.
#[derive(Debug, Clone, PartialEq)]
pub struct TermScore {
    pub term: String,
    pub score: f64,
    pub method: FeatureMethod,
    pub df: u64,
}

/// Counts the (term, class) contingency table at document granularity.
pub fn build_contingency(corpus: &Corpus, term: &str, class: LabelId) -> ContingencyTable {
    let mut a = 0u64;
    let mut b = 0u64;
    let mut c = 0u64;
    let mut d = 0u64;
    for doc in corpus.documents() {
        let has_term = doc.tokens.iter().any(|t| t == term);
        let in_class = doc.label == class;
        match (has_term, in_class) {
            (true, true) => a += 1,
            (true, false) => b += 1,
            (false, true) => c += 1,
            (false, false) => d += 1,
        }
    }
    ContingencyTable::new(a, b, c, d)
}

/// Number of documents containing the term at least once.
pub fn document_frequency(corpus: &Corpus, term: &str) -> u64 {
    corpus
        .documents()
        .iter()
        .filter(|doc| doc.tokens.iter().any(|t| t == term))
        .count() as u64
}

/// Yates-style continuity smoothing: 0.5 added to every cell.
fn smoothed(table: &ContingencyTable) -> (f64, f64, f64, f64, f64) {
    let a = table.a as f64 + 0.5;
    let b = table.b as f64 + 0.5;
    let c = table.c as f64 + 0.5;
    let d = table.d as f64 + 0.5;
    (a, b, c, d, a + b + c + d)
}

/// Pointwise mutual information of the (term, class) event.
///
/// Smoothing keeps the result finite: the probability form smooths when `A`,
/// `A+B`, or `A+C` is zero; the counts form additionally smooths when `D` is
/// zero, since its numerator contains `D`.
pub fn mutual_information(table: &ContingencyTable, form: MiForm) -> f64 {
    let needs_smoothing = table.a == 0
        || table.term_docs() == 0
        || table.class_docs() == 0
        || (form == MiForm::Counts && table.d == 0);
    let (a, b, c, d, n) = if needs_smoothing {
        smoothed(table)
    } else {
        (
            table.a as f64,
            table.b as f64,
            table.c as f64,
            table.d as f64,
            table.n as f64,
        )
    };
    match form {
        MiForm::Probability => (a * n / ((a + b) * (a + c))).ln(),
        MiForm::Counts => (a * d / ((a + b) * (a + c))).ln(),
    }
}

fn xlogx(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        x * x.ln()
    }
}

/// Information gain of a term, one contingency table per class.
///
/// Evaluates, with `0 * ln 0 := 0`:
///
/// `sum_j P(c_j) ln P(c_j)
///  + P(t) sum_j P(c_j|t) ln P(c_j|t)
///  + P(!t) sum_j P(c_j|!t) ln P(c_j|!t)`
///
/// The first term does not depend on `t`, so rankings agree with the usual
/// entropy-difference form of information gain.
pub fn information_gain(tables: &[ContingencyTable]) -> Result<f64> {
    let first = tables
        .first()
        .ok_or_else(|| Error::Data("information gain needs at least one class table".into()))?;
    let n = first.n;
    let term_docs = first.term_docs();
    for t in tables {
        if t.n != n || t.term_docs() != term_docs {
            return Err(Error::Data(
                "per-class contingency tables are inconsistent".into(),
            ));
        }
    }
    let n_f = n as f64;
    let p_t = term_docs as f64 / n_f;
    let p_not = 1.0 - p_t;
    let not_docs = n - term_docs;

    let mut class_entropy = 0.0;
    let mut given_t = 0.0;
    let mut given_not = 0.0;
    for table in tables {
        class_entropy += xlogx(table.class_docs() as f64 / n_f);
        if term_docs > 0 {
            given_t += xlogx(table.a as f64 / term_docs as f64);
        }
        if not_docs > 0 {
            given_not += xlogx(table.c as f64 / not_docs as f64);
        }
    }
    Ok(class_entropy + p_t * given_t + p_not * given_not)
}

/// Chi-square statistic `N (AD - CB)^2 / ((A+C)(B+D)(A+B)(C+D))`.
///
/// A zero marginal yields 0, and the independence case `AD = CB` is decided
/// in exact integer arithmetic before any floating-point division.
pub fn chi_square(table: &ContingencyTable) -> f64 {
    let ad = u128::from(table.a) * u128::from(table.d);
    let cb = u128::from(table.c) * u128::from(table.b);
    if ad == cb {
        return 0.0;
    }
    let m1 = table.a + table.c;
    let m2 = table.b + table.d;
    let m3 = table.a + table.b;
    let m4 = table.c + table.d;
    if m1 == 0 || m2 == 0 || m3 == 0 || m4 == 0 {
        return 0.0;
    }
    let diff = ad.abs_diff(cb) as f64;
    table.n as f64 * diff * diff / (m1 as f64 * m2 as f64 * m3 as f64 * m4 as f64)
}

fn score_term(corpus: &Corpus, term: &str, method: FeatureMethod, df: u64) -> f64 {
    let k = corpus.labels().len() as LabelId;
    match method {
        FeatureMethod::Df => df as f64,
        FeatureMethod::Ig => {
            let tables: Vec<ContingencyTable> = (0..k)
                .map(|c| build_contingency(corpus, term, c))
                .collect();
            information_gain(&tables).expect("tables built consistently")
        }
        // class-dependent statistics rank by their best class
        FeatureMethod::MiProbability | FeatureMethod::MiCounts | FeatureMethod::Chi2 => (0..k)
            .map(|c| {
                let table = build_contingency(corpus, term, c);
                match method {
                    FeatureMethod::MiProbability => {
                        mutual_information(&table, MiForm::Probability)
                    }
                    FeatureMethod::MiCounts => mutual_information(&table, MiForm::Counts),
                    FeatureMethod::Chi2 => chi_square(&table),
                    _ => unreachable!(),
                }
            })
            .fold(f64::NEG_INFINITY, f64::max),
    }
}

/// Ranks corpus terms by the chosen statistic, best first.
///
/// Terms with document frequency below `min_df` are excluded. Ties break
/// lexicographically. Asking for more terms than exist returns all of them.
pub fn select_features(
    corpus: &Corpus,
    method: FeatureMethod,
    k: usize,
    min_df: u64,
) -> Result<Vec<TermScore>> {
    if k == 0 {
        return Err(Error::Config("k must be >= 1".into()));
    }
    let vocabulary: BTreeSet<&str> = corpus
        .documents()
        .iter()
        .flat_map(|d| d.tokens.iter())
        .collect();
    let terms: Vec<&str> = vocabulary.into_iter().collect();

    let mut scored: Vec<TermScore> = terms
        .par_iter()
        .filter_map(|term| {
            let df = document_frequency(corpus, term);
            if df < min_df {
                return None;
            }
            Some(TermScore {
                term: term.to_string(),
                score: score_term(corpus, term, method, df),
                method,
                df,
            })
        })
        .collect();

    scored.sort_by(|x, y| {
        y.score
            .partial_cmp(&x.score)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| x.term.cmp(&y.term))
    });
    scored.truncate(k);
    Ok(scored)
}

/// Writes the ranked scores as CSV: `term,score,method,df`.
pub fn write_scores_csv<W: Write>(scores: &[TermScore], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["term", "score", "method", "df"])
        .map_err(|e| Error::Data(format!("csv write: {e}")))?;
    for s in scores {
        w.write_record([
            s.term.as_str(),
            &format!("{}", s.score),
            s.method.name(),
            &s.df.to_string(),
        ])
        .map_err(|e| Error::Data(format!("csv write: {e}")))?;
    }
    w.flush().map_err(|e| Error::Data(format!("csv write: {e}")))?;
    Ok(())
}
