//! Keyword extraction for violent-language text.
//!
//! A term's keyword score for a class is the product of four factors:
//! the chi-square statistic of (term, class), a word-frequency feature
//! normalized within the term's part-of-speech class, a part-of-speech
//! weight, and a word-position feature. Part-of-speech tags come from a
//! user-supplied lexicon; there is no embedded tagger, which keeps the
//! whole computation deterministic.
//!
//! The part-of-speech weight table and the positional rule are explicit
//! configuration (the factors themselves are fixed): both can be set to
//! neutral values to ablate a factor.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::corpus::{Corpus, LabelId};
use crate::error::{Error, Result};
use crate::features::{build_contingency, chi_square, ContingencyTable};

/// Coarse part-of-speech classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum PosTag {
    Noun,
    Verb,
    Adjective,
    Adverb,
    Other,
}

impl PosTag {
    pub fn name(&self) -> &'static str {
        match self {
            PosTag::Noun => "noun",
            PosTag::Verb => "verb",
            PosTag::Adjective => "adjective",
            PosTag::Adverb => "adverb",
            PosTag::Other => "other",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "noun" => Ok(PosTag::Noun),
            "verb" => Ok(PosTag::Verb),
            "adjective" => Ok(PosTag::Adjective),
            "adverb" => Ok(PosTag::Adverb),
            "other" => Ok(PosTag::Other),
            other => Err(Error::Data(format!(
                "unknown part-of-speech tag {other:?} (expected noun, verb, adjective, adverb, other)"
            ))),
        }
    }

    fn index(self) -> usize {
        match self {
            PosTag::Noun => 0,
            PosTag::Verb => 1,
            PosTag::Adjective => 2,
            PosTag::Adverb => 3,
            PosTag::Other => 4,
        }
    }
}

/// Token -> tag lexicon plus the tag weight table. Unknown tokens map to
/// [`PosTag::Other`]. Weights must lie in `(0, 1]`.
#[derive(Debug, Clone)]
pub struct PosLexicon {
    tags: HashMap<String, PosTag>,
    weights: [f64; 5],
}

impl PosLexicon {
    /// Default tag weights: noun 1.0, verb 0.8, adjective 0.6, adverb 0.5,
    /// other 0.3.
    pub const DEFAULT_WEIGHTS: [f64; 5] = [1.0, 0.8, 0.6, 0.5, 0.3];

    pub fn new(tags: HashMap<String, PosTag>, weights: [f64; 5]) -> Result<Self> {
        for (i, w) in weights.iter().enumerate() {
            if !(*w > 0.0 && *w <= 1.0) {
                return Err(Error::Config(format!(
                    "part-of-speech weight {w} for index {i} outside (0,1]"
                )));
            }
        }
        Ok(PosLexicon { tags, weights })
    }

    /// Empty lexicon: every token tags as `other`.
    pub fn empty() -> Self {
        PosLexicon {
            tags: HashMap::new(),
            weights: Self::DEFAULT_WEIGHTS,
        }
    }

    /// All weights 1.0, making the part-of-speech factor neutral.
    pub fn with_neutral_weights(mut self) -> Self {
        self.weights = [1.0; 5];
        self
    }

    /// Loads lines of the form `token<TAB>tag`.
    pub fn load(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        let mut tags = HashMap::new();
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(path.display().to_string(), e))?;
            if line.trim().is_empty() {
                continue;
            }
            let (token, tag) = line.split_once('\t').ok_or_else(|| {
                Error::Data(format!("{}:{}: expected token<TAB>tag", path.display(), i + 1))
            })?;
            let tag = PosTag::parse(tag.trim())
                .map_err(|e| Error::Data(format!("{}:{}: {e}", path.display(), i + 1)))?;
            tags.insert(token.to_string(), tag);
        }
        PosLexicon::new(tags, Self::DEFAULT_WEIGHTS)
    }

    pub fn tag(&self, token: &str) -> PosTag {
        self.tags.get(token).copied().unwrap_or(PosTag::Other)
    }

    pub fn weight(&self, tag: PosTag) -> f64 {
        self.weights[tag.index()]
    }
}

/// Word-position factor: a document contributes `in_weight` when the term
/// occurs within the leading `fraction` of its tokens (index `<
/// ceil(len * fraction)`), `out_weight` otherwise; the factor is the mean
/// over documents containing the term.
#[derive(Debug, Clone, Copy)]
pub struct PositionRule {
    pub fraction: f64,
    pub in_weight: f64,
    pub out_weight: f64,
}

impl Default for PositionRule {
    fn default() -> Self {
        PositionRule {
            fraction: 0.25,
            in_weight: 1.0,
            out_weight: 0.5,
        }
    }
}

impl PositionRule {
    /// Both weights 1.0: the position factor becomes neutral.
    pub fn neutral() -> Self {
        PositionRule {
            fraction: 0.25,
            in_weight: 1.0,
            out_weight: 1.0,
        }
    }

    fn leading_window(&self, doc_len: usize) -> usize {
        (doc_len as f64 * self.fraction).ceil() as usize
    }
}

/// One scored keyword candidate. `product` is exactly the product of the
/// four factor fields.
#[derive(Debug, Clone, PartialEq)]
pub struct KeywordScore {
    pub term: String,
    pub chi2: f64,
    pub fre: f64,
    pub nom: f64,
    pub pos: f64,
    pub product: f64,
}

/// Word-frequency factor: occurrences of `term` divided by the total
/// occurrences of all tokens sharing its part-of-speech tag. Absent terms
/// score 0.
pub fn fre(term: &str, corpus: &Corpus, lexicon: &PosLexicon) -> f64 {
    let tag = lexicon.tag(term);
    let mut term_count = 0u64;
    let mut tag_total = 0u64;
    for doc in corpus.documents() {
        for token in doc.tokens.iter() {
            if lexicon.tag(token) == tag {
                tag_total += 1;
            }
            if token == term {
                term_count += 1;
            }
        }
    }
    if term_count == 0 {
        0.0
    } else {
        term_count as f64 / tag_total as f64
    }
}

/// Part-of-speech factor: the configured weight of the term's tag.
pub fn nom(term: &str, lexicon: &PosLexicon) -> f64 {
    lexicon.weight(lexicon.tag(term))
}

/// Word-position factor (see [`PositionRule`]). Absent terms score 0.
pub fn pos_feature(term: &str, corpus: &Corpus, rule: &PositionRule) -> f64 {
    let mut docs_with_term = 0u64;
    let mut weight_sum = 0.0;
    for doc in corpus.documents() {
        let window = rule.leading_window(doc.tokens.len());
        let mut present = false;
        let mut leading = false;
        for (i, token) in doc.tokens.iter().enumerate() {
            if token == term {
                present = true;
                if i < window {
                    leading = true;
                    break;
                }
            }
        }
        if present {
            docs_with_term += 1;
            weight_sum += if leading {
                rule.in_weight
            } else {
                rule.out_weight
            };
        }
    }
    if docs_with_term == 0 {
        0.0
    } else {
        weight_sum / docs_with_term as f64
    }
}

/// Scores one (term, class) pair: chi-square times the frequency,
/// part-of-speech, and position factors.
pub fn chi2_fpn(
    term: &str,
    class: LabelId,
    corpus: &Corpus,
    lexicon: &PosLexicon,
    rule: &PositionRule,
) -> KeywordScore {
    let chi2 = chi_square(&build_contingency(corpus, term, class));
    let fre = fre(term, corpus, lexicon);
    let nom = nom(term, lexicon);
    let pos = pos_feature(term, corpus, rule);
    KeywordScore {
        term: term.to_string(),
        chi2,
        fre,
        nom,
        pos,
        product: chi2 * fre * nom * pos,
    }
}

/// Top-k corpus terms for a class, by factor product descending. Ties break
/// lexicographically.
///
/// Equivalent to calling [`chi2_fpn`] on every distinct term, but computed
/// in a single pass over the corpus.
pub fn extract_keywords(
    corpus: &Corpus,
    class: LabelId,
    k: usize,
    lexicon: &PosLexicon,
    rule: &PositionRule,
) -> Result<Vec<KeywordScore>> {
    if k == 0 {
        return Err(Error::Config("k must be >= 1".into()));
    }
    if class as usize >= corpus.labels().len() {
        return Err(Error::Config(format!(
            "class id {class} outside the corpus label table"
        )));
    }

    #[derive(Default)]
    struct Agg {
        occurrences: u64,
        docs: u64,
        docs_in_class: u64,
        docs_leading: u64,
    }

    let mut aggs: BTreeMap<&str, Agg> = BTreeMap::new();
    let mut tag_totals = [0u64; 5];
    let class_docs: u64 = corpus
        .documents()
        .iter()
        .filter(|d| d.label == class)
        .count() as u64;
    let n = corpus.len() as u64;

    for doc in corpus.documents() {
        let window = rule.leading_window(doc.tokens.len());
        let mut seen: BTreeMap<&str, bool> = BTreeMap::new(); // term -> leading?
        for (i, token) in doc.tokens.iter().enumerate() {
            tag_totals[lexicon.tag(token).index()] += 1;
            aggs.entry(token).or_default().occurrences += 1;
            let leading = seen.entry(token).or_insert(false);
            *leading |= i < window;
        }
        for (term, leading) in seen {
            let agg = aggs.get_mut(term).expect("seen term was aggregated");
            agg.docs += 1;
            if doc.label == class {
                agg.docs_in_class += 1;
            }
            if leading {
                agg.docs_leading += 1;
            }
        }
    }

    let mut scored: Vec<KeywordScore> = aggs
        .into_iter()
        .map(|(term, agg)| {
            let tag = lexicon.tag(term);
            let a = agg.docs_in_class;
            let b = agg.docs - a;
            let c = class_docs - a;
            let d = n - class_docs - b;
            let chi2 = chi_square(&ContingencyTable::new(a, b, c, d));
            let fre = agg.occurrences as f64 / tag_totals[tag.index()] as f64;
            let nom = lexicon.weight(tag);
            let pos = (agg.docs_leading as f64 * rule.in_weight
                + (agg.docs - agg.docs_leading) as f64 * rule.out_weight)
                / agg.docs as f64;
            KeywordScore {
                term: term.to_string(),
                chi2,
                fre,
                nom,
                pos,
                product: chi2 * fre * nom * pos,
            }
        })
        .collect();

    scored.sort_by(|x, y| {
        y.product
            .partial_cmp(&x.product)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| x.term.cmp(&y.term))
    });
    scored.truncate(k);
    Ok(scored)
}

/// Writes the keyword report as CSV: `term,chi2,fre,nom,pos,product`.
pub fn write_keywords_csv<W: Write>(scores: &[KeywordScore], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["term", "chi2", "fre", "nom", "pos", "product"])
        .map_err(|e| Error::Data(format!("csv write: {e}")))?;
    for s in scores {
        w.write_record([
            s.term.as_str(),
            &format!("{}", s.chi2),
            &format!("{}", s.fre),
            &format!("{}", s.nom),
            &format!("{}", s.pos),
            &format!("{}", s.product),
        ])
        .map_err(|e| Error::Data(format!("csv write: {e}")))?;
    }
    w.flush().map_err(|e| Error::Data(format!("csv write: {e}")))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::tests::toy_corpus;

    fn lexicon(entries: &[(&str, PosTag)]) -> PosLexicon {
        let tags = entries
            .iter()
            .map(|(t, tag)| (t.to_string(), *tag))
            .collect();
        PosLexicon::new(tags, PosLexicon::DEFAULT_WEIGHTS).unwrap()
    }

    #[test]
    fn fre_normalizes_within_pos_class() {
        // "kill" occurs 3 times; nouns total 10 occurrences
        let corpus = toy_corpus(
            &[
                ("kill kill kill gun gun gun gun", 1),
                ("war war war peace", 0),
            ],
            2,
        );
        let lex = lexicon(&[
            ("kill", PosTag::Noun),
            ("gun", PosTag::Noun),
            ("war", PosTag::Noun),
            ("peace", PosTag::Verb),
        ]);
        let f = fre("kill", &corpus, &lex);
        assert!((f - 0.3).abs() < 1e-12, "{f}");
        // only term in its class
        assert!((fre("peace", &corpus, &lex) - 1.0).abs() < 1e-12);
        assert_eq!(fre("absent", &corpus, &lex), 0.0);
    }

    #[test]
    fn nom_uses_weight_table() {
        let lex = lexicon(&[("kill", PosTag::Noun)]);
        assert_eq!(nom("kill", &lex), 1.0);
        assert_eq!(nom("unknown-token", &lex), 0.3);
        let neutral = lexicon(&[("kill", PosTag::Noun)]).with_neutral_weights();
        assert_eq!(nom("kill", &neutral), 1.0);
        assert_eq!(nom("unknown-token", &neutral), 1.0);
    }

    #[test]
    fn pos_feature_boundaries() {
        let rule = PositionRule::default();
        let initial = toy_corpus(&[("kill then other words follow here", 1), ("x", 0)], 2);
        assert!((pos_feature("kill", &initial, &rule) - 1.0).abs() < 1e-12);

        let final_pos = toy_corpus(&[("other words come before kill", 1), ("x", 0)], 2);
        assert!((pos_feature("kill", &final_pos, &rule) - 0.5).abs() < 1e-12);

        assert_eq!(pos_feature("absent", &initial, &rule), 0.0);
    }

    #[test]
    fn product_is_exact_product_of_factors() {
        let corpus = toy_corpus(
            &[("kill the enemy", 1), ("love the world", 0)],
            2,
        );
        let lex = lexicon(&[("kill", PosTag::Noun)]);
        let rule = PositionRule::default();
        let score = chi2_fpn("kill", 1, &corpus, &lex, &rule);
        assert_eq!(score.product, score.chi2 * score.fre * score.nom * score.pos);
        // any absent term zeroes the product
        let absent = chi2_fpn("absent", 1, &corpus, &lex, &rule);
        assert_eq!(absent.product, 0.0);
    }

    #[test]
    fn doubling_chi2_doubles_product() {
        let s = KeywordScore {
            term: "x".into(),
            chi2: 0.7937,
            fre: 0.3,
            nom: 1.0,
            pos: 0.5,
            product: 0.7937 * 0.3 * 1.0 * 0.5,
        };
        assert!((s.product - 0.11906).abs() < 1e-4);
        let doubled = 2.0 * s.chi2 * s.fre * s.nom * s.pos;
        assert!((doubled - 2.0 * s.product).abs() < 1e-15);
    }

    #[test]
    fn extract_keywords_ranks_dominating_slur_first() {
        let corpus = toy_corpus(
            &[
                ("slur aimed at someone", 1),
                ("slur another attack text", 1),
                ("slur slur yet again", 1),
                ("completely benign words here", 0),
                ("more harmless content words", 0),
                ("nothing to see here", 0),
            ],
            2,
        );
        let lex = lexicon(&[("slur", PosTag::Noun)]);
        let ranked =
            extract_keywords(&corpus, 1, 3, &lex, &PositionRule::default()).unwrap();
        assert_eq!(ranked[0].term, "slur");
    }

    #[test]
    fn extract_keywords_matches_per_term_scoring() {
        let corpus = toy_corpus(
            &[
                ("kill the enemy now", 1),
                ("the enemy is near", 1),
                ("peace and love now", 0),
                ("the world is kind", 0),
            ],
            2,
        );
        let lex = lexicon(&[("kill", PosTag::Noun), ("enemy", PosTag::Noun)]);
        let rule = PositionRule::default();
        let ranked = extract_keywords(&corpus, 1, 100, &lex, &rule).unwrap();
        for score in &ranked {
            let direct = chi2_fpn(&score.term, 1, &corpus, &lex, &rule);
            assert_eq!(score.chi2, direct.chi2, "term {}", score.term);
            assert_eq!(score.fre, direct.fre, "term {}", score.term);
            assert_eq!(score.nom, direct.nom, "term {}", score.term);
            assert_eq!(score.pos, direct.pos, "term {}", score.term);
            assert_eq!(score.product, direct.product, "term {}", score.term);
        }
    }

    #[test]
    fn extract_keywords_k_exceeding_vocabulary_returns_all() {
        let corpus = toy_corpus(&[("a b", 1), ("c d", 0)], 2);
        let ranked = extract_keywords(
            &corpus,
            1,
            1000,
            &PosLexicon::empty(),
            &PositionRule::default(),
        )
        .unwrap();
        assert_eq!(ranked.len(), 4);
    }

    #[test]
    fn chi2_symmetric_under_class_complement() {
        let corpus = toy_corpus(
            &[
                ("kill kill maim", 1),
                ("kill war", 1),
                ("flowers peace", 0),
                ("calm water", 0),
            ],
            2,
        );
        let lex = PosLexicon::empty();
        let rule = PositionRule::default();
        let for_1 = extract_keywords(&corpus, 1, 100, &lex, &rule).unwrap();
        let for_0 = extract_keywords(&corpus, 0, 100, &lex, &rule).unwrap();
        for (a, b) in for_1.iter().zip(for_0.iter()) {
            assert_eq!(a.term, b.term);
            assert_eq!(a.chi2, b.chi2);
            assert_eq!(a.product, b.product);
        }
    }

    #[test]
    fn neutral_factors_reduce_to_chi2_times_fre() {
        let corpus = toy_corpus(
            &[
                ("kill kill maim enemy", 1),
                ("war kill", 1),
                ("flowers peace calm", 0),
                ("calm water flows", 0),
            ],
            2,
        );
        let lex = PosLexicon::empty().with_neutral_weights();
        let rule = PositionRule::neutral();
        let ranked = extract_keywords(&corpus, 1, 100, &lex, &rule).unwrap();
        for s in &ranked {
            assert_eq!(s.nom, 1.0);
            assert_eq!(s.pos, 1.0);
        }
        // ordering equals ordering by chi2 * fre alone
        let mut by_chi2_fre: Vec<(String, f64)> = ranked
            .iter()
            .map(|s| (s.term.clone(), s.chi2 * s.fre))
            .collect();
        by_chi2_fre.sort_by(|x, y| {
            y.1.partial_cmp(&x.1)
                .unwrap()
                .then_with(|| x.0.cmp(&y.0))
        });
        let got: Vec<&str> = ranked.iter().map(|s| s.term.as_str()).collect();
        let want: Vec<&str> = by_chi2_fre.iter().map(|(t, _)| t.as_str()).collect();
        assert_eq!(got, want);
    }

    #[test]
    fn lexicon_rejects_bad_weight() {
        assert!(PosLexicon::new(HashMap::new(), [1.0, 0.8, 0.6, 0.5, 0.0]).is_err());
        assert!(PosLexicon::new(HashMap::new(), [1.1, 0.8, 0.6, 0.5, 0.3]).is_err());
    }

    #[test]
    fn lexicon_file_roundtrip() {
        use std::io::Write as _;
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "kill\tverb").unwrap();
        writeln!(f, "gun\tnoun").unwrap();
        f.flush().unwrap();
        let lex = PosLexicon::load(f.path()).unwrap();
        assert_eq!(lex.tag("kill"), PosTag::Verb);
        assert_eq!(lex.tag("gun"), PosTag::Noun);
        assert_eq!(lex.tag("unknown"), PosTag::Other);

        let mut bad = tempfile::NamedTempFile::new().unwrap();
        writeln!(bad, "kill verb-no-tab").unwrap();
        bad.flush().unwrap();
        assert!(PosLexicon::load(bad.path()).is_err());
    }
}
