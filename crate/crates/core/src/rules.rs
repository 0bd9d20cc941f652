//! Rule-based detection constrained by language models.
//!
//! A rule is an ordered pattern of slots: a keyword slot matches exactly one
//! token from its set, a wildcard matches up to `max_span` arbitrary tokens
//! (including none). Rules are an input artifact, typically built from
//! extracted keywords; they are not learned here.
//!
//! Raw rule matching treats every dictionary hit the same, which flags
//! benign word combinations too. The language-model constraint scores each
//! matched span under a violent-corpus model and a benign-corpus model and
//! keeps the match only when the per-token log-likelihood ratio clears a
//! threshold.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use crate::corpus::TokenSequence;
use crate::error::{Error, Result};
use crate::lm::NGramModel;

/// One pattern element.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Slot {
    /// Matches one token contained in the set.
    Keywords(BTreeSet<String>),
    /// Matches zero to `max_span` arbitrary tokens.
    Wildcard { max_span: usize },
}

/// A detection rule: nonempty pattern with at least one keyword slot.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rule {
    pub id: String,
    pub pattern: Vec<Slot>,
}

impl Rule {
    pub fn new(id: impl Into<String>, pattern: Vec<Slot>) -> Result<Self> {
        let id = id.into();
        if pattern.is_empty() {
            return Err(Error::Data(format!("rule {id:?}: empty pattern")));
        }
        let has_keyword = pattern.iter().any(|s| matches!(s, Slot::Keywords(_)));
        if !has_keyword {
            return Err(Error::Data(format!(
                "rule {id:?}: pattern needs at least one keyword slot"
            )));
        }
        for slot in &pattern {
            if let Slot::Keywords(set) = slot {
                if set.is_empty() {
                    return Err(Error::Data(format!("rule {id:?}: empty keyword set")));
                }
            }
        }
        Ok(Rule { id, pattern })
    }

    /// Parses one rule line: `rule_id<TAB>slot;slot;...` where a slot is
    /// `kw:term1|term2` or `any:maxspan`.
    pub fn parse_line(line: &str) -> Result<Self> {
        let (id, spec) = line
            .split_once('\t')
            .ok_or_else(|| Error::Data(format!("rule line {line:?}: expected id<TAB>pattern")))?;
        let mut pattern = Vec::new();
        for part in spec.split(';') {
            let part = part.trim();
            if let Some(terms) = part.strip_prefix("kw:") {
                let set: BTreeSet<String> = terms
                    .split('|')
                    .map(str::trim)
                    .filter(|t| !t.is_empty())
                    .map(str::to_string)
                    .collect();
                pattern.push(Slot::Keywords(set));
            } else if let Some(span) = part.strip_prefix("any:") {
                let max_span: usize = span.trim().parse().map_err(|_| {
                    Error::Data(format!("rule {id:?}: bad wildcard span {span:?}"))
                })?;
                pattern.push(Slot::Wildcard { max_span });
            } else {
                return Err(Error::Data(format!(
                    "rule {id:?}: unknown slot {part:?} (expected kw:... or any:...)"
                )));
            }
        }
        Rule::new(id, pattern)
    }
}

/// Loads a rule file, one rule per line; blank lines and `#` comments skipped.
pub fn load_rules(path: &Path) -> Result<Vec<Rule>> {
    let file = File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut rules = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path.display().to_string(), e))?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        rules.push(
            Rule::parse_line(&line)
                .map_err(|e| Error::Data(format!("{}:{}: {e}", path.display(), i + 1)))?,
        );
    }
    Ok(rules)
}

/// A rule hit on a document: token span `[start, end)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RuleMatch {
    pub rule_id: String,
    pub doc_index: usize,
    pub start: usize,
    pub end: usize,
    pub tokens: Vec<String>,
}

/// Longest end position of a pattern match starting exactly at `pos`.
fn match_at(slots: &[Slot], tokens: &[String], pos: usize) -> Option<usize> {
    match slots.first() {
        None => Some(pos),
        Some(Slot::Keywords(set)) => {
            let token = tokens.get(pos)?;
            if set.contains(token) {
                match_at(&slots[1..], tokens, pos + 1)
            } else {
                None
            }
        }
        Some(Slot::Wildcard { max_span }) => {
            let mut best: Option<usize> = None;
            for span in 0..=*max_span {
                if pos + span > tokens.len() {
                    break;
                }
                if let Some(end) = match_at(&slots[1..], tokens, pos + span) {
                    best = Some(best.map_or(end, |b| b.max(end)));
                }
            }
            best
        }
    }
}

/// All non-overlapping leftmost-longest matches of each rule against one
/// document. Output is ordered by rule id, then by position.
pub fn match_rules(rules: &[Rule], doc: &TokenSequence, doc_index: usize) -> Vec<RuleMatch> {
    let mut order: Vec<&Rule> = rules.iter().collect();
    order.sort_by(|a, b| a.id.cmp(&b.id));

    let tokens = doc.tokens();
    let mut matches = Vec::new();
    for rule in order {
        let mut pos = 0;
        while pos < tokens.len() {
            match match_at(&rule.pattern, tokens, pos) {
                Some(end) if end > pos => {
                    matches.push(RuleMatch {
                        rule_id: rule.id.clone(),
                        doc_index,
                        start: pos,
                        end,
                        tokens: tokens[pos..end].to_vec(),
                    });
                    pos = end;
                }
                _ => pos += 1,
            }
        }
    }
    matches
}

/// Per-token log-likelihood ratio of a span: violent log-probability minus
/// benign log-probability, divided by span length.
pub fn span_llr(
    tokens: &[String],
    violent: &NGramModel,
    benign: &NGramModel,
) -> Result<f64> {
    let seq = TokenSequence::new(tokens.to_vec());
    let lv = violent.sentence_logprob(&seq)?;
    let lb = benign.sentence_logprob(&seq)?;
    let len = tokens.len().max(1) as f64;
    Ok((lv - lb) / len)
}

/// Keeps a match iff its per-token log-likelihood ratio is `>= threshold`.
///
/// A threshold of negative infinity disables the constraint and returns the
/// input unchanged. Both models must share order and smoothing constant.
pub fn constrain_with_lm(
    matches: &[RuleMatch],
    violent: &NGramModel,
    benign: &NGramModel,
    threshold: f64,
) -> Result<Vec<RuleMatch>> {
    if threshold == f64::NEG_INFINITY {
        return Ok(matches.to_vec());
    }
    if violent.order() != benign.order() {
        return Err(Error::Config(format!(
            "language models disagree on order: {} vs {}",
            violent.order(),
            benign.order()
        )));
    }
    if violent.k() != benign.k() {
        return Err(Error::Config(format!(
            "language models disagree on smoothing: {} vs {}",
            violent.k(),
            benign.k()
        )));
    }
    let mut kept = Vec::new();
    for m in matches {
        if span_llr(&m.tokens, violent, benign)? >= threshold {
            kept.push(m.clone());
        }
    }
    Ok(kept)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::tests::toy_corpus;
    use crate::corpus::PreprocessConfig;
    use crate::lm::{train_lm, LmOptions};

    fn seq(text: &str) -> TokenSequence {
        crate::corpus::preprocess(text, &PreprocessConfig::default())
    }

    fn kw(terms: &[&str]) -> Slot {
        Slot::Keywords(terms.iter().map(|s| s.to_string()).collect())
    }

    #[test]
    fn matches_table_row_with_wildcard() {
        let rule = Rule::new(
            "r1",
            vec![kw(&["proves"]), Slot::Wildcard { max_span: 2 }, kw(&["nazi"])],
        )
        .unwrap();
        let doc = seq(
            "just by being able to tweet this insufferable bullshit proves trump a nazi you vagina",
        );
        let matches = match_rules(&[rule], &doc, 0);
        assert_eq!(matches.len(), 1);
        assert_eq!(
            matches[0].tokens,
            vec!["proves", "trump", "a", "nazi"]
        );
    }

    #[test]
    fn empty_document_has_no_matches() {
        let rule = Rule::new("r1", vec![kw(&["x"])]).unwrap();
        assert!(match_rules(&[rule], &TokenSequence::default(), 0).is_empty());
    }

    #[test]
    fn leftmost_longest_wins_on_overlap() {
        // wildcard lets the rule match either short or long; longest is kept
        let rule = Rule::new(
            "r1",
            vec![kw(&["a"]), Slot::Wildcard { max_span: 2 }, kw(&["b"])],
        )
        .unwrap();
        let doc = seq("a b b c");
        let matches = match_rules(&[rule], &doc, 3);
        assert_eq!(matches.len(), 1);
        assert_eq!((matches[0].start, matches[0].end), (0, 3));
        assert_eq!(matches[0].tokens, vec!["a", "b", "b"]);
        assert_eq!(matches[0].doc_index, 3);
    }

    #[test]
    fn non_overlapping_per_rule() {
        let rule = Rule::new("r1", vec![kw(&["x"]), kw(&["y"])]).unwrap();
        let doc = seq("x y x y x y");
        let matches = match_rules(&[rule], &doc, 0);
        assert_eq!(matches.len(), 3);
        for pair in matches.windows(2) {
            assert!(pair[0].end <= pair[1].start);
        }
    }

    #[test]
    fn output_ordered_by_rule_id_then_position() {
        let rb = Rule::new("b", vec![kw(&["x"])]).unwrap();
        let ra = Rule::new("a", vec![kw(&["y"])]).unwrap();
        let doc = seq("x y x y");
        let matches = match_rules(&[rb, ra], &doc, 0);
        let ids: Vec<&str> = matches.iter().map(|m| m.rule_id.as_str()).collect();
        assert_eq!(ids, vec!["a", "a", "b", "b"]);
        assert!(matches[0].start < matches[1].start);
    }

    #[test]
    fn rule_validation() {
        assert!(Rule::new("r", vec![]).is_err());
        assert!(Rule::new("r", vec![Slot::Wildcard { max_span: 3 }]).is_err());
        assert!(Rule::new("r", vec![Slot::Keywords(BTreeSet::new())]).is_err());
    }

    #[test]
    fn rule_line_parsing() {
        let rule = Rule::parse_line("r9\tkw:proves;any:2;kw:nazi|fascist").unwrap();
        assert_eq!(rule.id, "r9");
        assert_eq!(rule.pattern.len(), 3);
        match &rule.pattern[2] {
            Slot::Keywords(set) => {
                assert!(set.contains("nazi") && set.contains("fascist"));
            }
            _ => panic!("expected keyword slot"),
        }
        assert!(Rule::parse_line("no-tab-here").is_err());
        assert!(Rule::parse_line("r\tbogus:1").is_err());
    }

    // Disjoint vocabularies with mirrored count structure, so a span unseen
    // by both models scores identically under each.
    fn disjoint_models() -> (NGramModel, NGramModel) {
        let violent = toy_corpus(
            &[
                ("kill maim destroy", 1),
                ("maim kill burn", 1),
                ("destroy burn kill", 1),
            ],
            2,
        );
        let benign = toy_corpus(
            &[
                ("flowers bloom rivers", 0),
                ("bloom flowers calm", 0),
                ("rivers calm flowers", 0),
            ],
            2,
        );
        let options = LmOptions::default();
        (
            train_lm(&violent, &options).unwrap(),
            train_lm(&benign, &options).unwrap(),
        )
    }

    #[test]
    fn neg_infinity_threshold_disables_constraint() {
        let (violent, benign) = disjoint_models();
        let matches = vec![RuleMatch {
            rule_id: "r".into(),
            doc_index: 0,
            start: 0,
            end: 2,
            tokens: vec!["anything".into(), "at-all".into()],
        }];
        let kept =
            constrain_with_lm(&matches, &violent, &benign, f64::NEG_INFINITY).unwrap();
        assert_eq!(kept, matches);
    }

    #[test]
    fn threshold_boundary_is_inclusive() {
        let (violent, benign) = disjoint_models();
        // span unseen by both models scores identically: ratio 0
        let matches = vec![RuleMatch {
            rule_id: "r".into(),
            doc_index: 0,
            start: 0,
            end: 1,
            tokens: vec!["zzz-unseen".into()],
        }];
        let ratio = span_llr(&matches[0].tokens, &violent, &benign).unwrap();
        assert!(ratio.abs() < 1e-12, "{ratio}");
        assert_eq!(
            constrain_with_lm(&matches, &violent, &benign, 0.0)
                .unwrap()
                .len(),
            1
        );
        assert!(constrain_with_lm(&matches, &violent, &benign, 0.1)
            .unwrap()
            .is_empty());
    }

    #[test]
    fn benign_vocabulary_span_dropped_at_zero_threshold() {
        let (violent, benign) = disjoint_models();
        let matches = vec![RuleMatch {
            rule_id: "r".into(),
            doc_index: 0,
            start: 0,
            end: 2,
            tokens: vec!["flowers".into(), "bloom".into()],
        }];
        let ratio = span_llr(&matches[0].tokens, &violent, &benign).unwrap();
        assert!(ratio < 0.0, "benign span should score negative, got {ratio}");
        assert!(constrain_with_lm(&matches, &violent, &benign, 0.0)
            .unwrap()
            .is_empty());

        let violent_span = vec!["kill".to_string(), "maim".to_string()];
        let ratio = span_llr(&violent_span, &violent, &benign).unwrap();
        assert!(ratio > 0.0, "violent span should score positive, got {ratio}");
    }

    #[test]
    fn mismatched_models_rejected() {
        let (violent, _) = disjoint_models();
        let benign3 = {
            let corpus = toy_corpus(&[("calm calm water", 0), ("x y z", 1)], 2);
            train_lm(
                &corpus,
                &LmOptions {
                    order: 3,
                    ..LmOptions::default()
                },
            )
            .unwrap()
        };
        let err = constrain_with_lm(&[], &violent, &benign3, 0.0).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn raising_threshold_never_adds_matches() {
        let (violent, benign) = disjoint_models();
        let doc = seq("kill maim flowers bloom kill burn");
        let rule = Rule::new(
            "r",
            vec![kw(&["kill", "flowers"]), Slot::Wildcard { max_span: 1 }],
        )
        .unwrap();
        let matches = match_rules(&[rule], &doc, 0);
        assert!(!matches.is_empty());
        let mut previous: Option<usize> = None;
        for threshold in [-5.0, -1.0, 0.0, 1.0, 5.0] {
            let kept =
                constrain_with_lm(&matches, &violent, &benign, threshold).unwrap();
            if let Some(prev) = previous {
                assert!(kept.len() <= prev, "threshold {threshold}");
            }
            // subset of the input
            for m in &kept {
                assert!(matches.contains(m));
            }
            previous = Some(kept.len());
        }
    }
}
