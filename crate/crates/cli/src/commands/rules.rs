use std::io::Write;
use std::path::PathBuf;

use clap::Args;
use serde_json::json;
use vtxt_core::model_io::ModelFile;
use vtxt_core::rules::{load_rules, match_rules, span_llr};
use vtxt_core::{Error as CoreError, NGramModel};

use crate::common::{CliError, CliResult, DataArgs};

#[derive(Debug, Args)]
pub struct RulesArgs {
    #[command(flatten)]
    pub data: DataArgs,

    /// Rule file: lines `rule_id<TAB>slot;slot;...` with slots
    /// `kw:term1|term2` or `any:maxspan`
    #[arg(long)]
    pub rules: PathBuf,

    /// Model file holding the violent-corpus language model
    #[arg(long)]
    pub violent_lm: PathBuf,

    /// Model file holding the benign-corpus language model
    #[arg(long)]
    pub benign_lm: PathBuf,

    /// Per-token log-likelihood-ratio threshold; matches below it are
    /// reported as dropped
    #[arg(long, default_value_t = 0.0)]
    pub threshold: f64,
}

fn load_single_lm(path: &PathBuf) -> CliResult<NGramModel> {
    let file = ModelFile::load(path)?;
    match file.lms.len() {
        0 => Err(CliError::Core(CoreError::Data(format!(
            "{}: no language-model section",
            path.display()
        )))),
        1 => Ok(file.lms.into_iter().next().expect("length checked")),
        n => Err(CliError::Core(CoreError::Data(format!(
            "{}: {n} language models; expected exactly one",
            path.display()
        )))),
    }
}

pub fn run(args: RulesArgs) -> CliResult<()> {
    let corpus = args.data.load_corpus()?;
    let rules = load_rules(&args.rules)?;
    if rules.is_empty() {
        return Err(CliError::Core(CoreError::Data(format!(
            "{}: no rules",
            args.rules.display()
        ))));
    }
    let violent = load_single_lm(&args.violent_lm)?;
    let benign = load_single_lm(&args.benign_lm)?;
    if violent.order() != benign.order() || violent.k() != benign.k() {
        return Err(CliError::Core(CoreError::Config(
            "violent and benign language models must share order and smoothing".into(),
        )));
    }

    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    for (doc_index, doc) in corpus.documents().iter().enumerate() {
        for m in match_rules(&rules, &doc.tokens, doc_index) {
            let llr = span_llr(&m.tokens, &violent, &benign)?;
            let line = json!({
                "rule": m.rule_id,
                "doc": doc.id,
                "span": [m.start, m.end],
                "tokens": m.tokens,
                "llr": llr,
                "kept": llr >= args.threshold,
            });
            writeln!(out, "{line}")
                .map_err(|e| CliError::Core(CoreError::io("stdout".to_string(), e)))?;
        }
    }
    Ok(())
}
