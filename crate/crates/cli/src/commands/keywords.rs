use std::path::PathBuf;

use clap::Args;
use vtxt_core::keywords::{extract_keywords, write_keywords_csv, PosLexicon, PositionRule};
use vtxt_core::Error as CoreError;

use crate::common::{emit, CliError, CliResult, DataArgs};

#[derive(Debug, Args)]
pub struct KeywordsArgs {
    #[command(flatten)]
    pub data: DataArgs,

    /// Label name of the target class
    #[arg(long, default_value = "1")]
    pub class: String,

    /// Number of keywords to extract
    #[arg(long, default_value_t = 50)]
    pub k: usize,

    /// Part-of-speech lexicon: lines `token<TAB>tag`
    #[arg(long)]
    pub pos_lexicon: Option<PathBuf>,

    /// Leading fraction of a document counted as early position
    #[arg(long, default_value_t = 0.25)]
    pub position_fraction: f64,

    /// Write the CSV here instead of standard output
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn run(args: KeywordsArgs) -> CliResult<()> {
    let corpus = args.data.load_corpus()?;
    let class = corpus.labels().id_of(&args.class).ok_or_else(|| {
        CliError::Core(CoreError::Config(format!(
            "class {:?} not in the label set {:?}",
            args.class,
            corpus.labels().names()
        )))
    })?;
    let lexicon = match &args.pos_lexicon {
        Some(path) => PosLexicon::load(path)?,
        None => PosLexicon::empty(),
    };
    let rule = PositionRule {
        fraction: args.position_fraction,
        ..PositionRule::default()
    };

    let scores = extract_keywords(&corpus, class, args.k, &lexicon, &rule)?;
    let mut buf = Vec::new();
    write_keywords_csv(&scores, &mut buf)?;
    let text = String::from_utf8(buf)
        .map_err(|e| CliError::config(format!("non-UTF-8 csv output: {e}")))?;
    emit(args.out.as_deref(), &text)
}
