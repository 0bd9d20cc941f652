use std::path::PathBuf;

use clap::Args;
use vtxt_core::features::{select_features, write_scores_csv, FeatureMethod};

use crate::common::{emit, CliError, CliResult, DataArgs};

#[derive(Debug, Args)]
pub struct FeaturesArgs {
    #[command(flatten)]
    pub data: DataArgs,

    /// Statistic: df, mi-prob, mi-counts, ig, chi2
    #[arg(long)]
    pub method: String,

    /// Number of terms to keep
    #[arg(long, default_value_t = 50)]
    pub k: usize,

    /// Exclude terms appearing in fewer documents than this
    #[arg(long, default_value_t = 1)]
    pub min_df: u64,

    /// Write the CSV here instead of standard output
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn run(args: FeaturesArgs) -> CliResult<()> {
    let method = FeatureMethod::parse(&args.method)?;
    let corpus = args.data.load_corpus()?;
    let scores = select_features(&corpus, method, args.k, args.min_df)?;

    let mut buf = Vec::new();
    write_scores_csv(&scores, &mut buf)?;
    let text = String::from_utf8(buf)
        .map_err(|e| CliError::config(format!("non-UTF-8 csv output: {e}")))?;
    emit(args.out.as_deref(), &text)
}
