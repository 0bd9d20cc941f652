//! `vtxt` — violent-text detection pipeline front end.
//!
//! Exit codes are fixed for scriptability: 0 success, 1 configuration
//! error, 2 data error, 3 numeric error (training divergence, zero
//! probability). All randomness flows from `--seed` through named
//! sub-streams, so every command is reproducible.

mod commands;
mod common;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "vtxt",
    version,
    about = "Violent-text detection: train, predict, evaluate, keywords, language models, rules, fusion"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train the classifier and write a model container plus a manifest
    Train(commands::train::TrainArgs),
    /// Predict labels for documents, one JSON object per line
    Predict(commands::predict::PredictArgs),
    /// Evaluate one or more models on a labeled test set
    Evaluate(commands::evaluate::EvaluateArgs),
    /// Rank terms by a feature-selection statistic
    Features(commands::features::FeaturesArgs),
    /// Extract class keywords by the chi-square/frequency/POS/position product
    Keywords(commands::keywords::KeywordsArgs),
    /// Train an n-gram language model
    Lm(commands::lm::LmArgs),
    /// Match rules against documents and filter them with language models
    Rules(commands::rules::RulesArgs),
    /// Train a fused head over the base model and external embeddings
    Fuse(commands::fuse::FuseArgs),
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1, // bad flags are configuration errors
            };
            let _ = e.print();
            std::process::exit(code);
        }
    };

    let result = match cli.command {
        Command::Train(args) => commands::train::run(args),
        Command::Predict(args) => commands::predict::run(args),
        Command::Evaluate(args) => commands::evaluate::run(args),
        Command::Features(args) => commands::features::run(args),
        Command::Keywords(args) => commands::keywords::run(args),
        Command::Lm(args) => commands::lm::run(args),
        Command::Rules(args) => commands::rules::run(args),
        Command::Fuse(args) => commands::fuse::run(args),
    };

    if let Err(err) = result {
        eprintln!("error: {err}");
        std::process::exit(err.exit_code());
    }
}
