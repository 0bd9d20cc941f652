use std::collections::BTreeMap;
use std::path::PathBuf;
use std::time::Instant;

use clap::Args;
use serde::Serialize;
use vtxt_core::fusion::augment_corpus;
use vtxt_core::model_io::ModelFile;
use vtxt_core::{ClassifierModel, Hyperparams, TrainMode, Vocabulary};

use crate::common::{
    manifest_path, parse_ngram_range, write_manifest, CliResult, DataArgs, Manifest,
};

#[derive(Debug, Args, Serialize)]
pub struct TrainArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub data: DataArgs,

    /// Output model file
    #[arg(long)]
    pub out: PathBuf,

    /// Base seed for every random choice (init, shuffle, mask)
    #[arg(long, default_value_t = 42)]
    pub seed: u64,

    /// Embedding dimension
    #[arg(long, default_value_t = 100)]
    pub dim: usize,

    /// Initial learning rate (decays linearly to zero)
    #[arg(long, default_value_t = 0.1)]
    pub lr: f64,

    /// Training epochs (0 leaves the model at its random initialization)
    #[arg(long, default_value_t = 5)]
    pub epochs: usize,

    /// Minimum token frequency kept in the vocabulary
    #[arg(long, default_value_t = 5)]
    pub min_count: u64,

    /// Word n-gram range lo,hi; hi < lo disables n-grams
    #[arg(long, value_parser = parse_ngram_range, default_value = "2,2")]
    pub ngrams: (usize, usize),

    /// Hash buckets for n-gram embeddings
    #[arg(long, default_value_t = 2_000_000)]
    pub buckets: usize,

    /// Masking rate for augmentation copies
    #[arg(long, default_value_t = 0.15)]
    pub mask_rate: f64,

    /// Masked augmentation copies per document (0 disables augmentation)
    #[arg(long, default_value_t = 0)]
    pub copies: usize,

    /// Unsynchronized multi-threaded training (forfeits determinism)
    #[arg(long)]
    pub threads: Option<usize>,
}

pub fn run(args: TrainArgs) -> CliResult<()> {
    let started = Instant::now();
    let mut warnings = Vec::new();

    let hyper = Hyperparams {
        dim: args.dim,
        ngram_min: args.ngrams.0,
        ngram_max: args.ngrams.1,
        buckets: args.buckets,
        lr: args.lr,
        epochs: args.epochs,
        min_count: args.min_count,
        seed: args.seed,
    };
    hyper.validate()?;

    let corpus = args.data.load_corpus()?;
    let corpus = if args.copies > 0 {
        // augmentation draws random replacement tokens from the corpus
        // vocabulary at the same pruning threshold used for training
        let vocab = Vocabulary::build(&corpus, args.min_count)?;
        augment_corpus(&corpus, args.mask_rate, args.copies, &vocab, args.seed)?
    } else {
        corpus
    };

    let vocab = Vocabulary::build(&corpus, hyper.min_count)?;
    let label_freqs: Vec<u64> = corpus.label_counts().iter().map(|&c| c as u64).collect();
    let mut model =
        ClassifierModel::init(corpus.labels().clone(), &label_freqs, vocab, hyper)?;
    let mode = match args.threads {
        Some(threads) => {
            warnings.push(format!(
                "parallel training with {threads} threads: output is not bitwise reproducible"
            ));
            TrainMode::Parallel { threads }
        }
        None => TrainMode::Deterministic,
    };
    let log = model.train(&corpus, mode)?;
    if args.epochs == 0 {
        warnings.push("epochs = 0: model left at its random initialization".into());
    }

    ModelFile::with_classifier(model).save(&args.out)?;

    let mut outputs = BTreeMap::new();
    outputs.insert("model".to_string(), args.out.display().to_string());
    let manifest = Manifest {
        command: "train",
        per_epoch_objective: Some(log.epoch_objectives.clone()),
        warnings,
        outputs,
        wall_time_secs: started.elapsed().as_secs_f64(),
        config: &args,
    };
    write_manifest(&manifest_path(&args.out), &manifest)?;

    eprintln!(
        "trained {} epochs on {} documents -> {}",
        args.epochs,
        corpus.len(),
        args.out.display()
    );
    Ok(())
}
