use std::collections::BTreeMap;
use std::path::PathBuf;
use std::time::Instant;

use clap::Args;
use serde::Serialize;
use vtxt_core::fusion::{load_embeddings, train_fused, FusedHyper};
use vtxt_core::model_io::ModelFile;
use vtxt_core::Error as CoreError;

use crate::common::{manifest_path, write_manifest, CliError, CliResult, DataArgs, Manifest};

#[derive(Debug, Args, Serialize)]
pub struct FuseArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub data: DataArgs,

    /// Trained base model file
    #[arg(long)]
    pub model: PathBuf,

    /// External document embeddings (header `N e`, then `doc_id f_1 .. f_e`)
    #[arg(long)]
    pub embeddings: PathBuf,

    /// Output container: base classifier plus the fused head
    #[arg(long)]
    pub out: PathBuf,

    #[arg(long, default_value_t = 0.1)]
    pub lr: f64,

    #[arg(long, default_value_t = 5)]
    pub epochs: usize,

    #[arg(long, default_value_t = 42)]
    pub seed: u64,
}

pub fn run(args: FuseArgs) -> CliResult<()> {
    let started = Instant::now();
    let corpus = args.data.load_corpus()?;
    let file = ModelFile::load(&args.model)?;
    let base = file.classifier.ok_or_else(|| {
        CliError::Core(CoreError::Data(format!(
            "{}: no classifier section",
            args.model.display()
        )))
    })?;
    let embeddings = load_embeddings(&args.embeddings)?;

    let (head, log) = train_fused(
        &base,
        &embeddings,
        &corpus,
        &FusedHyper {
            lr: args.lr,
            epochs: args.epochs,
            seed: args.seed,
        },
    )?;

    let container = ModelFile {
        classifier: Some(base),
        lms: Vec::new(),
        fusion: Some(head),
    };
    container.save(&args.out)?;

    let mut outputs = BTreeMap::new();
    outputs.insert("model".to_string(), args.out.display().to_string());
    let manifest = Manifest {
        command: "fuse",
        per_epoch_objective: Some(log.epoch_objectives.clone()),
        warnings: Vec::new(),
        outputs,
        wall_time_secs: started.elapsed().as_secs_f64(),
        config: &args,
    };
    write_manifest(&manifest_path(&args.out), &manifest)?;

    eprintln!(
        "fused head trained over {} documents -> {}",
        corpus.len(),
        args.out.display()
    );
    Ok(())
}
