use std::collections::BTreeMap;
use std::path::PathBuf;
use std::time::Instant;

use clap::Args;
use serde::Serialize;
use vtxt_core::corpus::{Corpus, Document, Provenance};
use vtxt_core::lm::{train_lm, LmOptions};
use vtxt_core::model_io::ModelFile;
use vtxt_core::Error as CoreError;

use crate::common::{manifest_path, write_manifest, CliError, CliResult, DataArgs, Manifest};

#[derive(Debug, Args, Serialize)]
pub struct LmArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub data: DataArgs,

    /// Output model file (NGLM section)
    #[arg(long)]
    pub out: PathBuf,

    /// Train only on documents of this label name (default: all documents)
    #[arg(long)]
    pub class: Option<String>,

    /// N-gram order (2..=4)
    #[arg(long, default_value_t = 2)]
    pub lm_order: usize,

    /// Add-k smoothing constant (0 disables smoothing)
    #[arg(long, default_value_t = 0.1)]
    pub smoothing: f64,

    /// Tokens rarer than this map to the unknown type
    #[arg(long, default_value_t = 1)]
    pub min_count: u64,
}

pub fn run(args: LmArgs) -> CliResult<()> {
    let started = Instant::now();
    let corpus = args.data.load_corpus()?;

    let (corpus, descriptor) = match &args.class {
        Some(name) => {
            let class = corpus.labels().id_of(name).ok_or_else(|| {
                CliError::Core(CoreError::Config(format!(
                    "class {:?} not in the label set {:?}",
                    name,
                    corpus.labels().names()
                )))
            })?;
            let documents: Vec<Document> = corpus
                .documents()
                .iter()
                .filter(|d| d.label == class)
                .cloned()
                .collect();
            if documents.is_empty() {
                return Err(CliError::Core(CoreError::Data(format!(
                    "no documents with label {name:?}"
                ))));
            }
            let filtered = Corpus::from_documents(
                documents,
                corpus.labels().clone(),
                Provenance {
                    source: corpus.provenance().source.clone(),
                    preprocess_digest: corpus.provenance().preprocess_digest.clone(),
                },
            )?;
            (filtered, format!("class={name}"))
        }
        None => (corpus, "all".to_string()),
    };

    let model = train_lm(
        &corpus,
        &LmOptions {
            order: args.lm_order,
            k: args.smoothing,
            min_count: args.min_count,
            descriptor: descriptor.clone(),
        },
    )?;
    let vocab_size = model.vocab_size();
    ModelFile::with_lm(model).save(&args.out)?;

    let mut outputs = BTreeMap::new();
    outputs.insert("model".to_string(), args.out.display().to_string());
    let manifest = Manifest {
        command: "lm",
        per_epoch_objective: None,
        warnings: Vec::new(),
        outputs,
        wall_time_secs: started.elapsed().as_secs_f64(),
        config: &args,
    };
    write_manifest(&manifest_path(&args.out), &manifest)?;

    eprintln!(
        "trained order-{} model ({descriptor}, {} word types, {} documents) -> {}",
        args.lm_order,
        vocab_size,
        corpus.len(),
        args.out.display()
    );
    Ok(())
}
