use std::path::PathBuf;

use clap::{Args, ValueEnum};
use vtxt_core::eval::{compare, NamedPredictor};
use vtxt_core::fusion::{load_embeddings, predict_fused_label, DocEmbeddings};
use vtxt_core::model_io::ModelFile;
use vtxt_core::{Error as CoreError, LabelId};

use crate::common::{default_metrics_mode, emit, CliError, CliResult, DataArgs};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Text,
    Csv,
    Json,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub data: DataArgs,

    /// Model file; repeat the flag to compare several models
    #[arg(long, required = true)]
    pub model: Vec<PathBuf>,

    /// External embeddings, required when a model contains a fusion head
    #[arg(long)]
    pub embeddings: Option<PathBuf>,

    #[arg(long, value_enum, default_value_t = OutputFormat::Text)]
    pub format: OutputFormat,

    /// Write the report here instead of standard output
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn run(args: EvaluateArgs) -> CliResult<()> {
    let corpus = args.data.load_corpus()?;
    let mode = default_metrics_mode(&corpus);

    let embeddings: Option<DocEmbeddings> = match &args.embeddings {
        Some(path) => Some(load_embeddings(path)?),
        None => None,
    };

    let mut loaded: Vec<(String, ModelFile)> = Vec::new();
    for path in &args.model {
        loaded.push((path.display().to_string(), ModelFile::load(path)?));
    }

    let mut predictors: Vec<NamedPredictor> = Vec::new();
    for (name, file) in &loaded {
        let base = file.classifier.as_ref().ok_or_else(|| {
            CliError::Core(CoreError::Data(format!("{name}: no classifier section")))
        })?;
        match &file.fusion {
            Some(head) => {
                let emb = embeddings.as_ref().ok_or_else(|| {
                    CliError::config(format!(
                        "{name} contains a fusion head; --embeddings is required"
                    ))
                })?;
                predictors.push((
                    format!("{name} (fused)"),
                    Box::new(move |doc| {
                        let external = emb.get(&doc.id).ok_or_else(|| {
                            CoreError::Data(format!("missing embedding for document {:?}", doc.id))
                        })?;
                        predict_fused_label(head, base, &doc.tokens, external)
                    }),
                ));
            }
            None => {
                predictors.push((
                    name.clone(),
                    Box::new(move |doc| Ok::<LabelId, CoreError>(base.predict_label(&doc.tokens))),
                ));
            }
        }
    }

    let table = compare(&predictors, &corpus, mode)?;
    if table.rows.iter().all(|r| r.metrics.is_none()) {
        for row in &table.rows {
            eprintln!("{}: {}", row.name, row.error.as_deref().unwrap_or("failed"));
        }
        return Err(CliError::Core(CoreError::Data(
            "every model failed on the test set".into(),
        )));
    }

    let rendered = match args.format {
        OutputFormat::Text => table.render_text(),
        OutputFormat::Csv => table.render_csv(),
        OutputFormat::Json => table.render_json()?,
    };
    emit(args.out.as_deref(), &rendered)
}
