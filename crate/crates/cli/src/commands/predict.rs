use std::io::{BufRead, Write};
use std::path::PathBuf;

use clap::Args;
use serde_json::json;
use vtxt_core::corpus::{load_dataset, load_stopwords, preprocess, ColumnSchema, PreprocessConfig};
use vtxt_core::model_io::ModelFile;
use vtxt_core::{ClassifierModel, Error as CoreError, TokenSequence};

use crate::common::{CliError, CliResult};

#[derive(Debug, Args)]
pub struct PredictArgs {
    /// Trained model file
    #[arg(long)]
    pub model: PathBuf,

    /// Input documents: one per line, a CSV (by .csv extension), or `-` for
    /// standard input lines
    #[arg(long)]
    pub data: PathBuf,

    /// Text column when the input is a CSV
    #[arg(long, default_value = "Content")]
    pub content_column: String,

    /// Stopword file applied during preprocessing
    #[arg(long)]
    pub stopwords: Option<PathBuf>,

    /// Keep original letter case
    #[arg(long)]
    pub no_lowercase: bool,

    /// Keep emoticon/emoji codepoints
    #[arg(long)]
    pub keep_emoticons: bool,
}

fn prediction_line(model: &ClassifierModel, id: &str, tokens: &TokenSequence) -> String {
    let probs = model.predict(tokens);
    let mut by_name = serde_json::Map::new();
    for (i, p) in probs.iter().enumerate() {
        let name = model.labels().name(i as u32).unwrap_or("?").to_string();
        by_name.insert(name, json!(p));
    }
    let mut best = 0usize;
    for (i, p) in probs.iter().enumerate() {
        if *p > probs[best] {
            best = i;
        }
    }
    json!({
        "id": id,
        "label": model.labels().name(best as u32).unwrap_or("?"),
        "probabilities": by_name,
    })
    .to_string()
}

pub fn run(args: PredictArgs) -> CliResult<()> {
    let file = ModelFile::load(&args.model)?;
    let model = file
        .classifier
        .ok_or_else(|| CliError::Core(CoreError::Data("model file has no classifier".into())))?;

    let config = PreprocessConfig {
        lowercase: !args.no_lowercase,
        strip_emoticons: !args.keep_emoticons,
        stopwords: match &args.stopwords {
            Some(path) => load_stopwords(path)?,
            None => Default::default(),
        },
    };

    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    let mut emit = |line: String| -> CliResult<()> {
        writeln!(out, "{line}")
            .map_err(|e| CliError::Core(CoreError::io("stdout".to_string(), e)))
    };

    let is_csv = args
        .data
        .extension()
        .is_some_and(|ext| ext.eq_ignore_ascii_case("csv"));

    if args.data.as_os_str() == "-" {
        let stdin = std::io::stdin();
        for (i, line) in stdin.lock().lines().enumerate() {
            let id = (i + 1).to_string();
            match line {
                Ok(text) => emit(prediction_line(&model, &id, &preprocess(&text, &config)))?,
                Err(e) => emit(json!({"id": id, "error": e.to_string()}).to_string())?,
            }
        }
    } else if is_csv {
        let schema = ColumnSchema {
            content: args.content_column.clone(),
            // prediction input needs no labels; reuse the content column so
            // unlabeled CSVs work too
            label: args.content_column.clone(),
        };
        for record in load_dataset(&args.data, &schema)? {
            let id = record.row_index.to_string();
            emit(prediction_line(
                &model,
                &id,
                &preprocess(&record.content, &config),
            ))?;
        }
    } else {
        let content = std::fs::read(&args.data)
            .map_err(|e| CliError::Core(CoreError::io(args.data.display().to_string(), e)))?;
        for (i, raw) in content.split(|&b| b == b'\n').enumerate() {
            let raw = raw.strip_suffix(b"\r").unwrap_or(raw);
            if raw.is_empty() {
                continue; // blank line or trailing newline
            }
            let id = (i + 1).to_string();
            match std::str::from_utf8(raw) {
                Ok(text) => emit(prediction_line(&model, &id, &preprocess(text, &config)))?,
                Err(e) => emit(
                    json!({"id": id, "error": format!("invalid UTF-8: {e}")}).to_string(),
                )?,
            }
        }
    }
    Ok(())
}
