//! Shared plumbing: error-to-exit-code mapping, dataset flags, manifests.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::Args;
use serde::Serialize;
use vtxt_core::corpus::{load_stopwords, ColumnSchema, PreprocessConfig};
use vtxt_core::eval::MetricsMode;
use vtxt_core::{Corpus, Error as CoreError};

/// CLI-level error carrying the exit-code class.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Core(CoreError),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(msg) => write!(f, "config error: {msg}"),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        CliError::Core(e)
    }
}

impl CliError {
    /// 0 ok / 1 config / 2 data / 3 numeric.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Core(CoreError::Config(_)) => 1,
            CliError::Core(CoreError::Numeric(_)) => 3,
            CliError::Core(_) => 2,
        }
    }

    pub fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }
}

pub type CliResult<T> = Result<T, CliError>;

/// Dataset and preprocessing flags shared by corpus-consuming commands.
#[derive(Debug, Clone, Args, Serialize)]
pub struct DataArgs {
    /// Labeled CSV dataset with a header row
    #[arg(long)]
    pub data: PathBuf,

    /// Name of the text column
    #[arg(long, default_value = "Content")]
    pub content_column: String,

    /// Name of the label column
    #[arg(long, default_value = "Label")]
    pub label_column: String,

    /// Stopword file: UTF-8, one token per line
    #[arg(long)]
    pub stopwords: Option<PathBuf>,

    /// Keep original letter case (default lowercases)
    #[arg(long)]
    pub no_lowercase: bool,

    /// Keep emoticon/emoji codepoints (default strips them)
    #[arg(long)]
    pub keep_emoticons: bool,
}

impl DataArgs {
    pub fn preprocess_config(&self) -> CliResult<PreprocessConfig> {
        let stopwords = match &self.stopwords {
            Some(path) => load_stopwords(path)?,
            None => Default::default(),
        };
        Ok(PreprocessConfig {
            lowercase: !self.no_lowercase,
            strip_emoticons: !self.keep_emoticons,
            stopwords,
        })
    }

    pub fn schema(&self) -> ColumnSchema {
        ColumnSchema {
            content: self.content_column.clone(),
            label: self.label_column.clone(),
        }
    }

    pub fn load_corpus(&self) -> CliResult<Corpus> {
        let config = self.preprocess_config()?;
        Ok(Corpus::load(&self.data, &self.schema(), &config, None)?)
    }
}

/// Binary mode with class "1" positive when the label table has it (or is
/// binary), macro otherwise.
pub fn default_metrics_mode(corpus: &Corpus) -> MetricsMode {
    if let Some(id) = corpus.labels().id_of("1") {
        return MetricsMode::Binary { positive: id };
    }
    if corpus.labels().len() == 2 {
        return MetricsMode::Binary { positive: 1 };
    }
    MetricsMode::Macro
}

/// Run manifest written next to produced artifacts: the full configuration,
/// recorded objectives, and wall time, so a run can be reproduced exactly
/// from its manifest (wall time aside).
#[derive(Debug, Serialize)]
pub struct Manifest<C: Serialize> {
    pub command: &'static str,
    pub config: C,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub per_epoch_objective: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
    pub outputs: BTreeMap<String, String>,
    pub wall_time_secs: f64,
}

pub fn write_manifest<C: Serialize>(path: &Path, manifest: &Manifest<C>) -> CliResult<()> {
    let json = serde_json::to_string_pretty(manifest)
        .map_err(|e| CliError::config(format!("manifest serialization: {e}")))?;
    std::fs::write(path, json)
        .map_err(|e| CliError::Core(CoreError::io(path.display().to_string(), e)))?;
    Ok(())
}

pub fn manifest_path(out: &Path) -> PathBuf {
    let mut name = out.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    out.with_file_name(name)
}

/// Parses `lo,hi` for `--ngrams`; `hi < lo` disables n-grams.
pub fn parse_ngram_range(s: &str) -> Result<(usize, usize), String> {
    let (lo, hi) = s
        .split_once(',')
        .ok_or_else(|| format!("expected lo,hi (e.g. 2,2), got {s:?}"))?;
    let lo = lo.trim().parse().map_err(|_| format!("bad n-gram min {lo:?}"))?;
    let hi = hi.trim().parse().map_err(|_| format!("bad n-gram max {hi:?}"))?;
    Ok((lo, hi))
}

/// Writes to the path, or to standard output when `out` is `None`.
pub fn emit(out: Option<&Path>, content: &str) -> CliResult<()> {
    match out {
        Some(path) => std::fs::write(path, content)
            .map_err(|e| CliError::Core(CoreError::io(path.display().to_string(), e)))?,
        None => print!("{content}"),
    }
    Ok(())
}
