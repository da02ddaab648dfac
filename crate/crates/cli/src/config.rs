//! Run configuration: one TOML document plus `--set` and `--seed` overrides.

use std::path::{Path, PathBuf};

use aptrigger::corpus::{ExtractionConfig, ALL_DATASET};
use aptrigger::model::ModelConfig;
use aptrigger::train::TrainConfig;
use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::UsageError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    /// Annotated corpus read by `extract`.
    pub corpus: Option<PathBuf>,
    /// Word vectors; without them neural models use random vectors.
    pub embeddings: Option<PathBuf>,
    /// Root of all outputs.
    pub out: PathBuf,
}

impl Default for Paths {
    fn default() -> Self {
        Paths {
            corpus: None,
            embeddings: None,
            out: PathBuf::from("out"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Global seed; overrides the seeds of the extraction and train sections.
    pub seed: u64,
    /// Dataset trained on: an adverb or `all`.
    pub dataset: String,
    pub paths: Paths,
    pub extraction: ExtractionConfig,
    pub model: ModelConfig,
    pub train: TrainConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            dataset: ALL_DATASET.to_string(),
            paths: Paths::default(),
            extraction: ExtractionConfig::default(),
            model: ModelConfig::default(),
            train: TrainConfig::default(),
        }
    }
}

/// Parse the right-hand side of `--set`: any TOML value, else a bare string.
fn parse_value(raw: &str) -> Value {
    match toml::from_str::<Table>(&format!("v = {raw}")) {
        Ok(mut t) => t.remove("v").expect("key v was just parsed"),
        Err(_) => Value::String(raw.to_string()),
    }
}

/// Set the dotted `key` in `table`, creating intermediate tables.
pub fn apply_override(table: &mut Table, assignment: &str) -> Result<(), UsageError> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| UsageError(format!("--set expects key=value, got {assignment:?}")))?;
    let parts: Vec<&str> = key.trim().split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(UsageError(format!("bad key {key:?} in --set")));
    }
    let mut node = table;
    for part in &parts[..parts.len() - 1] {
        let entry = node
            .entry(part.to_string())
            .or_insert_with(|| Value::Table(Table::new()));
        node = entry
            .as_table_mut()
            .ok_or_else(|| UsageError(format!("--set {key}: {part} is not a table")))?;
    }
    node.insert(parts[parts.len() - 1].to_string(), parse_value(raw.trim()));
    Ok(())
}

fn resolve(base: &Path, p: &mut PathBuf) {
    if p.is_relative() {
        *p = base.join(&*p);
    }
}

impl RunConfig {
    /// Load `path` (defaults when absent), apply overrides in order, then
    /// the seed. Relative paths in the file are taken from its directory.
    pub fn load(
        path: Option<&Path>,
        overrides: &[String],
        seed: Option<u64>,
    ) -> Result<Self, UsageError> {
        let mut table = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| UsageError(format!("cannot read config {}: {e}", p.display())))?;
                toml::from_str::<Table>(&text)
                    .map_err(|e| UsageError(format!("{}: {e}", p.display())))?
            }
            None => Table::new(),
        };
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        if let Some(s) = seed {
            table.insert("seed".into(), Value::Integer(s as i64));
        }
        let mut cfg: RunConfig = table
            .try_into()
            .map_err(|e| UsageError(format!("invalid configuration: {e}")))?;
        let base = path.and_then(Path::parent).unwrap_or(Path::new(""));
        if let Some(c) = cfg.paths.corpus.as_mut() {
            resolve(base, c);
        }
        if let Some(e) = cfg.paths.embeddings.as_mut() {
            resolve(base, e);
        }
        resolve(base, &mut cfg.paths.out);
        cfg.extraction.seed = cfg.seed;
        cfg.train.seed = cfg.seed;
        cfg.extraction
            .validate()
            .map_err(|e| UsageError(format!("extraction config: {e}")))?;
        cfg.train
            .validate()
            .map_err(|e| UsageError(format!("train config: {e}")))?;
        Ok(cfg)
    }

    pub fn datasets_dir(&self) -> PathBuf {
        self.paths.out.join("datasets")
    }

    pub fn checkpoints_dir(&self) -> PathBuf {
        self.paths.out.join("checkpoints")
    }

    pub fn reports_dir(&self) -> PathBuf {
        self.paths.out.join("reports")
    }

    pub fn stats_dir(&self) -> PathBuf {
        self.paths.out.join("stats")
    }

    pub fn split_path(&self, dataset: &str, split: &str) -> PathBuf {
        self.datasets_dir()
            .join(dataset)
            .join(format!("{split}.jsonl"))
    }
}
