use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use train_harness::{CorpusSource, ModelSpec, TrainConfig};

use crate::CliError;

/// One experiment, fully described. Unknown keys are rejected so a typo
/// cannot silently fall back to a default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelSpec,
    pub train: TrainConfig,
    pub data: DataConfig,
    pub out: OutConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    /// Single-file mode: one text file cut by `fractions`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub corpus: Option<PathBuf>,
    #[serde(default = "default_fractions")]
    pub fractions: [f64; 3],
    /// Pre-split mode: three explicit files.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub valid: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test: Option<PathBuf>,
    /// Tokenizer file; absent means the byte-level tokenizer.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tokenizer: Option<PathBuf>,
}

fn default_fractions() -> [f64; 3] {
    [0.8, 0.1, 0.1]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutConfig {
    pub checkpoint: PathBuf,
    pub metrics: PathBuf,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::io(format!("cannot read config {}: {e}", path.display())))?;
        let cfg: RunConfig = serde_json::from_str(&text)
            .map_err(|e| CliError::config(format!("invalid config {}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.train
            .validate()
            .map_err(|e| CliError::config(format!("train: {e}")))?;
        if self.train.seq_len > self.model.max_seq_len() {
            return Err(CliError::config(format!(
                "train.seq_len {} exceeds model.max_seq_len {}",
                self.train.seq_len,
                self.model.max_seq_len()
            )));
        }
        self.data.source()?;
        Ok(())
    }
}

impl DataConfig {
    pub fn source(&self) -> Result<CorpusSource, CliError> {
        match (&self.corpus, &self.train, &self.valid, &self.test) {
            (Some(path), None, None, None) => Ok(CorpusSource::SingleFile {
                path: path.clone(),
                fractions: self.fractions,
            }),
            (None, Some(train), Some(valid), Some(test)) => Ok(CorpusSource::PreSplit {
                train: train.clone(),
                valid: valid.clone(),
                test: test.clone(),
            }),
            _ => Err(CliError::config(
                "data must set either corpus (single file) or all of train/valid/test".into(),
            )),
        }
    }
}
