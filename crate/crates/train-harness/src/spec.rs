//! Serializable run descriptions: what gets echoed into checkpoints and
//! metrics so a run can be reproduced from its artifacts alone.

use autodiff_core::Precision;
use serde::{Deserialize, Serialize};

use crate::{Error, LanguageModel, Result};

/// Architecture description. Vocabulary size is supplied at build time by
/// the tokenizer, never by configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    Ipa {
        embed_dim: usize,
        max_seq_len: usize,
        layers: usize,
        col_experts: usize,
        row_experts: usize,
        rank: usize,
        #[serde(default = "default_true")]
        tie_head: bool,
        #[serde(default)]
        residual: bool,
        #[serde(default)]
        layernorm: bool,
        #[serde(default)]
        prefix_scale: bool,
    },
    Gpt {
        embed_dim: usize,
        max_seq_len: usize,
        layers: usize,
        heads: usize,
        ff_dim: usize,
        #[serde(default = "default_true")]
        tie_head: bool,
        #[serde(default)]
        layernorm: bool,
    },
}

fn default_true() -> bool {
    true
}

impl ModelSpec {
    pub fn kind_name(&self) -> &'static str {
        match self {
            ModelSpec::Ipa { .. } => "ipa",
            ModelSpec::Gpt { .. } => "gpt",
        }
    }

    pub fn max_seq_len(&self) -> usize {
        match self {
            ModelSpec::Ipa { max_seq_len, .. } | ModelSpec::Gpt { max_seq_len, .. } => {
                *max_seq_len
            }
        }
    }

    pub fn build(
        &self,
        vocab_size: usize,
        seed: u64,
        precision: Precision,
    ) -> Result<Box<dyn LanguageModel>> {
        match *self {
            ModelSpec::Ipa {
                embed_dim,
                max_seq_len,
                layers,
                col_experts,
                row_experts,
                rank,
                tie_head,
                residual,
                layernorm,
                prefix_scale,
            } => {
                let mut cfg = ipa_core::ModelConfig::new(
                    embed_dim,
                    max_seq_len,
                    layers,
                    col_experts,
                    row_experts,
                    rank,
                    vocab_size,
                );
                cfg.tie_head = tie_head;
                cfg.residual = residual;
                cfg.layernorm = layernorm;
                cfg.prefix_scale = prefix_scale;
                cfg.precision = precision;
                if layers == 0 {
                    return Err(Error::Contract("at least one layer is required".into()));
                }
                Ok(Box::new(ipa_core::IpaModel::new(cfg, seed)?))
            }
            ModelSpec::Gpt {
                embed_dim,
                max_seq_len,
                layers,
                heads,
                ff_dim,
                tie_head,
                layernorm,
            } => {
                let mut cfg = baseline_gpt::GptConfig::new(
                    embed_dim,
                    heads,
                    ff_dim,
                    layers,
                    max_seq_len,
                    vocab_size,
                );
                cfg.tie_head = tie_head;
                cfg.layernorm = layernorm;
                if layers == 0 {
                    return Err(Error::Contract("at least one layer is required".into()));
                }
                Ok(Box::new(baseline_gpt::GptModel::new(cfg, seed)?))
            }
        }
    }
}

/// Optimization and loop settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    #[serde(default = "default_lr")]
    pub learning_rate: f64,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    /// Training sequence length m.
    pub seq_len: usize,
    pub max_steps: u64,
    #[serde(default = "default_eval_interval")]
    pub eval_interval: u64,
    /// Evaluation windows sampled per split during training; 0 means the
    /// whole stream.
    #[serde(default = "default_eval_windows")]
    pub eval_windows: usize,
    #[serde(default = "default_beta1")]
    pub beta1: f64,
    #[serde(default = "default_beta2")]
    pub beta2: f64,
    #[serde(default = "default_adam_eps")]
    pub adam_epsilon: f64,
    /// Global-norm gradient clip; null disables.
    #[serde(default = "default_clip")]
    pub grad_clip: Option<f64>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, with = "precision_serde")]
    pub precision: Precision,
}

fn default_lr() -> f64 {
    2e-5
}
fn default_batch() -> usize {
    16
}
fn default_eval_interval() -> u64 {
    500
}
fn default_eval_windows() -> usize {
    32
}
fn default_beta1() -> f64 {
    0.9
}
fn default_beta2() -> f64 {
    0.999
}
fn default_adam_eps() -> f64 {
    1e-8
}
fn default_clip() -> Option<f64> {
    Some(1.0)
}

impl TrainConfig {
    /// Defaults everywhere except the two fields with no sensible default.
    pub fn new(seq_len: usize, max_steps: u64) -> Self {
        TrainConfig {
            learning_rate: default_lr(),
            batch_size: default_batch(),
            seq_len,
            max_steps,
            eval_interval: default_eval_interval(),
            eval_windows: default_eval_windows(),
            beta1: default_beta1(),
            beta2: default_beta2(),
            adam_epsilon: default_adam_eps(),
            grad_clip: default_clip(),
            seed: 0,
            precision: Precision::F64,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.learning_rate < 0.0
            || !self.learning_rate.is_finite()
            || self.beta1 < 0.0
            || self.beta1 >= 1.0
            || self.beta2 < 0.0
            || self.beta2 >= 1.0
            || self.adam_epsilon <= 0.0
        {
            return Err(Error::Contract(
                "optimizer hyperparameters out of range".into(),
            ));
        }
        if self.batch_size == 0 || self.seq_len == 0 {
            return Err(Error::Contract(
                "batch_size and seq_len must be positive".into(),
            ));
        }
        if self.eval_interval == 0 {
            return Err(Error::Contract("eval_interval must be positive".into()));
        }
        if let Some(c) = self.grad_clip {
            if !(c > 0.0) {
                return Err(Error::Contract("grad_clip must be positive".into()));
            }
        }
        Ok(())
    }
}

mod precision_serde {
    use autodiff_core::Precision;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(p: &Precision, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(match p {
            Precision::F32 => "f32",
            Precision::F64 => "f64",
        })
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Precision, D::Error> {
        match String::deserialize(d)?.as_str() {
            "f32" => Ok(Precision::F32),
            "f64" => Ok(Precision::F64),
            other => Err(serde::de::Error::custom(format!(
                "precision must be \"f32\" or \"f64\", got {other:?}"
            ))),
        }
    }
}

/// Identifies the tokenizer a model was trained with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TokenizerRef {
    /// The trivial 257-token byte-level tokenizer.
    ByteLevel,
    /// A trained tokenizer file, pinned by the digest of its canonical
    /// serialization.
    File { path: String, sha256: String },
}

impl TokenizerRef {
    pub fn sha256_of(tokenizer: &tokenizer_bpe::Tokenizer) -> String {
        use sha2::{Digest, Sha256};
        let bytes = tokenizer_bpe::tokenizer_bytes(tokenizer);
        let digest = Sha256::digest(&bytes);
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Everything persisted alongside the tensors in a checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointMeta {
    pub model: ModelSpec,
    pub train: TrainConfig,
    pub vocab_size: usize,
    pub step: u64,
    pub best_eval_loss: Option<f64>,
    pub tokenizer: TokenizerRef,
}

impl CheckpointMeta {
    pub fn fresh(
        model: ModelSpec,
        train: TrainConfig,
        vocab_size: usize,
        tokenizer: TokenizerRef,
    ) -> Self {
        CheckpointMeta {
            model,
            train,
            vocab_size,
            step: 0,
            best_eval_loss: None,
            tokenizer,
        }
    }
}
