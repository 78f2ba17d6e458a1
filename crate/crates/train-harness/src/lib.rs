//! Training and evaluation harness: corpus ingestion, sequential batching
//! with shifted targets, cross-entropy, an adaptive-moment optimizer,
//! training/eval loops with JSONL metrics, binary checkpoints, and sampling.
//!
//! All model math is deterministic given the seed: batches walk the token
//! stream in order, per-sequence gradients are reduced in batch order
//! regardless of worker threads, and parameter updates are single-writer.

mod adam;
mod batch;
mod checkpoint;
mod corpus;
mod eval;
mod generate;
mod loss;
mod metrics;
mod spec;
mod threads;
mod trainer;

pub use adam::{adam_step, AdamHyper, AdamState};
pub use batch::{batch_at, num_full_batches, Batch};
pub use checkpoint::{
    load_checkpoint, read_checkpoint_raw, save_checkpoint, NamedTensor, CHECKPOINT_MAGIC,
};
pub use corpus::{load_corpus, load_corpus_with_new_tokenizer, Corpus, CorpusSource};
pub use eval::evaluate;
pub use generate::generate;
pub use loss::cross_entropy;
pub use metrics::{read_metrics, MetricsRecord};
pub use spec::{CheckpointMeta, ModelSpec, TokenizerRef, TrainConfig};
pub use threads::init_thread_pool;
pub use trainer::{median_step_ms, train, TrainHooks, TrainOutcome};

use autodiff_core::{Graph, ParamSet, Var};

/// Anything the harness can train: a causal model from token ids to
/// per-position vocabulary logits.
pub trait LanguageModel: Send + Sync {
    fn forward(&self, g: &mut Graph, token_ids: &[usize]) -> autodiff_core::Result<Var>;
    fn params(&self) -> &ParamSet;
    fn params_mut(&mut self) -> &mut ParamSet;
    fn vocab_size(&self) -> usize;
    fn max_seq_len(&self) -> usize;
    fn param_count(&self, m: usize) -> u64;
    /// Serializable description sufficient to rebuild the architecture.
    fn spec(&self) -> ModelSpec;
}

impl LanguageModel for ipa_core::IpaModel {
    fn forward(&self, g: &mut Graph, token_ids: &[usize]) -> autodiff_core::Result<Var> {
        ipa_core::ipa_forward(g, token_ids, self).map_err(Into::into)
    }

    fn params(&self) -> &ParamSet {
        &self.params
    }

    fn params_mut(&mut self) -> &mut ParamSet {
        &mut self.params
    }

    fn vocab_size(&self) -> usize {
        self.config.vocab_size
    }

    fn max_seq_len(&self) -> usize {
        self.config.max_seq_len
    }

    fn param_count(&self, m: usize) -> u64 {
        ipa_core::param_count_ipa(&self.config, m).expect("m validated by caller")
    }

    fn spec(&self) -> ModelSpec {
        ModelSpec::Ipa {
            embed_dim: self.config.embed_dim,
            max_seq_len: self.config.max_seq_len,
            layers: self.config.layers,
            col_experts: self.config.col_experts,
            row_experts: self.config.row_experts,
            rank: self.config.rank,
            tie_head: self.config.tie_head,
            residual: self.config.residual,
            layernorm: self.config.layernorm,
            prefix_scale: self.config.prefix_scale,
        }
    }
}

impl LanguageModel for baseline_gpt::GptModel {
    fn forward(&self, g: &mut Graph, token_ids: &[usize]) -> autodiff_core::Result<Var> {
        baseline_gpt::gpt_forward(g, token_ids, self).map_err(Into::into)
    }

    fn params(&self) -> &ParamSet {
        &self.params
    }

    fn params_mut(&mut self) -> &mut ParamSet {
        &mut self.params
    }

    fn vocab_size(&self) -> usize {
        self.config.vocab_size
    }

    fn max_seq_len(&self) -> usize {
        self.config.max_seq_len
    }

    fn param_count(&self, m: usize) -> u64 {
        baseline_gpt::param_count_gpt(&self.config, m).expect("m validated by caller")
    }

    fn spec(&self) -> ModelSpec {
        ModelSpec::Gpt {
            embed_dim: self.config.embed_dim,
            max_seq_len: self.config.max_seq_len,
            layers: self.config.layers,
            heads: self.config.heads,
            ff_dim: self.config.ff_dim,
            tie_head: self.config.tie_head,
            layernorm: self.config.layernorm,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Autodiff(#[from] autodiff_core::Error),

    #[error(transparent)]
    Tokenizer(#[from] tokenizer_bpe::Error),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("i/o failure: {0}")]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("malformed checkpoint: {0}")]
    Format(String),

    #[error("training diverged at step {step}: loss is not finite")]
    Diverged { step: u64 },

    #[error("gradient for parameter {name:?} is not finite")]
    NanGradient { name: String },
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<ipa_core::Error> for Error {
    fn from(e: ipa_core::Error) -> Self {
        Error::Autodiff(e.into())
    }
}

impl From<baseline_gpt::Error> for Error {
    fn from(e: baseline_gpt::Error) -> Self {
        Error::Autodiff(e.into())
    }
}
