use autodiff_core::Precision;

use crate::{Error, Result};

/// Hyperparameters of an IPA model.
///
/// `layers == 0` is tolerated as a degenerate configuration (embedding
/// straight into the head) so the head path can be tested in isolation;
/// anything user-facing should keep at least one layer.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    /// Embedding size n.
    pub embed_dim: usize,
    /// Maximum sequence length; the per-position bias has this many columns.
    pub max_seq_len: usize,
    /// Layer count.
    pub layers: usize,
    /// Experts in the column operation.
    pub col_experts: usize,
    /// Experts in the row operation.
    pub row_experts: usize,
    /// Low-rank factor width k for the column maps (k <= embed_dim).
    pub rank: usize,
    /// Vocabulary size.
    pub vocab_size: usize,
    /// Share the embedding table with the prediction head.
    pub tie_head: bool,
    /// Wrap each sublayer in a residual connection.
    pub residual: bool,
    /// Parameter-free normalization before each sublayer.
    pub layernorm: bool,
    /// Scale the column mixture at position j by 1/j instead of leaving the
    /// prefix sum unnormalized.
    pub prefix_scale: bool,
    /// Storage precision tag (all arithmetic runs in f64).
    pub precision: Precision,
}

impl ModelConfig {
    pub fn new(
        embed_dim: usize,
        max_seq_len: usize,
        layers: usize,
        col_experts: usize,
        row_experts: usize,
        rank: usize,
        vocab_size: usize,
    ) -> Self {
        ModelConfig {
            embed_dim,
            max_seq_len,
            layers,
            col_experts,
            row_experts,
            rank,
            vocab_size,
            tie_head: true,
            residual: false,
            layernorm: false,
            prefix_scale: false,
            precision: Precision::F64,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.embed_dim == 0 {
            return Err(Error::Contract("embed_dim must be positive".into()));
        }
        if self.rank == 0 || self.rank > self.embed_dim {
            return Err(Error::Contract(format!(
                "rank must satisfy 1 <= rank <= embed_dim, got rank {} with embed_dim {}",
                self.rank, self.embed_dim
            )));
        }
        if self.col_experts == 0 {
            return Err(Error::Contract("col_experts must be at least 1".into()));
        }
        if self.row_experts == 0 {
            return Err(Error::Contract("row_experts must be at least 1".into()));
        }
        if self.max_seq_len == 0 {
            return Err(Error::Contract("max_seq_len must be at least 1".into()));
        }
        if self.vocab_size == 0 {
            return Err(Error::Contract("vocab_size must be positive".into()));
        }
        Ok(())
    }
}
