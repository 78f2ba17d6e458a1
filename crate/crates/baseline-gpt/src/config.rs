use crate::{Error, Result};

/// Hyperparameters of the decoder baseline.
#[derive(Debug, Clone, PartialEq)]
pub struct GptConfig {
    /// Embedding size n.
    pub embed_dim: usize,
    /// Attention head count; must divide embed_dim.
    pub heads: usize,
    /// Feedforward inner dimension.
    pub ff_dim: usize,
    /// Layer count.
    pub layers: usize,
    /// Maximum sequence length (positional table height).
    pub max_seq_len: usize,
    /// Vocabulary size.
    pub vocab_size: usize,
    /// Share the embedding table with the prediction head.
    pub tie_head: bool,
    /// Parameter-free pre-normalization before each sublayer.
    pub layernorm: bool,
}

impl GptConfig {
    pub fn new(
        embed_dim: usize,
        heads: usize,
        ff_dim: usize,
        layers: usize,
        max_seq_len: usize,
        vocab_size: usize,
    ) -> Self {
        GptConfig {
            embed_dim,
            heads,
            ff_dim,
            layers,
            max_seq_len,
            vocab_size,
            tie_head: true,
            layernorm: false,
        }
    }

    pub fn head_dim(&self) -> usize {
        self.embed_dim / self.heads
    }

    pub fn validate(&self) -> Result<()> {
        if self.embed_dim == 0 || self.vocab_size == 0 || self.max_seq_len == 0 {
            return Err(Error::Contract(
                "embed_dim, vocab_size and max_seq_len must be positive".into(),
            ));
        }
        if self.heads == 0 || self.embed_dim % self.heads != 0 {
            return Err(Error::Contract(format!(
                "heads must divide embed_dim, got {} heads for embed_dim {}",
                self.heads, self.embed_dim
            )));
        }
        if self.ff_dim == 0 {
            return Err(Error::Contract("ff_dim must be positive".into()));
        }
        Ok(())
    }
}
