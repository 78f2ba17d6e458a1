//! Plain GPT-style causal decoder: learned positional embeddings, multi-head
//! causal self-attention, pointwise feedforward with max(0, .) nonlinearity,
//! residual connections, and an affine vocabulary head. Structured for
//! parameter-matched comparison against the IPA model (heads to column
//! experts, per-head width to the factor rank, feedforward ratio to row
//! experts).

mod config;
mod model;

pub use config::GptConfig;
pub use model::{
    ensure_kink_free, gpt_forward, gpt_forward_traced, kink_margin, multi_head_attention,
    param_count_gpt, GptLayerParams, GptModel, GptTrace,
};

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Autodiff(#[from] autodiff_core::Error),

    #[error("contract violation: {0}")]
    Contract(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<Error> for autodiff_core::Error {
    fn from(e: Error) -> Self {
        match e {
            Error::Autodiff(inner) => inner,
            Error::Contract(msg) => autodiff_core::Error::Contract(msg),
        }
    }
}
