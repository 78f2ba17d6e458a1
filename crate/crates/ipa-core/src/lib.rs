//! Iterative piecewise affine sequence modeling.
//!
//! Layers compose two operations on an embedding matrix whose columns are
//! token positions: a causal column operation (each output column is a
//! kernel-weighted mixture of per-expert affine maps over the columns at or
//! before it) and a per-position row operation (a Gaussian-kernel mixture of
//! per-expert affine maps of the current column). Affine maps are low-rank
//! factored and shared across positions; the only position-dependent
//! parameter is the row operation's bias.

mod affine1d;
mod column;
mod config;
mod init;
mod model;
mod row;

pub use affine1d::{piecewise_affine_1d, Center};
pub use column::{column_forward, column_kernel, ColumnOpParams};
pub use config::ModelConfig;
pub use model::{ipa_forward, normalize_columns, param_count_ipa, IpaLayer, IpaModel};
pub use row::{row_forward, row_kernel, RowOpParams};

/// Errors from model construction and forward evaluation.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Autodiff(#[from] autodiff_core::Error),

    #[error("contract violation: {0}")]
    Contract(String),
}

pub type Result<T> = std::result::Result<T, Error>;

// Lets forward passes slot into engine-level callbacks such as grad_check.
impl From<Error> for autodiff_core::Error {
    fn from(e: Error) -> Self {
        match e {
            Error::Autodiff(inner) => inner,
            Error::Contract(msg) => autodiff_core::Error::Contract(msg),
        }
    }
}
