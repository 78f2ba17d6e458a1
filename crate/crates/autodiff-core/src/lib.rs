//! Dense tensor arithmetic with reverse-mode automatic differentiation.
//!
//! The engine records operations on a tape ([`Graph`]) over a borrowed
//! [`ParamSet`]; one reverse sweep fills per-parameter gradients. Storage is
//! contiguous row-major `f64`. There is no operator fusion and no implicit
//! broadcasting; every supported operation has an exact derivative rule that
//! is validated against central finite differences in the test suite.
//!
//! A frozen `ParamSet` is immutable during forward/backward and safe to share
//! across threads; independent graphs over the same parameters may run
//! concurrently. Gradient accumulation into parameters is single-writer.

mod error;
mod gradcheck;
mod graph;
mod param;
mod tensor;

pub use error::{Error, Result};
pub use gradcheck::grad_check;
pub use graph::{Graph, OpKind, Var};
pub use param::{Gradients, ParamId, ParamSet, Parameter};
pub use tensor::{Precision, Tensor};
