use autodiff_core::{Graph, ParamSet, Tensor};

use crate::Result;

/// Mean next-token cross-entropy of per-position logits (vocab x m) against
/// target ids, computed with max-shifted log-sum-exp.
pub fn cross_entropy(logits: &Tensor, targets: &[usize]) -> Result<f64> {
    let params = ParamSet::new();
    let mut g = Graph::with_tracking(&params, false);
    let l = g.constant(logits.clone());
    let loss = g.cross_entropy(l, targets)?;
    Ok(g.value(loss).item()?)
}
