//! The causal column operation: every output column is an affine function
//! of the input columns at or before it, with per-expert affine maps mixed
//! by attention-style kernels normalized across experts.

use autodiff_core::{Graph, ParamId, ParamSet, Tensor, Var};
use rand_chacha::ChaCha8Rng;

use crate::init::uniform_fan_in;
use crate::{Error, Result};

/// Learnable state of one column operation: per expert a low-rank factored
/// affine map and a low-rank factored kernel form, plus one shared bias.
#[derive(Debug, Clone)]
pub struct ColumnOpParams {
    /// Affine map factors, expert p maps a column x to s_left[p] (s_right[p] x).
    pub s_left: Vec<ParamId>,
    pub s_right: Vec<ParamId>,
    /// Kernel form factors; the kernel logit for (query j, key l) is
    /// x_l^T (w_left[p] w_right[p]) x_j.
    pub w_left: Vec<ParamId>,
    pub w_right: Vec<ParamId>,
    /// Shared output bias, one value per embedding row.
    pub bias: ParamId,
    embed_dim: usize,
    max_seq_len: usize,
}

impl ColumnOpParams {
    pub fn init(
        params: &mut ParamSet,
        prefix: &str,
        embed_dim: usize,
        rank: usize,
        experts: usize,
        max_seq_len: usize,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        let mut s_left = Vec::with_capacity(experts);
        let mut s_right = Vec::with_capacity(experts);
        let mut w_left = Vec::with_capacity(experts);
        let mut w_right = Vec::with_capacity(experts);
        for p in 0..experts {
            s_left.push(params.add(
                format!("{prefix}.s_left.{p}"),
                uniform_fan_in(rng, &[embed_dim, rank], rank),
            ));
            s_right.push(params.add(
                format!("{prefix}.s_right.{p}"),
                uniform_fan_in(rng, &[rank, embed_dim], embed_dim),
            ));
            w_left.push(params.add(
                format!("{prefix}.w_left.{p}"),
                uniform_fan_in(rng, &[embed_dim, rank], rank),
            ));
            w_right.push(params.add(
                format!("{prefix}.w_right.{p}"),
                uniform_fan_in(rng, &[rank, embed_dim], embed_dim),
            ));
        }
        let bias = params.add(format!("{prefix}.bias"), Tensor::zeros(&[embed_dim]));
        ColumnOpParams {
            s_left,
            s_right,
            w_left,
            w_right,
            bias,
            embed_dim,
            max_seq_len,
        }
    }

    pub fn experts(&self) -> usize {
        self.s_left.len()
    }

    fn check_input(&self, g: &Graph, x: Var) -> Result<usize> {
        let shape = g.shape(x);
        if shape.len() != 2 || shape[0] != self.embed_dim {
            return Err(autodiff_core::Error::Shape {
                op: "column_forward",
                lhs: shape.to_vec(),
                rhs: vec![self.embed_dim, self.max_seq_len],
            }
            .into());
        }
        let m = shape[1];
        if m > self.max_seq_len {
            return Err(Error::Contract(format!(
                "sequence length {m} exceeds maximum {}",
                self.max_seq_len
            )));
        }
        Ok(m)
    }
}

/// Kernel weights for every expert and ordered position pair.
///
/// Output has shape [experts, m, m] indexed `[p, j, l]` for query position
/// j and key position l. For l <= j the weights of one (j, l) pair sum to 1
/// across experts (normalized exponential of the kernel logits, max-shifted
/// over experts); entries with l > j are exactly zero.
pub fn column_kernel(g: &mut Graph, x: Var, params: &ColumnOpParams) -> Result<Var> {
    let m = params.check_input(g, x)?;
    let experts = params.experts();

    let xt = g.transpose(x)?;
    let mut stacked = Vec::with_capacity(experts);
    for p in 0..experts {
        let wl = g.param(params.w_left[p]);
        let wr = g.param(params.w_right[p]);
        let left = g.matmul(xt, wl)?; // m x k, row l = x_l^T W_left
        let right = g.matmul(wr, x)?; // k x m, col j = W_right x_j
        let logits_lj = g.matmul(left, right)?; // [l, j]
        let logits_jl = g.transpose(logits_lj)?; // [j, l]
        stacked.push(g.reshape(logits_jl, &[1, m, m])?);
    }
    let logits = g.concat(&stacked, 0)?; // [p, j, l]
    let weights = g.softmax_axis(logits, 0)?;

    // Causal mask: key positions after the query are zeroed outright (the
    // normalization across experts is untouched; it never mixes positions).
    let mut mask = vec![false; experts * m * m];
    for p in 0..experts {
        for j in 0..m {
            for l in (j + 1)..m {
                mask[(p * m + j) * m + l] = true;
            }
        }
    }
    Ok(g.masked_fill(weights, mask, 0.0)?)
}

/// Forward pass of the column operation.
///
/// Output column j is `bias + sum_{l<=j} sum_p K[p,j,l] * (S_p x_l)` with
/// S_p applied through its factors. One S_p and one kernel form per expert
/// are shared across all positions. With `prefix_scale` the mixture term of
/// column j is scaled by 1/j (1-based), normalizing the prefix sum; default
/// behavior leaves the sum unnormalized.
pub fn column_forward(
    g: &mut Graph,
    x: Var,
    params: &ColumnOpParams,
    prefix_scale: bool,
) -> Result<Var> {
    let m = params.check_input(g, x)?;
    let kernel = column_kernel(g, x, params)?;

    let mut acc: Option<Var> = None;
    for p in 0..params.experts() {
        let sr = g.param(params.s_right[p]);
        let sl = g.param(params.s_left[p]);
        let reduced = g.matmul(sr, x)?;
        let mapped = g.matmul(sl, reduced)?; // n x m, col l = S_p x_l

        let kp = g.slice_axis(kernel, 0, p, 1)?;
        let kp = g.reshape(kp, &[m, m])?; // [j, l]
        let kp_lj = g.transpose(kp)?; // [l, j]
        let mixed = g.matmul(mapped, kp_lj)?; // col j = sum_l K[p,j,l] S_p x_l
        acc = Some(match acc {
            Some(a) => g.add(a, mixed)?,
            None => mixed,
        });
    }
    let mut total = acc.expect("at least one expert");

    if prefix_scale {
        let n = params.embed_dim;
        let scale = Tensor::from_fn(&[n, m], |ix| 1.0 / (ix[1] + 1) as f64);
        let sv = g.constant(scale);
        total = g.mul(total, sv)?;
    }

    let bias = g.param(params.bias);
    let bias_cols = g.broadcast(bias, 1, m)?;
    Ok(g.add(total, bias_cols)?)
}
