//! The causal row operation. The diagonal constraint on the row-space
//! coefficient matrices makes the operation act on each position
//! independently: output column j is a Gaussian-kernel mixture of per-expert
//! affine maps of input column j, plus a per-position bias.

use autodiff_core::{Graph, ParamId, ParamSet, Tensor, Var};
use rand_chacha::ChaCha8Rng;

use crate::init::{standard_normal, uniform_fan_in};
use crate::{Error, Result};

/// Learnable state of one row operation.
#[derive(Debug, Clone)]
pub struct RowOpParams {
    /// Per-expert affine maps (each embed_dim x embed_dim); entry (i, r)
    /// is the shared diagonal value of the row-space coefficient between
    /// output row i and input row r.
    pub affine: Vec<ParamId>,
    /// Kernel centers, one row per expert (experts x embed_dim).
    pub centers: ParamId,
    /// Per-expert log bandwidth; stored in the log domain so the bandwidth
    /// stays positive under gradient updates.
    pub log_bandwidth: ParamId,
    /// Per-position bias (embed_dim x max_seq_len), the only
    /// position-dependent parameter in the model.
    pub pos_bias: ParamId,
    embed_dim: usize,
    max_seq_len: usize,
}

impl RowOpParams {
    pub fn init(
        params: &mut ParamSet,
        prefix: &str,
        embed_dim: usize,
        experts: usize,
        max_seq_len: usize,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        let mut affine = Vec::with_capacity(experts);
        for p in 0..experts {
            affine.push(params.add(
                format!("{prefix}.affine.{p}"),
                uniform_fan_in(rng, &[embed_dim, embed_dim], embed_dim),
            ));
        }
        let centers = params.add(
            format!("{prefix}.centers"),
            standard_normal(rng, &[experts, embed_dim]),
        );
        // log sigma = log sqrt(n): squared distances between embedding
        // columns are O(n), so this keeps early kernel logits O(1).
        let log_bandwidth = params.add(
            format!("{prefix}.log_bandwidth"),
            Tensor::filled(&[experts], (embed_dim as f64).sqrt().ln()),
        );
        let pos_bias = params.add(
            format!("{prefix}.pos_bias"),
            Tensor::zeros(&[embed_dim, max_seq_len]),
        );
        RowOpParams {
            affine,
            centers,
            log_bandwidth,
            pos_bias,
            embed_dim,
            max_seq_len,
        }
    }

    pub fn experts(&self) -> usize {
        self.affine.len()
    }

    fn check_input(&self, g: &Graph, x: Var) -> Result<usize> {
        let shape = g.shape(x);
        if shape.len() != 2 || shape[0] != self.embed_dim {
            return Err(autodiff_core::Error::Shape {
                op: "row_forward",
                lhs: shape.to_vec(),
                rhs: vec![self.embed_dim, self.max_seq_len],
            }
            .into());
        }
        let m = shape[1];
        if m > self.max_seq_len {
            return Err(Error::Contract(format!(
                "sequence length {m} exceeds maximum {} (per-position bias width)",
                self.max_seq_len
            )));
        }
        Ok(m)
    }
}

/// Gaussian radial kernel weights per position.
///
/// For input columns x_j, returns [experts, m] where column j holds
/// `softmax_p(-|x_j - center_p|^2 / (2 sigma_p^2))`, computed max-shifted
/// in the exponent domain. Each column sums to 1.
pub fn row_kernel(g: &mut Graph, x: Var, params: &RowOpParams) -> Result<Var> {
    let m = params.check_input(g, x)?;
    let centers = g.param(params.centers);
    let dist = g.sqdist(x, centers)?; // [experts, m]

    // -1 / (2 sigma_p^2) from the log-domain bandwidth.
    let log_bw = g.param(params.log_bandwidth);
    let neg2 = g.scale(log_bw, -2.0)?;
    let inv_var = g.exp(neg2)?;
    let coeff = g.scale(inv_var, -0.5)?;
    let coeff_cols = g.broadcast(coeff, 1, m)?;

    let logits = g.mul(dist, coeff_cols)?;
    Ok(g.softmax_axis(logits, 0)?)
}

/// Forward pass of the row operation: per position j,
/// `y_j = pos_bias_j + sum_p kernel[p, j] * (A_p x_j)`.
pub fn row_forward(g: &mut Graph, x: Var, params: &RowOpParams) -> Result<Var> {
    let m = params.check_input(g, x)?;
    let kernel = row_kernel(g, x, params)?;

    let n = params.embed_dim;
    let mut acc: Option<Var> = None;
    for p in 0..params.experts() {
        let a = g.param(params.affine[p]);
        let mapped = g.matmul(a, x)?; // n x m
        let kp = g.slice_axis(kernel, 0, p, 1)?;
        let kp = g.reshape(kp, &[m])?;
        let kp_rows = g.broadcast(kp, 0, n)?; // n x m, every row the weights
        let weighted = g.mul(mapped, kp_rows)?;
        acc = Some(match acc {
            Some(prev) => g.add(prev, weighted)?,
            None => weighted,
        });
    }
    let total = acc.expect("at least one expert");

    // Shorter sequences use the leading columns of the bias.
    let full_bias = g.param(params.pos_bias);
    let bias = g.slice_axis(full_bias, 1, 0, m)?;
    Ok(g.add(total, bias)?)
}
