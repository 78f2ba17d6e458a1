use autodiff_core::{Graph, ParamId, ParamSet, Tensor, Var};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::GptConfig;
use crate::{Error, Result};

/// Wide logit floor for masked attention positions; exp underflows to zero
/// after the max shift while every stored value stays finite.
const MASK_FILL: f64 = -1e30;

#[derive(Debug, Clone)]
pub struct GptLayerParams {
    pub wq: ParamId,
    pub bq: ParamId,
    pub wk: ParamId,
    pub bk: ParamId,
    pub wv: ParamId,
    pub bv: ParamId,
    pub wo: ParamId,
    pub bo: ParamId,
    pub ff_w1: ParamId,
    pub ff_b1: ParamId,
    pub ff_w2: ParamId,
    pub ff_b2: ParamId,
}

#[derive(Debug, Clone)]
pub struct GptModel {
    pub config: GptConfig,
    pub params: ParamSet,
    pub embedding: ParamId,
    /// Learned positional embedding, max_seq_len x embed_dim.
    pub positional: ParamId,
    pub head_weight: Option<ParamId>,
    pub head_bias: ParamId,
    pub layers: Vec<GptLayerParams>,
}

fn uniform(rng: &mut ChaCha8Rng, shape: &[usize], fan_in: usize) -> Tensor {
    let scale = 1.0 / (fan_in as f64).sqrt();
    Tensor::from_fn(shape, |_| rng.random_range(-scale..scale))
}

impl GptModel {
    pub fn new(config: GptConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamSet::new();
        let n = config.embed_dim;
        let v = config.vocab_size;

        let embedding = params.add("embedding", uniform(&mut rng, &[v, n], n));
        let positional = params.add(
            "positional",
            uniform(&mut rng, &[config.max_seq_len, n], n),
        );
        let head_weight = if config.tie_head {
            None
        } else {
            Some(params.add("head.weight", uniform(&mut rng, &[v, n], n)))
        };
        let head_bias = params.add("head.bias", Tensor::zeros(&[v]));

        let mut layers = Vec::with_capacity(config.layers);
        for i in 0..config.layers {
            let p = |params: &mut ParamSet, rng: &mut ChaCha8Rng, name: &str| {
                params.add(format!("layer{i}.{name}"), uniform(rng, &[n, n], n))
            };
            let b = |params: &mut ParamSet, name: &str, dim: usize| {
                params.add(format!("layer{i}.{name}"), Tensor::zeros(&[dim]))
            };
            let wq = p(&mut params, &mut rng, "attn.wq");
            let bq = b(&mut params, "attn.bq", n);
            let wk = p(&mut params, &mut rng, "attn.wk");
            let bk = b(&mut params, "attn.bk", n);
            let wv = p(&mut params, &mut rng, "attn.wv");
            let bv = b(&mut params, "attn.bv", n);
            let wo = p(&mut params, &mut rng, "attn.wo");
            let bo = b(&mut params, "attn.bo", n);
            let ff_w1 = params.add(
                format!("layer{i}.ff.w1"),
                uniform(&mut rng, &[config.ff_dim, n], n),
            );
            let ff_b1 = b(&mut params, "ff.b1", config.ff_dim);
            let ff_w2 = params.add(
                format!("layer{i}.ff.w2"),
                uniform(&mut rng, &[n, config.ff_dim], config.ff_dim),
            );
            let ff_b2 = b(&mut params, "ff.b2", n);
            layers.push(GptLayerParams {
                wq,
                bq,
                wk,
                bk,
                wv,
                bv,
                wo,
                bo,
                ff_w1,
                ff_b1,
                ff_w2,
                ff_b2,
            });
        }

        Ok(GptModel {
            config,
            params,
            embedding,
            positional,
            head_weight,
            head_bias,
            layers,
        })
    }

    pub fn forward(&self, g: &mut Graph, token_ids: &[usize]) -> Result<Var> {
        gpt_forward(g, token_ids, self)
    }

    pub fn param_count(&self, m: usize) -> Result<u64> {
        param_count_gpt(&self.config, m)
    }
}

fn project(g: &mut Graph, w: ParamId, b: ParamId, x: Var, m: usize) -> Result<Var> {
    let wv = g.param(w);
    let bv = g.param(b);
    let prod = g.matmul(wv, x)?;
    let bias = g.broadcast(bv, 1, m)?;
    Ok(g.add(prod, bias)?)
}

/// Causal multi-head attention over columns. Returns the attention output
/// (before the residual) and the per-head weight matrices, each m x m in
/// [query, key] orientation with rows summing to 1 over keys <= query.
pub fn multi_head_attention(
    g: &mut Graph,
    x: Var,
    layer: &GptLayerParams,
    heads: usize,
) -> Result<(Var, Vec<Var>)> {
    let n = g.shape(x)[0];
    let m = g.shape(x)[1];
    let dh = n / heads;

    let q = project(g, layer.wq, layer.bq, x, m)?;
    let k = project(g, layer.wk, layer.bk, x, m)?;
    let v = project(g, layer.wv, layer.bv, x, m)?;

    let mut mask = vec![false; m * m];
    for j in 0..m {
        for l in (j + 1)..m {
            mask[j * m + l] = true;
        }
    }

    let mut head_outputs = Vec::with_capacity(heads);
    let mut head_weights = Vec::with_capacity(heads);
    for h in 0..heads {
        let qh = g.slice_axis(q, 0, h * dh, dh)?;
        let kh = g.slice_axis(k, 0, h * dh, dh)?;
        let vh = g.slice_axis(v, 0, h * dh, dh)?;

        let qt = g.transpose(qh)?; // m x dh
        let scores = g.matmul(qt, kh)?; // [query, key]
        let scaled = g.scale(scores, 1.0 / (dh as f64).sqrt())?;
        let masked = g.masked_fill(scaled, mask.clone(), MASK_FILL)?;
        let weights = g.softmax_axis(masked, 1)?;

        let wt = g.transpose(weights)?; // [key, query]
        head_outputs.push(g.matmul(vh, wt)?); // dh x m
        head_weights.push(weights);
    }

    let stacked = g.concat(&head_outputs, 0)?; // n x m
    let out = project(g, layer.wo, layer.bo, stacked, m)?;
    Ok((out, head_weights))
}

/// Forward pass byproducts needed by diagnostics: the feedforward inputs to
/// the max(0, .) nonlinearity, the only non-smooth point in the model.
/// Gradient checking is meaningful only at points where none of these sit
/// on the kink.
pub struct GptTrace {
    pub logits: Var,
    pub ff_preactivations: Vec<Var>,
}

/// Standard causal decoder forward pass: embedding plus learned positional
/// encoding, then per layer `x += attention(x)` and `x += feedforward(x)`,
/// then the affine head.
pub fn gpt_forward(g: &mut Graph, token_ids: &[usize], model: &GptModel) -> Result<Var> {
    Ok(gpt_forward_traced(g, token_ids, model)?.logits)
}

/// See [`gpt_forward`]; additionally exposes the trace.
pub fn gpt_forward_traced(
    g: &mut Graph,
    token_ids: &[usize],
    model: &GptModel,
) -> Result<GptTrace> {
    let cfg = &model.config;
    let m = token_ids.len();
    if m == 0 || m > cfg.max_seq_len {
        return Err(Error::Contract(format!(
            "sequence length must lie in 1..={}, got {m}",
            cfg.max_seq_len
        )));
    }

    let table = g.param(model.embedding);
    let tok = g.gather(table, token_ids)?; // m x n
    let tok = g.transpose(tok)?; // n x m
    let pos_table = g.param(model.positional);
    let pos = g.slice_axis(pos_table, 0, 0, m)?;
    let pos = g.transpose(pos)?;
    let mut x = g.add(tok, pos)?;

    let mut ff_preactivations = Vec::with_capacity(cfg.layers);
    for layer in &model.layers {
        let attn_in = maybe_normalize(g, x, cfg.layernorm)?;
        let (attn, _) = multi_head_attention(g, attn_in, layer, cfg.heads)?;
        x = g.add(x, attn)?;

        let ff_in = maybe_normalize(g, x, cfg.layernorm)?;
        let pre = project(g, layer.ff_w1, layer.ff_b1, ff_in, m)?;
        ff_preactivations.push(pre);
        let h = g.relu(pre)?;
        let ff = project(g, layer.ff_w2, layer.ff_b2, h, m)?;
        x = g.add(x, ff)?;
    }

    let head = match model.head_weight {
        Some(w) => g.param(w),
        None => g.param(model.embedding),
    };
    let logits = g.matmul(head, x)?;
    let bias = g.param(model.head_bias);
    let bias_cols = g.broadcast(bias, 1, m)?;
    let logits = g.add(logits, bias_cols)?;
    Ok(GptTrace {
        logits,
        ff_preactivations,
    })
}

fn maybe_normalize(g: &mut Graph, x: Var, enabled: bool) -> Result<Var> {
    if !enabled {
        return Ok(x);
    }
    let n = g.shape(x)[0];
    let sum = g.sum_axis(x, 0)?;
    let mean = g.scale(sum, 1.0 / n as f64)?;
    let mean_b = g.broadcast(mean, 0, n)?;
    let centered = g.sub(x, mean_b)?;
    let sq = g.square(centered)?;
    let var_sum = g.sum_axis(sq, 0)?;
    let var = g.scale(var_sum, 1.0 / n as f64)?;
    let var_eps = g.add_scalar(var, 1e-5)?;
    let denom = g.sqrt(var_eps)?;
    let denom_b = g.broadcast(denom, 0, n)?;
    Ok(g.div(centered, denom_b)?)
}

/// Smallest |x| over every input to the max(0, .) nonlinearity for the
/// given tokens. A margin comfortably above the finite-difference step
/// means the loss is differentiable at this point.
pub fn kink_margin(model: &GptModel, token_ids: &[usize]) -> Result<f64> {
    let mut g = Graph::with_tracking(&model.params, false);
    let trace = gpt_forward_traced(&mut g, token_ids, model)?;
    let mut margin = f64::INFINITY;
    for pre in trace.ff_preactivations {
        for &v in g.value(pre).data() {
            margin = margin.min(v.abs());
        }
    }
    Ok(margin)
}

/// Moves the model to a gradient-check-friendly point: if some nonlinearity
/// input sits within `min_margin` of its kink, the first feedforward biases
/// are stepped through a fixed schedule until every input clears the
/// margin. Returns the final margin.
pub fn ensure_kink_free(
    model: &mut GptModel,
    token_ids: &[usize],
    min_margin: f64,
) -> Result<f64> {
    let mut margin = kink_margin(model, token_ids)?;
    let mut attempt = 0u32;
    while margin < min_margin && attempt < 200 {
        let shift = 0.5 + 0.013 * attempt as f64;
        let bias_ids: Vec<ParamId> = model.layers.iter().map(|l| l.ff_b1).collect();
        for id in bias_ids {
            model.params.value_mut(id).data_mut().fill(shift);
        }
        margin = kink_margin(model, token_ids)?;
        attempt += 1;
    }
    if margin < min_margin {
        return Err(Error::Contract(format!(
            "could not reach a kink-free point (margin {margin:.3e})"
        )));
    }
    Ok(margin)
}

/// Exact scalar parameter count at sequence length `m`; the learned
/// positional table contributes `m * embed_dim`.
pub fn param_count_gpt(config: &GptConfig, m: usize) -> Result<u64> {
    if m > config.max_seq_len {
        return Err(Error::Contract(format!(
            "m {} exceeds max_seq_len {}",
            m, config.max_seq_len
        )));
    }
    let n = config.embed_dim as u64;
    let v = config.vocab_size as u64;
    let d = config.ff_dim as u64;
    let m = m as u64;

    let embedding = v * n;
    let head = if config.tie_head { v } else { v * n + v };
    let positional = m * n;
    let attention = 4 * (n * n + n);
    let feedforward = d * n + d + n * d + n;
    Ok(embedding + head + positional + config.layers as u64 * (attention + feedforward))
}
