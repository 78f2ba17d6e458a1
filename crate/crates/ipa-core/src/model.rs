use autodiff_core::{Graph, ParamId, ParamSet, Tensor, Var};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::column::{column_forward, ColumnOpParams};
use crate::config::ModelConfig;
use crate::init::uniform_fan_in;
use crate::row::{row_forward, RowOpParams};
use crate::{Error, Result};

/// One layer: a column operation followed by a row operation.
#[derive(Debug, Clone)]
pub struct IpaLayer {
    pub column: ColumnOpParams,
    pub row: RowOpParams,
}

/// Embedding table, layer stack, and affine prediction head.
#[derive(Debug, Clone)]
pub struct IpaModel {
    pub config: ModelConfig,
    pub params: ParamSet,
    pub embedding: ParamId,
    /// Present only for an untied head; a tied head reads the embedding
    /// table directly (one storage, two views).
    pub head_weight: Option<ParamId>,
    pub head_bias: ParamId,
    pub layers: Vec<IpaLayer>,
}

impl IpaModel {
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamSet::new();
        let n = config.embed_dim;

        let embedding = params.add(
            "embedding",
            uniform_fan_in(&mut rng, &[config.vocab_size, n], n),
        );
        let head_weight = if config.tie_head {
            None
        } else {
            Some(params.add(
                "head.weight",
                uniform_fan_in(&mut rng, &[config.vocab_size, n], n),
            ))
        };
        let head_bias = params.add("head.bias", Tensor::zeros(&[config.vocab_size]));

        let mut layers = Vec::with_capacity(config.layers);
        for layer in 0..config.layers {
            let column = ColumnOpParams::init(
                &mut params,
                &format!("layer{layer}.col"),
                n,
                config.rank,
                config.col_experts,
                config.max_seq_len,
                &mut rng,
            );
            let row = RowOpParams::init(
                &mut params,
                &format!("layer{layer}.row"),
                n,
                config.row_experts,
                config.max_seq_len,
                &mut rng,
            );
            layers.push(IpaLayer { column, row });
        }

        Ok(IpaModel {
            config,
            params,
            embedding,
            head_weight,
            head_bias,
            layers,
        })
    }

    /// Token ids to vocabulary logits (vocab_size x m). Causal by
    /// construction: position j never reads positions after j, and position
    /// enters only through the per-position bias and the causal mask.
    pub fn forward(&self, g: &mut Graph, token_ids: &[usize]) -> Result<Var> {
        ipa_forward(g, token_ids, self)
    }

    pub fn param_count(&self, m: usize) -> Result<u64> {
        param_count_ipa(&self.config, m)
    }
}

/// See [`IpaModel::forward`].
pub fn ipa_forward(g: &mut Graph, token_ids: &[usize], model: &IpaModel) -> Result<Var> {
    let cfg = &model.config;
    if token_ids.is_empty() || token_ids.len() > cfg.max_seq_len {
        return Err(Error::Contract(format!(
            "sequence length must lie in 1..={}, got {}",
            cfg.max_seq_len,
            token_ids.len()
        )));
    }

    let table = g.param(model.embedding);
    let rows = g.gather(table, token_ids)?; // m x n
    let mut x = g.transpose(rows)?; // n x m

    for layer in &model.layers {
        x = sublayer(g, x, cfg, |g, x| column_forward(g, x, &layer.column, cfg.prefix_scale))?;
        x = sublayer(g, x, cfg, |g, x| row_forward(g, x, &layer.row))?;
    }

    let head = match model.head_weight {
        Some(w) => g.param(w),
        None => g.param(model.embedding),
    };
    let logits = g.matmul(head, x)?; // vocab x m
    let bias = g.param(model.head_bias);
    let bias_cols = g.broadcast(bias, 1, token_ids.len())?;
    Ok(g.add(logits, bias_cols)?)
}

fn sublayer(
    g: &mut Graph,
    x: Var,
    cfg: &ModelConfig,
    f: impl FnOnce(&mut Graph, Var) -> Result<Var>,
) -> Result<Var> {
    let inner = if cfg.layernorm { normalize_columns(g, x)? } else { x };
    let y = f(g, inner)?;
    if cfg.residual {
        Ok(g.add(x, y)?)
    } else {
        Ok(y)
    }
}

/// Parameter-free normalization of each column to zero mean and unit
/// variance. Keeping it parameter-free leaves the parameter accounting
/// independent of the flag.
pub fn normalize_columns(g: &mut Graph, x: Var) -> Result<Var> {
    let n = g.shape(x)[0];
    let m = g.shape(x)[1];
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
    debug_assert_eq!(g.shape(denom_b), &[n, m]);
    Ok(g.div(centered, denom_b)?)
}

/// Exact scalar parameter count for a configuration at sequence length `m`
/// (the per-position bias contributes `embed_dim * m`).
pub fn param_count_ipa(config: &ModelConfig, m: usize) -> Result<u64> {
    if m > config.max_seq_len {
        return Err(Error::Contract(format!(
            "m {} exceeds max_seq_len {}",
            m, config.max_seq_len
        )));
    }
    let n = config.embed_dim as u64;
    let k = config.rank as u64;
    let v = config.vocab_size as u64;
    let p_col = config.col_experts as u64;
    let p_row = config.row_experts as u64;
    let m = m as u64;

    let embedding = v * n;
    let head = if config.tie_head { v } else { v * n + v };
    let col_factors = p_col * (2 * n * k) // S factors
        + p_col * (2 * n * k) // kernel form factors
        + n; // shared bias
    let row_terms = p_row * (n * n + n + 1) // affine maps, centers, bandwidths
        + n * m; // per-position bias
    Ok(embedding + head + config.layers as u64 * (col_factors + row_terms))
}
