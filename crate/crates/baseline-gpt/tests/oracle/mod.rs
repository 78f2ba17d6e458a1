//! Scalar-loop reference decoder used only by tests.

use autodiff_core::{ParamSet, Tensor};
use baseline_gpt::{GptLayerParams, GptModel};

fn mat(t: &Tensor) -> Vec<Vec<f64>> {
    let (r, c) = (t.shape()[0], t.shape()[1]);
    (0..r)
        .map(|i| (0..c).map(|j| t.at(&[i, j])).collect())
        .collect()
}

fn vec1(t: &Tensor) -> Vec<f64> {
    t.data().to_vec()
}

/// y = W x + b per column, all loops.
fn affine(w: &[Vec<f64>], b: &[f64], x: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let rows = w.len();
    let inner = x.len();
    let m = x[0].len();
    let mut y = vec![vec![0.0; m]; rows];
    for i in 0..rows {
        for j in 0..m {
            let mut acc = b[i];
            for r in 0..inner {
                acc += w[i][r] * x[r][j];
            }
            y[i][j] = acc;
        }
    }
    y
}

pub fn attention(
    params: &ParamSet,
    layer: &GptLayerParams,
    heads: usize,
    x: &Tensor,
) -> Vec<Vec<f64>> {
    attention_mat(params, layer, heads, &mat(x))
}

fn attention_mat(
    params: &ParamSet,
    layer: &GptLayerParams,
    heads: usize,
    x: &Vec<Vec<f64>>,
) -> Vec<Vec<f64>> {
    let n = x.len();
    let m = x[0].len();
    let dh = n / heads;

    let q = affine(&mat(params.value(layer.wq)), &vec1(params.value(layer.bq)), x);
    let k = affine(&mat(params.value(layer.wk)), &vec1(params.value(layer.bk)), x);
    let v = affine(&mat(params.value(layer.wv)), &vec1(params.value(layer.bv)), x);

    let mut merged = vec![vec![0.0; m]; n];
    for h in 0..heads {
        for j in 0..m {
            // Scaled causal scores for query j within this head.
            let mut scores = Vec::with_capacity(j + 1);
            for l in 0..=j {
                let mut dot = 0.0;
                for d in 0..dh {
                    dot += q[h * dh + d][j] * k[h * dh + d][l];
                }
                scores.push(dot / (dh as f64).sqrt());
            }
            let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let exps: Vec<f64> = scores.iter().map(|&s| (s - max).exp()).collect();
            let z: f64 = exps.iter().sum();
            for d in 0..dh {
                let mut acc = 0.0;
                for l in 0..=j {
                    acc += exps[l] / z * v[h * dh + d][l];
                }
                merged[h * dh + d][j] = acc;
            }
        }
    }
    affine(
        &mat(params.value(layer.wo)),
        &vec1(params.value(layer.bo)),
        &merged,
    )
}

pub fn gpt_forward(model: &GptModel, ids: &[usize]) -> Vec<Vec<f64>> {
    assert!(!model.config.layernorm, "oracle covers the default composition only");
    let n = model.config.embed_dim;
    let m = ids.len();
    let emb = model.params.value(model.embedding);
    let pos = model.params.value(model.positional);

    let mut x = vec![vec![0.0; m]; n];
    for (j, &id) in ids.iter().enumerate() {
        for i in 0..n {
            x[i][j] = emb.at(&[id, i]) + pos.at(&[j, i]);
        }
    }

    for layer in &model.layers {
        let attn = attention_mat(&model.params, layer, model.config.heads, &x);
        for i in 0..n {
            for j in 0..m {
                x[i][j] += attn[i][j];
            }
        }
        let w1 = mat(model.params.value(layer.ff_w1));
        let b1 = vec1(model.params.value(layer.ff_b1));
        let w2 = mat(model.params.value(layer.ff_w2));
        let b2 = vec1(model.params.value(layer.ff_b2));
        let hidden = affine(&w1, &b1, &x);
        let hidden: Vec<Vec<f64>> = hidden
            .into_iter()
            .map(|row| row.into_iter().map(|v| v.max(0.0)).collect())
            .collect();
        let ff = affine(&w2, &b2, &hidden);
        for i in 0..n {
            for j in 0..m {
                x[i][j] += ff[i][j];
            }
        }
    }

    let head = match model.head_weight {
        Some(w) => model.params.value(w),
        None => emb,
    };
    let hb = model.params.value(model.head_bias);
    let v_size = model.config.vocab_size;
    let mut logits = vec![vec![0.0; m]; v_size];
    for t in 0..v_size {
        for j in 0..m {
            let mut acc = hb.at(&[t]);
            for i in 0..n {
                acc += head.at(&[t, i]) * x[i][j];
            }
            logits[t][j] = acc;
        }
    }
    logits
}
