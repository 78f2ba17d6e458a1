//! Self-contained scalar-loop reference implementations for the acceptance
//! suite. Deliberately independent of the graph engine: plain nested loops
//! over parameter values.

use autodiff_core::{ParamSet, Tensor};
use baseline_gpt::{GptLayerParams, GptModel};
use ipa_core::{ColumnOpParams, IpaModel, RowOpParams};

pub type Mat = Vec<Vec<f64>>;

pub fn mat(t: &Tensor) -> Mat {
    let (r, c) = (t.shape()[0], t.shape()[1]);
    (0..r)
        .map(|i| (0..c).map(|j| t.at(&[i, j])).collect())
        .collect()
}

pub fn max_diff_2d(got: &Tensor, expected: &Mat) -> f64 {
    let mut worst = 0.0f64;
    for (i, row) in expected.iter().enumerate() {
        for (j, &e) in row.iter().enumerate() {
            worst = worst.max((got.at(&[i, j]) - e).abs());
        }
    }
    worst
}

fn dense(a: &Mat, b: &Mat) -> Mat {
    let (r, inner, c) = (a.len(), b.len(), b[0].len());
    let mut out = vec![vec![0.0; c]; r];
    for i in 0..r {
        for t in 0..inner {
            for j in 0..c {
                out[i][j] += a[i][t] * b[t][j];
            }
        }
    }
    out
}

fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&l| (l - max).exp()).collect();
    let z: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / z).collect()
}

pub fn ipa_column_forward(params: &ParamSet, col: &ColumnOpParams, x: &Tensor) -> Mat {
    let xm = mat(x);
    let n = xm.len();
    let m = xm[0].len();
    let experts = col.experts();
    let bias = params.value(col.bias);

    let w_dense: Vec<Mat> = (0..experts)
        .map(|p| {
            dense(
                &mat(params.value(col.w_left[p])),
                &mat(params.value(col.w_right[p])),
            )
        })
        .collect();
    let s_dense: Vec<Mat> = (0..experts)
        .map(|p| {
            dense(
                &mat(params.value(col.s_left[p])),
                &mat(params.value(col.s_right[p])),
            )
        })
        .collect();

    let mut y = vec![vec![0.0; m]; n];
    for j in 0..m {
        // Kernel weights for every visible key position.
        let mut weights = vec![vec![0.0; experts]; j + 1];
        for (l, w_l) in weights.iter_mut().enumerate() {
            let logits: Vec<f64> = (0..experts)
                .map(|p| {
                    let mut acc = 0.0;
                    for i in 0..n {
                        for i2 in 0..n {
                            acc += xm[i][l] * w_dense[p][i][i2] * xm[i2][j];
                        }
                    }
                    acc
                })
                .collect();
            *w_l = softmax(&logits);
        }
        for i in 0..n {
            let mut acc = bias.at(&[i]);
            for (l, w_l) in weights.iter().enumerate() {
                for (p, s) in s_dense.iter().enumerate() {
                    let mut sx = 0.0;
                    for r in 0..n {
                        sx += s[i][r] * xm[r][l];
                    }
                    acc += w_l[p] * sx;
                }
            }
            y[i][j] = acc;
        }
    }
    y
}

pub fn ipa_row_forward(params: &ParamSet, row: &RowOpParams, x: &Tensor) -> Mat {
    let xm = mat(x);
    let n = xm.len();
    let m = xm[0].len();
    let centers = params.value(row.centers);
    let log_bw = params.value(row.log_bandwidth);
    let bias = params.value(row.pos_bias);
    let a_dense: Vec<Mat> = (0..row.experts())
        .map(|p| mat(params.value(row.affine[p])))
        .collect();

    let mut y = vec![vec![0.0; m]; n];
    for j in 0..m {
        let logits: Vec<f64> = (0..row.experts())
            .map(|p| {
                let mut d2 = 0.0;
                for i in 0..n {
                    let d = xm[i][j] - centers.at(&[p, i]);
                    d2 += d * d;
                }
                let sigma = log_bw.at(&[p]).exp();
                -d2 / (2.0 * sigma * sigma)
            })
            .collect();
        let kappa = softmax(&logits);
        for i in 0..n {
            let mut acc = bias.at(&[i, j]);
            for (p, a) in a_dense.iter().enumerate() {
                let mut ax = 0.0;
                for r in 0..n {
                    ax += a[i][r] * xm[r][j];
                }
                acc += kappa[p] * ax;
            }
            y[i][j] = acc;
        }
    }
    y
}

pub fn ipa_forward(model: &IpaModel, ids: &[usize]) -> Mat {
    let n = model.config.embed_dim;
    let m = ids.len();
    let emb = model.params.value(model.embedding);

    let mut x = vec![vec![0.0; m]; n];
    for (j, &id) in ids.iter().enumerate() {
        for i in 0..n {
            x[i][j] = emb.at(&[id, i]);
        }
    }
    for layer in &model.layers {
        let t = Tensor::from_fn(&[n, m], |ix| x[ix[0]][ix[1]]);
        let after_col = ipa_column_forward(&model.params, &layer.column, &t);
        let t = Tensor::from_fn(&[n, m], |ix| after_col[ix[0]][ix[1]]);
        x = ipa_row_forward(&model.params, &layer.row, &t);
    }
    head(
        match model.head_weight {
            Some(w) => model.params.value(w),
            None => emb,
        },
        model.params.value(model.head_bias),
        &x,
        model.config.vocab_size,
    )
}

fn head(weight: &Tensor, bias: &Tensor, x: &Mat, vocab: usize) -> Mat {
    let n = x.len();
    let m = x[0].len();
    let mut logits = vec![vec![0.0; m]; vocab];
    for (t, row) in logits.iter_mut().enumerate() {
        for (j, slot) in row.iter_mut().enumerate() {
            let mut acc = bias.at(&[t]);
            for i in 0..n {
                acc += weight.at(&[t, i]) * x[i][j];
            }
            *slot = acc;
        }
    }
    logits
}

fn affine(w: &Mat, b: &[f64], x: &Mat) -> Mat {
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

pub fn gpt_attention(
    params: &ParamSet,
    layer: &GptLayerParams,
    heads: usize,
    x: &Tensor,
) -> Mat {
    gpt_attention_mat(params, layer, heads, &mat(x))
}

fn gpt_attention_mat(params: &ParamSet, layer: &GptLayerParams, heads: usize, x: &Mat) -> Mat {
    let n = x.len();
    let m = x[0].len();
    let dh = n / heads;
    let v1 = |id| params.value(id).data().to_vec();

    let q = affine(&mat(params.value(layer.wq)), &v1(layer.bq), x);
    let k = affine(&mat(params.value(layer.wk)), &v1(layer.bk), x);
    let v = affine(&mat(params.value(layer.wv)), &v1(layer.bv), x);

    let mut merged = vec![vec![0.0; m]; n];
    for h in 0..heads {
        for j in 0..m {
            let scores: Vec<f64> = (0..=j)
                .map(|l| {
                    let mut dot = 0.0;
                    for d in 0..dh {
                        dot += q[h * dh + d][j] * k[h * dh + d][l];
                    }
                    dot / (dh as f64).sqrt()
                })
                .collect();
            let weights = softmax(&scores);
            for d in 0..dh {
                let mut acc = 0.0;
                for (l, &w) in weights.iter().enumerate() {
                    acc += w * v[h * dh + d][l];
                }
                merged[h * dh + d][j] = acc;
            }
        }
    }
    affine(&mat(params.value(layer.wo)), &v1(layer.bo), &merged)
}

pub fn gpt_forward(model: &GptModel, ids: &[usize]) -> Mat {
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
        let attn = gpt_attention_mat(&model.params, layer, model.config.heads, &x);
        for i in 0..n {
            for j in 0..m {
                x[i][j] += attn[i][j];
            }
        }
        let hidden = affine(
            &mat(model.params.value(layer.ff_w1)),
            &model.params.value(layer.ff_b1).data().to_vec(),
            &x,
        );
        let hidden: Mat = hidden
            .into_iter()
            .map(|row| row.into_iter().map(|v| v.max(0.0)).collect())
            .collect();
        let ff = affine(
            &mat(model.params.value(layer.ff_w2)),
            &model.params.value(layer.ff_b2).data().to_vec(),
            &hidden,
        );
        for i in 0..n {
            for j in 0..m {
                x[i][j] += ff[i][j];
            }
        }
    }
    head(
        match model.head_weight {
            Some(w) => model.params.value(w),
            None => emb,
        },
        model.params.value(model.head_bias),
        &x,
        model.config.vocab_size,
    )
}
