//! Straight-line reference implementations used only by tests. Everything
//! here is scalar loops over parameter values; none of the graph machinery
//! is involved, so agreement with the production path is meaningful.

use autodiff_core::{ParamSet, Tensor};
use ipa_core::{ColumnOpParams, IpaModel, RowOpParams};

pub fn mat(t: &Tensor) -> Vec<Vec<f64>> {
    let (r, c) = (t.shape()[0], t.shape()[1]);
    (0..r)
        .map(|i| (0..c).map(|j| t.at(&[i, j])).collect())
        .collect()
}

/// Dense product of two loop-extracted matrices.
fn dense(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
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

fn kernel_logits(params: &ParamSet, col: &ColumnOpParams, x: &Vec<Vec<f64>>) -> Vec<Vec<Vec<f64>>> {
    let n = x.len();
    let m = x[0].len();
    let experts = col.experts();
    let mut logits = vec![vec![vec![0.0; m]; m]; experts];
    for p in 0..experts {
        let w = dense(
            &mat(params.value(col.w_left[p])),
            &mat(params.value(col.w_right[p])),
        );
        for j in 0..m {
            for l in 0..m {
                let mut acc = 0.0;
                for i in 0..n {
                    for i2 in 0..n {
                        acc += x[i][l] * w[i][i2] * x[i2][j];
                    }
                }
                logits[p][j][l] = acc;
            }
        }
    }
    logits
}

fn normalize_over_experts(logits: &[Vec<Vec<f64>>], m: usize) -> Vec<Vec<Vec<f64>>> {
    let experts = logits.len();
    let mut out = vec![vec![vec![0.0; m]; m]; experts];
    for j in 0..m {
        for l in 0..m {
            if l > j {
                continue;
            }
            let max = (0..experts)
                .map(|p| logits[p][j][l])
                .fold(f64::NEG_INFINITY, f64::max);
            let mut z = 0.0;
            for p in 0..experts {
                z += (logits[p][j][l] - max).exp();
            }
            for p in 0..experts {
                out[p][j][l] = (logits[p][j][l] - max).exp() / z;
            }
        }
    }
    out
}

pub fn column_kernel(params: &ParamSet, col: &ColumnOpParams, x: &Tensor) -> Vec<Vec<Vec<f64>>> {
    let xm = mat(x);
    let logits = kernel_logits(params, col, &xm);
    normalize_over_experts(&logits, xm[0].len())
}

/// Same kernel, with a constant added to every expert's logit at each
/// (j, l); exercises the shift invariance of the normalization.
pub fn column_kernel_shifted(
    params: &ParamSet,
    col: &ColumnOpParams,
    x: &Tensor,
    shift: f64,
) -> Vec<Vec<Vec<f64>>> {
    let xm = mat(x);
    let mut logits = kernel_logits(params, col, &xm);
    for per_expert in logits.iter_mut() {
        for row in per_expert.iter_mut() {
            for v in row.iter_mut() {
                *v += shift;
            }
        }
    }
    normalize_over_experts(&logits, xm[0].len())
}

pub fn column_forward(params: &ParamSet, col: &ColumnOpParams, x: &Tensor) -> Vec<Vec<f64>> {
    let xm = mat(x);
    let n = xm.len();
    let m = xm[0].len();
    let experts = col.experts();
    let kernel = column_kernel(params, col, x);
    let bias = params.value(col.bias);

    let s_dense: Vec<Vec<Vec<f64>>> = (0..experts)
        .map(|p| {
            dense(
                &mat(params.value(col.s_left[p])),
                &mat(params.value(col.s_right[p])),
            )
        })
        .collect();

    let mut y = vec![vec![0.0; m]; n];
    for j in 0..m {
        for i in 0..n {
            let mut acc = bias.at(&[i]);
            for l in 0..=j {
                for (p, s) in s_dense.iter().enumerate() {
                    let mut sx = 0.0;
                    for r in 0..n {
                        sx += s[i][r] * xm[r][l];
                    }
                    acc += kernel[p][j][l] * sx;
                }
            }
            y[i][j] = acc;
        }
    }
    y
}

pub fn row_kernel_column(params: &ParamSet, row: &RowOpParams, x_col: &[f64]) -> Vec<f64> {
    let experts = row.experts();
    let centers = params.value(row.centers);
    let log_bw = params.value(row.log_bandwidth);
    let mut logits = Vec::with_capacity(experts);
    for p in 0..experts {
        let mut d2 = 0.0;
        for (i, &xi) in x_col.iter().enumerate() {
            let d = xi - centers.at(&[p, i]);
            d2 += d * d;
        }
        let sigma = log_bw.at(&[p]).exp();
        logits.push(-d2 / (2.0 * sigma * sigma));
    }
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = logits.iter().map(|&l| (l - max).exp()).collect();
    let z: f64 = weights.iter().sum();
    weights.into_iter().map(|w| w / z).collect()
}

pub fn row_forward(params: &ParamSet, row: &RowOpParams, x: &Tensor) -> Vec<Vec<f64>> {
    let xm = mat(x);
    let n = xm.len();
    let m = xm[0].len();
    let bias = params.value(row.pos_bias);
    let a_dense: Vec<Vec<Vec<f64>>> = (0..row.experts())
        .map(|p| mat(params.value(row.affine[p])))
        .collect();

    let mut y = vec![vec![0.0; m]; n];
    for j in 0..m {
        let col: Vec<f64> = (0..n).map(|i| xm[i][j]).collect();
        let kappa = row_kernel_column(params, row, &col);
        for i in 0..n {
            let mut acc = bias.at(&[i, j]);
            for (p, a) in a_dense.iter().enumerate() {
                let mut ax = 0.0;
                for r in 0..n {
                    ax += a[i][r] * col[r];
                }
                acc += kappa[p] * ax;
            }
            y[i][j] = acc;
        }
    }
    y
}

pub fn ipa_forward(model: &IpaModel, ids: &[usize]) -> Vec<Vec<f64>> {
    assert!(
        !model.config.residual && !model.config.layernorm && !model.config.prefix_scale,
        "oracle covers the default composition only"
    );
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
        let as_tensor = Tensor::from_fn(&[n, m], |ix| x[ix[0]][ix[1]]);
        let after_col = column_forward(&model.params, &layer.column, &as_tensor);
        let col_tensor = Tensor::from_fn(&[n, m], |ix| after_col[ix[0]][ix[1]]);
        x = row_forward(&model.params, &layer.row, &col_tensor);
    }

    let head = match model.head_weight {
        Some(w) => model.params.value(w),
        None => emb,
    };
    let head_bias = model.params.value(model.head_bias);
    let v = model.config.vocab_size;
    let mut logits = vec![vec![0.0; m]; v];
    for t in 0..v {
        for j in 0..m {
            let mut acc = head_bias.at(&[t]);
            for i in 0..n {
                acc += head.at(&[t, i]) * x[i][j];
            }
            logits[t][j] = acc;
        }
    }
    logits
}
