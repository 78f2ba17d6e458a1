use autodiff_core::{Gradients, ParamSet, Tensor};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamHyper {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

/// First and second moment accumulators, aligned with the parameter set.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub first: Vec<Tensor>,
    pub second: Vec<Tensor>,
    /// Completed update count; bias correction uses step + 1.
    pub step: u64,
}

impl AdamState {
    pub fn new(params: &ParamSet) -> Self {
        let zeros: Vec<Tensor> = params
            .iter()
            .map(|(_, p)| Tensor::zeros(p.value().shape()))
            .collect();
        AdamState {
            first: zeros.clone(),
            second: zeros,
            step: 0,
        }
    }
}

/// One bias-corrected adaptive-moment update. Rejects non-finite gradients
/// with the offending parameter's name before touching any state.
pub fn adam_step(
    params: &mut ParamSet,
    grads: &Gradients,
    state: &mut AdamState,
    hyper: &AdamHyper,
) -> Result<()> {
    for (id, g) in grads.iter() {
        if g.has_nan() {
            return Err(Error::NanGradient {
                name: params.get(id).name().to_string(),
            });
        }
    }

    let t = state.step + 1;
    let bc1 = 1.0 - hyper.beta1.powi(t as i32);
    let bc2 = 1.0 - hyper.beta2.powi(t as i32);

    for (id, g) in grads.iter() {
        let idx = id.index();
        let m = state.first[idx].data_mut();
        let v = state.second[idx].data_mut();
        let theta = params.value_mut(id).data_mut();
        for ((theta_i, (m_i, v_i)), &g_i) in theta
            .iter_mut()
            .zip(m.iter_mut().zip(v.iter_mut()))
            .zip(g.data())
        {
            *m_i = hyper.beta1 * *m_i + (1.0 - hyper.beta1) * g_i;
            *v_i = hyper.beta2 * *v_i + (1.0 - hyper.beta2) * g_i * g_i;
            let m_hat = *m_i / bc1;
            let v_hat = *v_i / bc2;
            *theta_i -= hyper.learning_rate * m_hat / (v_hat.sqrt() + hyper.epsilon);
        }
    }
    state.step = t;
    Ok(())
}
