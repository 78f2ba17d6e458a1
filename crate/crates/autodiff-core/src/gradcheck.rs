use crate::error::{Error, Result};
use crate::graph::{Graph, Var};
use crate::param::ParamSet;

/// Compares analytic gradients against central finite differences.
///
/// `loss_fn` must build a scalar loss over the given parameters; it is
/// called once on a tracking graph for the analytic side and twice per
/// parameter element for the numeric side. Returns the maximum over
/// elements of `|analytic - numeric| / max(1, |analytic|, |numeric|)`.
pub fn grad_check<F>(params: &ParamSet, epsilon: f64, loss_fn: F) -> Result<f64>
where
    F: Fn(&ParamSet, &mut Graph) -> Result<Var>,
{
    if !(1e-7..=1e-3).contains(&epsilon) {
        return Err(Error::contract(format!(
            "gradient-check epsilon must lie in [1e-7, 1e-3], got {epsilon}"
        )));
    }

    let mut graph = Graph::new(params);
    let loss = loss_fn(params, &mut graph)?;
    if graph.value(loss).numel() != 1 {
        return Err(Error::contract(format!(
            "loss must be scalar, shape is {:?}",
            graph.value(loss).shape()
        )));
    }
    let analytic = graph.backward(loss)?;

    let eval = |point: &ParamSet| -> Result<f64> {
        let mut g = Graph::with_tracking(point, false);
        let v = loss_fn(point, &mut g)?;
        let out = g.value(v).item()?;
        if !out.is_finite() {
            return Err(Error::numeric(format!(
                "loss is not finite at perturbed point: {out}"
            )));
        }
        Ok(out)
    };

    let mut point = params.clone();
    let mut max_rel = 0.0f64;
    for id in params.ids() {
        for e in 0..params.value(id).numel() {
            let original = point.value(id).data()[e];
            point.value_mut(id).data_mut()[e] = original + epsilon;
            let plus = eval(&point)?;
            point.value_mut(id).data_mut()[e] = original - epsilon;
            let minus = eval(&point)?;
            point.value_mut(id).data_mut()[e] = original;

            let numeric = (plus - minus) / (2.0 * epsilon);
            let exact = analytic.get(id).data()[e];
            let rel = (exact - numeric).abs() / 1.0f64.max(exact.abs()).max(numeric.abs());
            if rel > max_rel {
                max_rel = rel;
            }
        }
    }
    Ok(max_rel)
}
