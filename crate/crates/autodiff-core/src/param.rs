use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Handle to a parameter inside a [`ParamSet`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(&self) -> usize {
        self.0
    }
}

/// A named learnable tensor together with its gradient accumulator.
#[derive(Debug, Clone)]
pub struct Parameter {
    name: String,
    value: Tensor,
    grad: Tensor,
}

impl Parameter {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn value(&self) -> &Tensor {
        &self.value
    }

    pub fn value_mut(&mut self) -> &mut Tensor {
        &mut self.value
    }

    pub fn grad(&self) -> &Tensor {
        &self.grad
    }
}

/// Ordered collection of model parameters. Construction order is stable, so
/// [`ParamId`]s and gradient vectors line up across clones of the same model.
#[derive(Debug, Clone, Default)]
pub struct ParamSet {
    params: Vec<Parameter>,
}

impl ParamSet {
    pub fn new() -> Self {
        ParamSet { params: Vec::new() }
    }

    pub fn add(&mut self, name: impl Into<String>, value: Tensor) -> ParamId {
        let name = name.into();
        assert!(
            self.find(&name).is_none(),
            "duplicate parameter name {name:?}"
        );
        let grad = Tensor::zeros(value.shape());
        self.params.push(Parameter { name, value, grad });
        ParamId(self.params.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn get(&self, id: ParamId) -> &Parameter {
        &self.params[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Parameter {
        &mut self.params[id.0]
    }

    pub fn value(&self, id: ParamId) -> &Tensor {
        &self.params[id.0].value
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.params[id.0].value
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.params.iter().position(|p| p.name == name).map(ParamId)
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.params.len()).map(ParamId)
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &Parameter)> {
        self.params.iter().enumerate().map(|(i, p)| (ParamId(i), p))
    }

    /// Total scalar element count across all parameters.
    pub fn total_elements(&self) -> u64 {
        self.params.iter().map(|p| p.value.numel() as u64).sum()
    }

    /// Add a gradient vector into the per-parameter accumulators.
    pub fn accumulate(&mut self, grads: &Gradients) {
        assert_eq!(grads.grads.len(), self.params.len());
        for (p, g) in self.params.iter_mut().zip(grads.grads.iter()) {
            for (acc, &v) in p.grad.data_mut().iter_mut().zip(g.data()) {
                *acc += v;
            }
        }
    }

    pub fn zero_grads(&mut self) {
        for p in self.params.iter_mut() {
            p.grad.data_mut().fill(0.0);
        }
    }
}

/// Per-parameter gradients produced by one backward pass, aligned with the
/// [`ParamSet`] the graph was built over. Parameters the loss never touched
/// hold zeros.
#[derive(Debug, Clone)]
pub struct Gradients {
    grads: Vec<Tensor>,
}

impl Gradients {
    pub(crate) fn zeros_like(params: &ParamSet) -> Self {
        Gradients {
            grads: params
                .params
                .iter()
                .map(|p| Tensor::zeros(p.value.shape()))
                .collect(),
        }
    }

    pub fn get(&self, id: ParamId) -> &Tensor {
        &self.grads[id.0]
    }

    pub(crate) fn get_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.grads[id.0]
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &Tensor)> {
        self.grads.iter().enumerate().map(|(i, t)| (ParamId(i), t))
    }

    /// Elementwise sum with another gradient vector of the same layout.
    pub fn add_assign(&mut self, other: &Gradients) -> Result<()> {
        if self.grads.len() != other.grads.len() {
            return Err(Error::contract(
                "gradient vectors come from different parameter sets",
            ));
        }
        for (a, b) in self.grads.iter_mut().zip(other.grads.iter()) {
            for (x, &y) in a.data_mut().iter_mut().zip(b.data()) {
                *x += y;
            }
        }
        Ok(())
    }

    pub fn scale(&mut self, factor: f64) {
        for g in self.grads.iter_mut() {
            for x in g.data_mut() {
                *x *= factor;
            }
        }
    }

    /// Euclidean norm over the concatenation of all gradients.
    pub fn global_norm(&self) -> f64 {
        self.grads
            .iter()
            .flat_map(|g| g.data().iter())
            .map(|&x| x * x)
            .sum::<f64>()
            .sqrt()
    }

    pub fn has_nan(&self) -> bool {
        self.grads.iter().any(|g| g.has_nan())
    }
}
