use crate::error::{Error, Result};
use crate::param::{Gradients, ParamId, ParamSet};
use crate::tensor::{AxisLanes, Tensor};

/// Handle to a node in a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

/// The operation vocabulary. Every kind has an exact reverse-mode rule.
#[derive(Debug, Clone)]
pub enum OpKind {
    /// 2-D matrix product.
    MatMul,
    Add,
    Sub,
    Mul,
    Div,
    /// Multiply by a compile-time constant.
    Scale(f64),
    /// Add a compile-time constant.
    AddScalar(f64),
    Exp,
    Ln,
    Square,
    Sqrt,
    Relu,
    /// Sum out one axis.
    SumAxis(usize),
    /// Sum all elements to a scalar.
    SumAll,
    /// Insert a replicated axis of the given extent.
    Broadcast { axis: usize, extent: usize },
    /// Normalized exponential over an axis, max-shifted before exp.
    SoftmaxAxis(usize),
    /// Squared Euclidean distances between the columns of an n-by-m input
    /// and a set of P centers given as a P-by-n matrix; output is P-by-m.
    SqDist,
    SliceAxis { axis: usize, start: usize, len: usize },
    Concat { axis: usize },
    Transpose2d,
    Reshape(Vec<usize>),
    /// Integer ids into the rows of a table; output stacks the rows.
    Gather(Vec<usize>),
    /// Overwrite masked positions with a constant; mask is row-major.
    MaskedFill { mask: Vec<bool>, fill: f64 },
    /// Mean over positions of -log softmax(column)[target]; logits are
    /// V-by-m, targets length m. Fused for numerical stability.
    CrossEntropy(Vec<usize>),
}

impl OpKind {
    pub fn name(&self) -> &'static str {
        match self {
            OpKind::MatMul => "matmul",
            OpKind::Add => "add",
            OpKind::Sub => "sub",
            OpKind::Mul => "mul",
            OpKind::Div => "div",
            OpKind::Scale(_) => "scale",
            OpKind::AddScalar(_) => "add_scalar",
            OpKind::Exp => "exp",
            OpKind::Ln => "ln",
            OpKind::Square => "square",
            OpKind::Sqrt => "sqrt",
            OpKind::Relu => "relu",
            OpKind::SumAxis(_) => "sum_axis",
            OpKind::SumAll => "sum_all",
            OpKind::Broadcast { .. } => "broadcast",
            OpKind::SoftmaxAxis(_) => "softmax",
            OpKind::SqDist => "sqdist",
            OpKind::SliceAxis { .. } => "slice",
            OpKind::Concat { .. } => "concat",
            OpKind::Transpose2d => "transpose",
            OpKind::Reshape(_) => "reshape",
            OpKind::Gather(_) => "gather",
            OpKind::MaskedFill { .. } => "masked_fill",
            OpKind::CrossEntropy(_) => "cross_entropy",
        }
    }

    fn arity(&self) -> Option<usize> {
        match self {
            OpKind::MatMul | OpKind::Add | OpKind::Sub | OpKind::Mul | OpKind::Div | OpKind::SqDist => Some(2),
            OpKind::Concat { .. } => None,
            _ => Some(1),
        }
    }
}

enum NodeOp {
    Leaf { param: Option<ParamId> },
    Apply { kind: OpKind, inputs: Vec<Var> },
}

struct Node {
    op: NodeOp,
    value: Tensor,
    needs_grad: bool,
}

/// Tape of operations over a borrowed parameter set.
///
/// Nodes are appended in evaluation order, so the tape is already
/// topologically sorted and one reverse sweep visits each node exactly once.
pub struct Graph<'p> {
    params: &'p ParamSet,
    nodes: Vec<Node>,
    param_vars: Vec<Option<Var>>,
    tracking: bool,
}

impl<'p> Graph<'p> {
    pub fn new(params: &'p ParamSet) -> Self {
        Graph::with_tracking(params, true)
    }

    /// `tracking = false` evaluates forward only; backward is unavailable.
    pub fn with_tracking(params: &'p ParamSet, tracking: bool) -> Self {
        Graph {
            params,
            nodes: Vec::new(),
            param_vars: vec![None; params.len()],
            tracking,
        }
    }

    pub fn params(&self) -> &'p ParamSet {
        self.params
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    /// Leaf holding a constant (never receives a gradient).
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(NodeOp::Leaf { param: None }, value, false)
    }

    pub fn constant_scalar(&mut self, value: f64) -> Var {
        self.constant(Tensor::scalar(value))
    }

    /// Leaf referencing a parameter. Repeated calls return the same node.
    pub fn param(&mut self, id: ParamId) -> Var {
        if let Some(v) = self.param_vars[id.index()] {
            return v;
        }
        let value = self.params.value(id).clone();
        let needs_grad = self.tracking;
        let v = self.push(NodeOp::Leaf { param: Some(id) }, value, needs_grad);
        self.param_vars[id.index()] = Some(v);
        v
    }

    fn push(&mut self, op: NodeOp, value: Tensor, needs_grad: bool) -> Var {
        self.nodes.push(Node {
            op,
            value,
            needs_grad,
        });
        Var(self.nodes.len() - 1)
    }

    /// Record one operation. The generic entry point behind the named
    /// convenience methods.
    pub fn apply(&mut self, kind: OpKind, inputs: &[Var]) -> Result<Var> {
        if let Some(expected) = kind.arity() {
            if inputs.len() != expected {
                return Err(Error::contract(format!(
                    "{} takes {expected} inputs, got {}",
                    kind.name(),
                    inputs.len()
                )));
            }
        } else if inputs.is_empty() {
            return Err(Error::contract(format!(
                "{} takes at least one input",
                kind.name()
            )));
        }
        let value = self.eval(&kind, inputs)?;
        let needs_grad = inputs.iter().any(|v| self.nodes[v.0].needs_grad);
        Ok(self.push(NodeOp::Apply { kind, inputs: inputs.to_vec() }, value, needs_grad))
    }

    fn eval(&self, kind: &OpKind, inputs: &[Var]) -> Result<Tensor> {
        let x = |i: usize| &self.nodes[inputs[i].0].value;
        match kind {
            OpKind::MatMul => x(0).matmul(x(1)),
            OpKind::Add => x(0).zip_map(x(1), "add", |a, b| a + b),
            OpKind::Sub => x(0).zip_map(x(1), "sub", |a, b| a - b),
            OpKind::Mul => x(0).zip_map(x(1), "mul", |a, b| a * b),
            OpKind::Div => x(0).zip_map(x(1), "div", |a, b| a / b),
            OpKind::Scale(c) => Ok(x(0).map(|v| v * c)),
            OpKind::AddScalar(c) => Ok(x(0).map(|v| v + c)),
            OpKind::Exp => Ok(x(0).map(f64::exp)),
            OpKind::Ln => Ok(x(0).map(f64::ln)),
            OpKind::Square => Ok(x(0).map(|v| v * v)),
            OpKind::Sqrt => Ok(x(0).map(f64::sqrt)),
            OpKind::Relu => Ok(x(0).map(|v| v.max(0.0))),
            OpKind::SumAxis(axis) => x(0).sum_axis(*axis),
            OpKind::SumAll => Ok(Tensor::scalar(x(0).data().iter().sum())),
            OpKind::Broadcast { axis, extent } => x(0).broadcast_axis(*axis, *extent),
            OpKind::SoftmaxAxis(axis) => x(0).softmax_axis(*axis),
            OpKind::SqDist => sqdist(x(0), x(1)),
            OpKind::SliceAxis { axis, start, len } => slice_tensor(x(0), *axis, *start, *len),
            OpKind::Concat { axis } => {
                let tensors: Vec<&Tensor> = inputs.iter().map(|v| &self.nodes[v.0].value).collect();
                concat_tensors(&tensors, *axis)
            }
            OpKind::Transpose2d => x(0).transpose2d(),
            OpKind::Reshape(shape) => {
                let t = x(0);
                if shape.iter().product::<usize>() != t.numel() {
                    return Err(Error::Shape {
                        op: "reshape",
                        lhs: t.shape().to_vec(),
                        rhs: shape.clone(),
                    });
                }
                Tensor::new(shape.clone(), t.data().to_vec())
            }
            OpKind::Gather(ids) => gather_rows(x(0), ids),
            OpKind::MaskedFill { mask, fill } => {
                let t = x(0);
                if mask.len() != t.numel() {
                    return Err(Error::contract(format!(
                        "masked_fill mask has {} entries for {} elements",
                        mask.len(),
                        t.numel()
                    )));
                }
                let data = t
                    .data()
                    .iter()
                    .zip(mask.iter())
                    .map(|(&v, &m)| if m { *fill } else { v })
                    .collect();
                Tensor::new(t.shape().to_vec(), data)
            }
            OpKind::CrossEntropy(targets) => cross_entropy_forward(x(0), targets),
        }
    }

    /// Reverse sweep from a scalar loss; returns gradients for every
    /// parameter leaf (zeros for parameters the loss does not reach).
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        if !self.tracking {
            return Err(Error::contract(
                "backward on a graph built without gradient tracking",
            ));
        }
        if self.nodes[loss.0].value.numel() != 1 {
            return Err(Error::contract(format!(
                "backward requires a scalar loss, shape is {:?}",
                self.nodes[loss.0].value.shape()
            )));
        }
        let mut adjoints: Vec<Option<Tensor>> = (0..self.nodes.len()).map(|_| None).collect();
        adjoints[loss.0] = Some(Tensor::ones(self.nodes[loss.0].value.shape()));

        for i in (0..=loss.0).rev() {
            if !self.nodes[i].needs_grad {
                continue;
            }
            let Some(dy) = adjoints[i].take() else { continue };
            match &self.nodes[i].op {
                NodeOp::Leaf { .. } => {
                    adjoints[i] = Some(dy);
                }
                NodeOp::Apply { kind, inputs } => {
                    self.backward_op(kind, inputs, &self.nodes[i].value, &dy, &mut adjoints)?;
                }
            }
        }

        let mut grads = Gradients::zeros_like(self.params);
        for (i, node) in self.nodes.iter().enumerate() {
            if let NodeOp::Leaf { param: Some(pid) } = node.op {
                if let Some(adj) = &adjoints[i] {
                    let g = grads.get_mut(pid);
                    for (acc, &v) in g.data_mut().iter_mut().zip(adj.data()) {
                        *acc += v;
                    }
                }
            }
        }
        Ok(grads)
    }

    fn accumulate(&self, adjoints: &mut [Option<Tensor>], var: Var, delta: Tensor) {
        if !self.nodes[var.0].needs_grad {
            return;
        }
        match &mut adjoints[var.0] {
            Some(existing) => {
                for (a, &d) in existing.data_mut().iter_mut().zip(delta.data()) {
                    *a += d;
                }
            }
            slot => *slot = Some(delta),
        }
    }

    fn backward_op(
        &self,
        kind: &OpKind,
        inputs: &[Var],
        out: &Tensor,
        dy: &Tensor,
        adjoints: &mut [Option<Tensor>],
    ) -> Result<()> {
        let val = |i: usize| &self.nodes[inputs[i].0].value;
        match kind {
            OpKind::MatMul => {
                let (a, b) = (val(0), val(1));
                self.accumulate(adjoints, inputs[0], dy.matmul(&b.transpose2d()?)?);
                self.accumulate(adjoints, inputs[1], a.transpose2d()?.matmul(dy)?);
            }
            OpKind::Add => {
                self.accumulate(adjoints, inputs[0], dy.clone());
                self.accumulate(adjoints, inputs[1], dy.clone());
            }
            OpKind::Sub => {
                self.accumulate(adjoints, inputs[0], dy.clone());
                self.accumulate(adjoints, inputs[1], dy.map(|v| -v));
            }
            OpKind::Mul => {
                self.accumulate(adjoints, inputs[0], dy.zip_map(val(1), "mul", |d, b| d * b)?);
                self.accumulate(adjoints, inputs[1], dy.zip_map(val(0), "mul", |d, a| d * a)?);
            }
            OpKind::Div => {
                let b = val(1);
                self.accumulate(adjoints, inputs[0], dy.zip_map(b, "div", |d, bv| d / bv)?);
                let dyy = dy.zip_map(out, "div", |d, y| d * y)?;
                self.accumulate(adjoints, inputs[1], dyy.zip_map(b, "div", |n, bv| -n / bv)?);
            }
            OpKind::Scale(c) => {
                self.accumulate(adjoints, inputs[0], dy.map(|d| d * c));
            }
            OpKind::AddScalar(_) => {
                self.accumulate(adjoints, inputs[0], dy.clone());
            }
            OpKind::Exp => {
                self.accumulate(adjoints, inputs[0], dy.zip_map(out, "exp", |d, y| d * y)?);
            }
            OpKind::Ln => {
                self.accumulate(adjoints, inputs[0], dy.zip_map(val(0), "ln", |d, x| d / x)?);
            }
            OpKind::Square => {
                self.accumulate(adjoints, inputs[0], dy.zip_map(val(0), "square", |d, x| 2.0 * x * d)?);
            }
            OpKind::Sqrt => {
                self.accumulate(adjoints, inputs[0], dy.zip_map(out, "sqrt", |d, y| 0.5 * d / y)?);
            }
            OpKind::Relu => {
                self.accumulate(
                    adjoints,
                    inputs[0],
                    dy.zip_map(val(0), "relu", |d, x| if x > 0.0 { d } else { 0.0 })?,
                );
            }
            OpKind::SumAxis(axis) => {
                let extent = val(0).shape()[*axis];
                self.accumulate(adjoints, inputs[0], dy.broadcast_axis(*axis, extent)?);
            }
            OpKind::SumAll => {
                let g = dy.item()?;
                self.accumulate(adjoints, inputs[0], Tensor::filled(val(0).shape(), g));
            }
            OpKind::Broadcast { axis, .. } => {
                self.accumulate(adjoints, inputs[0], dy.sum_axis(*axis)?);
            }
            OpKind::SoftmaxAxis(axis) => {
                let mut dx = Tensor::zeros(out.shape());
                let lanes = AxisLanes::new(out.shape(), *axis, "softmax")?;
                lanes.for_each(|offsets| {
                    let dot: f64 = offsets
                        .iter()
                        .map(|&o| out.data()[o] * dy.data()[o])
                        .sum();
                    for &o in offsets {
                        dx.data_mut()[o] = out.data()[o] * (dy.data()[o] - dot);
                    }
                });
                self.accumulate(adjoints, inputs[0], dx);
            }
            OpKind::SqDist => {
                let (x, c) = (val(0), val(1));
                let (n, m) = (x.shape()[0], x.shape()[1]);
                let p_count = c.shape()[0];
                let mut dx = Tensor::zeros(x.shape());
                let mut dc = Tensor::zeros(c.shape());
                for p in 0..p_count {
                    for j in 0..m {
                        let g = 2.0 * dy.data()[p * m + j];
                        if g == 0.0 {
                            continue;
                        }
                        for i in 0..n {
                            let diff = x.data()[i * m + j] - c.data()[p * n + i];
                            dx.data_mut()[i * m + j] += g * diff;
                            dc.data_mut()[p * n + i] -= g * diff;
                        }
                    }
                }
                self.accumulate(adjoints, inputs[0], dx);
                self.accumulate(adjoints, inputs[1], dc);
            }
            OpKind::SliceAxis { axis, start, .. } => {
                let mut dx = Tensor::zeros(val(0).shape());
                scatter_slice_add(&mut dx, dy, *axis, *start);
                self.accumulate(adjoints, inputs[0], dx);
            }
            OpKind::Concat { axis } => {
                let mut offset = 0;
                for &input in inputs {
                    let extent = self.nodes[input.0].value.shape()[*axis];
                    let piece = slice_tensor(dy, *axis, offset, extent)?;
                    self.accumulate(adjoints, input, piece);
                    offset += extent;
                }
            }
            OpKind::Transpose2d => {
                self.accumulate(adjoints, inputs[0], dy.transpose2d()?);
            }
            OpKind::Reshape(_) => {
                let dx = Tensor::new(val(0).shape().to_vec(), dy.data().to_vec())?;
                self.accumulate(adjoints, inputs[0], dx);
            }
            OpKind::Gather(ids) => {
                let table = val(0);
                let width = table.shape()[1];
                let mut dt = Tensor::zeros(table.shape());
                for (t, &id) in ids.iter().enumerate() {
                    for i in 0..width {
                        dt.data_mut()[id * width + i] += dy.data()[t * width + i];
                    }
                }
                self.accumulate(adjoints, inputs[0], dt);
            }
            OpKind::MaskedFill { mask, .. } => {
                let data = dy
                    .data()
                    .iter()
                    .zip(mask.iter())
                    .map(|(&d, &m)| if m { 0.0 } else { d })
                    .collect();
                self.accumulate(adjoints, inputs[0], Tensor::new(dy.shape().to_vec(), data)?);
            }
            OpKind::CrossEntropy(targets) => {
                let logits = val(0);
                let g = dy.item()?;
                self.accumulate(adjoints, inputs[0], cross_entropy_backward(logits, targets, g));
            }
        }
        Ok(())
    }

    // -- convenience wrappers ------------------------------------------------

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.apply(OpKind::MatMul, &[a, b])
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.apply(OpKind::Add, &[a, b])
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.apply(OpKind::Sub, &[a, b])
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.apply(OpKind::Mul, &[a, b])
    }

    pub fn div(&mut self, a: Var, b: Var) -> Result<Var> {
        self.apply(OpKind::Div, &[a, b])
    }

    pub fn scale(&mut self, x: Var, c: f64) -> Result<Var> {
        self.apply(OpKind::Scale(c), &[x])
    }

    pub fn add_scalar(&mut self, x: Var, c: f64) -> Result<Var> {
        self.apply(OpKind::AddScalar(c), &[x])
    }

    pub fn exp(&mut self, x: Var) -> Result<Var> {
        self.apply(OpKind::Exp, &[x])
    }

    pub fn ln(&mut self, x: Var) -> Result<Var> {
        self.apply(OpKind::Ln, &[x])
    }

    pub fn square(&mut self, x: Var) -> Result<Var> {
        self.apply(OpKind::Square, &[x])
    }

    pub fn sqrt(&mut self, x: Var) -> Result<Var> {
        self.apply(OpKind::Sqrt, &[x])
    }

    pub fn relu(&mut self, x: Var) -> Result<Var> {
        self.apply(OpKind::Relu, &[x])
    }

    pub fn sum_axis(&mut self, x: Var, axis: usize) -> Result<Var> {
        self.apply(OpKind::SumAxis(axis), &[x])
    }

    pub fn sum_all(&mut self, x: Var) -> Result<Var> {
        self.apply(OpKind::SumAll, &[x])
    }

    pub fn mean_all(&mut self, x: Var) -> Result<Var> {
        let n = self.value(x).numel() as f64;
        let s = self.sum_all(x)?;
        self.scale(s, 1.0 / n)
    }

    pub fn broadcast(&mut self, x: Var, axis: usize, extent: usize) -> Result<Var> {
        self.apply(OpKind::Broadcast { axis, extent }, &[x])
    }

    pub fn softmax_axis(&mut self, x: Var, axis: usize) -> Result<Var> {
        self.apply(OpKind::SoftmaxAxis(axis), &[x])
    }

    pub fn sqdist(&mut self, x: Var, centers: Var) -> Result<Var> {
        self.apply(OpKind::SqDist, &[x, centers])
    }

    pub fn slice_axis(&mut self, x: Var, axis: usize, start: usize, len: usize) -> Result<Var> {
        self.apply(OpKind::SliceAxis { axis, start, len }, &[x])
    }

    pub fn concat(&mut self, xs: &[Var], axis: usize) -> Result<Var> {
        self.apply(OpKind::Concat { axis }, xs)
    }

    pub fn transpose(&mut self, x: Var) -> Result<Var> {
        self.apply(OpKind::Transpose2d, &[x])
    }

    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Result<Var> {
        self.apply(OpKind::Reshape(shape.to_vec()), &[x])
    }

    pub fn gather(&mut self, table: Var, ids: &[usize]) -> Result<Var> {
        self.apply(OpKind::Gather(ids.to_vec()), &[table])
    }

    pub fn masked_fill(&mut self, x: Var, mask: Vec<bool>, fill: f64) -> Result<Var> {
        self.apply(OpKind::MaskedFill { mask, fill }, &[x])
    }

    pub fn cross_entropy(&mut self, logits: Var, targets: &[usize]) -> Result<Var> {
        self.apply(OpKind::CrossEntropy(targets.to_vec()), &[logits])
    }
}

fn sqdist(x: &Tensor, centers: &Tensor) -> Result<Tensor> {
    if x.rank() != 2 || centers.rank() != 2 || x.shape()[0] != centers.shape()[1] {
        return Err(Error::Shape {
            op: "sqdist",
            lhs: x.shape().to_vec(),
            rhs: centers.shape().to_vec(),
        });
    }
    let (n, m) = (x.shape()[0], x.shape()[1]);
    let p_count = centers.shape()[0];
    let mut out = Tensor::zeros(&[p_count, m]);
    for p in 0..p_count {
        for j in 0..m {
            let mut acc = 0.0;
            for i in 0..n {
                let d = x.data()[i * m + j] - centers.data()[p * n + i];
                acc += d * d;
            }
            out.data_mut()[p * m + j] = acc;
        }
    }
    Ok(out)
}

fn gather_rows(table: &Tensor, ids: &[usize]) -> Result<Tensor> {
    if table.rank() != 2 {
        return Err(Error::Shape {
            op: "gather",
            lhs: table.shape().to_vec(),
            rhs: vec![],
        });
    }
    let (rows, width) = (table.shape()[0], table.shape()[1]);
    let mut data = Vec::with_capacity(ids.len() * width);
    for &id in ids {
        if id >= rows {
            return Err(Error::Index {
                op: "gather",
                index: id,
                bound: rows,
            });
        }
        data.extend_from_slice(&table.data()[id * width..(id + 1) * width]);
    }
    Tensor::new(vec![ids.len(), width], data)
}

fn slice_tensor(x: &Tensor, axis: usize, start: usize, len: usize) -> Result<Tensor> {
    if axis >= x.rank() {
        return Err(Error::Index {
            op: "slice",
            index: axis,
            bound: x.rank(),
        });
    }
    let extent = x.shape()[axis];
    if start + len > extent || len == 0 {
        return Err(Error::Index {
            op: "slice",
            index: start + len,
            bound: extent + 1,
        });
    }
    let outer: usize = x.shape()[..axis].iter().product();
    let inner: usize = x.shape()[axis + 1..].iter().product();
    let mut shape = x.shape().to_vec();
    shape[axis] = len;
    let mut data = Vec::with_capacity(outer * len * inner);
    for o in 0..outer {
        let base = (o * extent + start) * inner;
        data.extend_from_slice(&x.data()[base..base + len * inner]);
    }
    Tensor::new(shape, data)
}

/// Adds `src` (a slice-shaped tensor) into `target` at `start` along `axis`.
fn scatter_slice_add(target: &mut Tensor, src: &Tensor, axis: usize, start: usize) {
    let extent = target.shape()[axis];
    let len = src.shape()[axis];
    let outer: usize = target.shape()[..axis].iter().product();
    let inner: usize = target.shape()[axis + 1..].iter().product();
    for o in 0..outer {
        let dst_base = (o * extent + start) * inner;
        let src_base = o * len * inner;
        for i in 0..len * inner {
            target.data_mut()[dst_base + i] += src.data()[src_base + i];
        }
    }
}

fn concat_tensors(inputs: &[&Tensor], axis: usize) -> Result<Tensor> {
    let first = inputs[0];
    if axis >= first.rank() {
        return Err(Error::Index {
            op: "concat",
            index: axis,
            bound: first.rank(),
        });
    }
    let mut total = 0;
    for t in inputs {
        if t.rank() != first.rank() {
            return Err(Error::Shape {
                op: "concat",
                lhs: first.shape().to_vec(),
                rhs: t.shape().to_vec(),
            });
        }
        for ax in 0..first.rank() {
            if ax != axis && t.shape()[ax] != first.shape()[ax] {
                return Err(Error::Shape {
                    op: "concat",
                    lhs: first.shape().to_vec(),
                    rhs: t.shape().to_vec(),
                });
            }
        }
        total += t.shape()[axis];
    }
    let mut shape = first.shape().to_vec();
    shape[axis] = total;
    let outer: usize = first.shape()[..axis].iter().product();
    let inner: usize = first.shape()[axis + 1..].iter().product();
    let mut data = Vec::with_capacity(outer * total * inner);
    for o in 0..outer {
        for t in inputs {
            let ext = t.shape()[axis];
            let base = o * ext * inner;
            data.extend_from_slice(&t.data()[base..base + ext * inner]);
        }
    }
    Tensor::new(shape, data)
}

fn cross_entropy_forward(logits: &Tensor, targets: &[usize]) -> Result<Tensor> {
    if logits.rank() != 2 {
        return Err(Error::Shape {
            op: "cross_entropy",
            lhs: logits.shape().to_vec(),
            rhs: vec![targets.len()],
        });
    }
    let (v, m) = (logits.shape()[0], logits.shape()[1]);
    if targets.len() != m {
        return Err(Error::Shape {
            op: "cross_entropy",
            lhs: logits.shape().to_vec(),
            rhs: vec![targets.len()],
        });
    }
    let mut total = 0.0;
    for (j, &t) in targets.iter().enumerate() {
        if t >= v {
            return Err(Error::Index {
                op: "cross_entropy",
                index: t,
                bound: v,
            });
        }
        let mut max = f64::NEG_INFINITY;
        for i in 0..v {
            max = max.max(logits.data()[i * m + j]);
        }
        let mut sum = 0.0;
        for i in 0..v {
            sum += (logits.data()[i * m + j] - max).exp();
        }
        total += sum.ln() + max - logits.data()[t * m + j];
    }
    Ok(Tensor::scalar(total / m as f64))
}

fn cross_entropy_backward(logits: &Tensor, targets: &[usize], g: f64) -> Tensor {
    let (v, m) = (logits.shape()[0], logits.shape()[1]);
    let scale = g / m as f64;
    let mut dl = Tensor::zeros(logits.shape());
    for (j, &t) in targets.iter().enumerate() {
        let mut max = f64::NEG_INFINITY;
        for i in 0..v {
            max = max.max(logits.data()[i * m + j]);
        }
        let mut sum = 0.0;
        for i in 0..v {
            sum += (logits.data()[i * m + j] - max).exp();
        }
        for i in 0..v {
            let p = (logits.data()[i * m + j] - max).exp() / sum;
            dl.data_mut()[i * m + j] = scale * (p - if i == t { 1.0 } else { 0.0 });
        }
    }
    dl
}
