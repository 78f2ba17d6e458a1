use crate::error::{Error, Result};

/// Storage precision for persisted tensors. In-memory arithmetic always
/// runs at 64 bits; 32-bit is a storage option for trained artifacts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Precision {
    F32,
    #[default]
    F64,
}

impl Precision {
    pub fn tag(self) -> u8 {
        match self {
            Precision::F32 => 0,
            Precision::F64 => 1,
        }
    }

    pub fn from_tag(tag: u8) -> Result<Self> {
        match tag {
            0 => Ok(Precision::F32),
            1 => Ok(Precision::F64),
            other => Err(Error::contract(format!("unknown dtype tag {other}"))),
        }
    }

    pub fn element_bytes(self) -> usize {
        match self {
            Precision::F32 => 4,
            Precision::F64 => 8,
        }
    }
}

/// Dense row-major tensor of 64-bit floats.
///
/// A rank-0 tensor (empty shape) holds exactly one element and is the
/// representation used for scalar losses.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        if shape.iter().any(|&d| d == 0) {
            return Err(Error::contract(format!(
                "tensor extents must be positive, got {shape:?}"
            )));
        }
        let numel: usize = shape.iter().product();
        if numel != data.len() {
            return Err(Error::contract(format!(
                "shape {shape:?} implies {numel} elements, got {}",
                data.len()
            )));
        }
        Ok(Tensor { shape, data })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        let numel: usize = shape.iter().product();
        Tensor {
            shape: shape.to_vec(),
            data: vec![0.0; numel],
        }
    }

    pub fn ones(shape: &[usize]) -> Self {
        Tensor::filled(shape, 1.0)
    }

    pub fn filled(shape: &[usize], value: f64) -> Self {
        let numel: usize = shape.iter().product();
        Tensor {
            shape: shape.to_vec(),
            data: vec![value; numel],
        }
    }

    pub fn scalar(value: f64) -> Self {
        Tensor {
            shape: Vec::new(),
            data: vec![value],
        }
    }

    /// Build from a generator over row-major multi-indices.
    pub fn from_fn(shape: &[usize], mut f: impl FnMut(&[usize]) -> f64) -> Self {
        let numel: usize = shape.iter().product();
        let mut idx = vec![0usize; shape.len()];
        let mut data = Vec::with_capacity(numel);
        for _ in 0..numel {
            data.push(f(&idx));
            for ax in (0..shape.len()).rev() {
                idx[ax] += 1;
                if idx[ax] < shape[ax] {
                    break;
                }
                idx[ax] = 0;
            }
        }
        Tensor {
            shape: shape.to_vec(),
            data,
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    pub fn is_scalar(&self) -> bool {
        self.data.len() == 1
    }

    /// The single element of a one-element tensor.
    pub fn item(&self) -> Result<f64> {
        if self.data.len() != 1 {
            return Err(Error::contract(format!(
                "item() requires a one-element tensor, shape is {:?}",
                self.shape
            )));
        }
        Ok(self.data[0])
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    fn offset(&self, index: &[usize]) -> usize {
        debug_assert_eq!(index.len(), self.shape.len());
        let mut off = 0;
        for (i, &ix) in index.iter().enumerate() {
            debug_assert!(ix < self.shape[i]);
            off = off * self.shape[i] + ix;
        }
        off
    }

    /// Element access by multi-index; row-major layout.
    pub fn at(&self, index: &[usize]) -> f64 {
        self.data[self.offset(index)]
    }

    pub fn set(&mut self, index: &[usize], value: f64) {
        let off = self.offset(index);
        self.data[off] = value;
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Tensor {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Tensor, op: &'static str, f: impl Fn(f64, f64) -> f64) -> Result<Tensor> {
        if self.shape != other.shape {
            return Err(Error::Shape {
                op,
                lhs: self.shape.clone(),
                rhs: other.shape.clone(),
            });
        }
        Ok(Tensor {
            shape: self.shape.clone(),
            data: self
                .data
                .iter()
                .zip(other.data.iter())
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    /// 2-D matrix product.
    pub fn matmul(&self, other: &Tensor) -> Result<Tensor> {
        if self.rank() != 2 || other.rank() != 2 || self.shape[1] != other.shape[0] {
            return Err(Error::Shape {
                op: "matmul",
                lhs: self.shape.clone(),
                rhs: other.shape.clone(),
            });
        }
        let (m, k) = (self.shape[0], self.shape[1]);
        let n = other.shape[1];
        let mut out = vec![0.0; m * n];
        // i-k-j loop order keeps the inner traversal contiguous in both
        // `other` and `out`.
        for i in 0..m {
            let out_row = &mut out[i * n..(i + 1) * n];
            for kk in 0..k {
                let a = self.data[i * k + kk];
                if a == 0.0 {
                    continue;
                }
                let b_row = &other.data[kk * n..(kk + 1) * n];
                for (o, &b) in out_row.iter_mut().zip(b_row.iter()) {
                    *o += a * b;
                }
            }
        }
        Ok(Tensor {
            shape: vec![m, n],
            data: out,
        })
    }

    /// 2-D transpose.
    pub fn transpose2d(&self) -> Result<Tensor> {
        if self.rank() != 2 {
            return Err(Error::Shape {
                op: "transpose",
                lhs: self.shape.clone(),
                rhs: vec![],
            });
        }
        let (r, c) = (self.shape[0], self.shape[1]);
        let mut data = vec![0.0; r * c];
        for i in 0..r {
            for j in 0..c {
                data[j * r + i] = self.data[i * c + j];
            }
        }
        Ok(Tensor {
            shape: vec![c, r],
            data,
        })
    }

    /// Normalized exponential over one axis, max-shifted before
    /// exponentiation so the result is overflow-safe.
    pub fn softmax_axis(&self, axis: usize) -> Result<Tensor> {
        let lanes = AxisLanes::new(&self.shape, axis, "softmax")?;
        let mut out = self.data.clone();
        lanes.for_each(|offsets| {
            let mut max = f64::NEG_INFINITY;
            for &o in offsets {
                max = max.max(self.data[o]);
            }
            let mut sum = 0.0;
            for &o in offsets {
                let e = (self.data[o] - max).exp();
                out[o] = e;
                sum += e;
            }
            for &o in offsets {
                out[o] /= sum;
            }
        });
        Ok(Tensor {
            shape: self.shape.clone(),
            data: out,
        })
    }

    pub fn sum_axis(&self, axis: usize) -> Result<Tensor> {
        let lanes = AxisLanes::new(&self.shape, axis, "sum_axis")?;
        let mut shape = self.shape.clone();
        shape.remove(axis);
        let mut data = Vec::with_capacity(self.numel() / self.shape[axis]);
        lanes.for_each(|offsets| {
            data.push(offsets.iter().map(|&o| self.data[o]).sum());
        });
        Ok(Tensor { shape, data })
    }

    /// Insert a new axis at `axis` with the given extent, replicating.
    pub fn broadcast_axis(&self, axis: usize, extent: usize) -> Result<Tensor> {
        if axis > self.rank() {
            return Err(Error::Index {
                op: "broadcast",
                index: axis,
                bound: self.rank() + 1,
            });
        }
        if extent == 0 {
            return Err(Error::contract("broadcast extent must be positive"));
        }
        let mut shape = self.shape.clone();
        shape.insert(axis, extent);
        let outer: usize = self.shape[..axis].iter().product();
        let inner: usize = self.shape[axis..].iter().product();
        let mut data = Vec::with_capacity(self.numel() * extent);
        for o in 0..outer {
            let chunk = &self.data[o * inner..(o + 1) * inner];
            for _ in 0..extent {
                data.extend_from_slice(chunk);
            }
        }
        Ok(Tensor { shape, data })
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, &x| m.max(x.abs()))
    }

    pub fn has_nan(&self) -> bool {
        self.data.iter().any(|x| !x.is_finite())
    }
}

/// Iteration helper: visits every 1-D lane of a tensor along `axis`.
pub(crate) struct AxisLanes {
    outer: usize,
    axis_len: usize,
    inner: usize,
}

impl AxisLanes {
    pub(crate) fn new(shape: &[usize], axis: usize, op: &'static str) -> Result<Self> {
        if axis >= shape.len() {
            return Err(Error::Index {
                op,
                index: axis,
                bound: shape.len(),
            });
        }
        Ok(AxisLanes {
            outer: shape[..axis].iter().product(),
            axis_len: shape[axis],
            inner: shape[axis + 1..].iter().product(),
        })
    }

    /// Calls `f` once per lane with the flat offsets of the lane's elements,
    /// in row-major lane order (matching `sum_axis` output layout).
    pub(crate) fn for_each(&self, mut f: impl FnMut(&[usize])) {
        let mut offsets = vec![0usize; self.axis_len];
        for o in 0..self.outer {
            for i in 0..self.inner {
                for (a, off) in offsets.iter_mut().enumerate() {
                    *off = (o * self.axis_len + a) * self.inner + i;
                }
                f(&offsets);
            }
        }
    }
}
