//! Checkpoint file format.
//!
//! Little-endian binary: magic "IPA1"; u32 length + JSON metadata block;
//! u32 tensor count; per tensor a u32 name length, the UTF-8 name, a u8
//! dtype tag (0 = f32, 1 = f64), a u8 rank, rank u64 extents, then the raw
//! element bytes. Saving, loading, and saving again is byte-identical.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use autodiff_core::{Precision, Tensor};

use crate::adam::AdamState;
use crate::spec::CheckpointMeta;
use crate::{Error, LanguageModel, Result};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"IPA1";

/// Upper bounds applied while parsing untrusted bytes.
const MAX_JSON_BYTES: u32 = 1 << 26;
const MAX_NAME_BYTES: u32 = 1 << 12;
const MAX_RANK: u8 = 8;
const MAX_ELEMENTS: u64 = 1 << 28;
const MAX_TENSORS: u32 = 1 << 20;

#[derive(Debug, Clone, PartialEq)]
pub struct NamedTensor {
    pub name: String,
    pub precision: Precision,
    pub tensor: Tensor,
}

fn write_tensor(out: &mut dyn Write, name: &str, t: &Tensor, precision: Precision) -> Result<()> {
    out.write_all(&(name.len() as u32).to_le_bytes())?;
    out.write_all(name.as_bytes())?;
    out.write_all(&[precision.tag()])?;
    out.write_all(&[t.rank() as u8])?;
    for &d in t.shape() {
        out.write_all(&(d as u64).to_le_bytes())?;
    }
    match precision {
        Precision::F64 => {
            for &v in t.data() {
                out.write_all(&v.to_le_bytes())?;
            }
        }
        Precision::F32 => {
            for &v in t.data() {
                out.write_all(&(v as f32).to_le_bytes())?;
            }
        }
    }
    Ok(())
}

pub fn save_checkpoint(
    path: impl AsRef<Path>,
    meta: &CheckpointMeta,
    model: &dyn LanguageModel,
    adam: &AdamState,
) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    out.write_all(CHECKPOINT_MAGIC)?;
    let json = serde_json::to_vec(meta)?;
    out.write_all(&(json.len() as u32).to_le_bytes())?;
    out.write_all(&json)?;

    let params = model.params();
    let count = params.len() * 3;
    out.write_all(&(count as u32).to_le_bytes())?;
    let precision = meta.train.precision;
    for (id, p) in params.iter() {
        write_tensor(&mut out, &format!("param.{}", p.name()), p.value(), precision)?;
        write_tensor(
            &mut out,
            &format!("adam.m.{}", p.name()),
            &adam.first[id.index()],
            precision,
        )?;
        write_tensor(
            &mut out,
            &format!("adam.v.{}", p.name()),
            &adam.second[id.index()],
            precision,
        )?;
    }
    out.flush()?;
    Ok(())
}

struct Cursor<R: Read> {
    inner: R,
}

impl<R: Read> Cursor<R> {
    fn u8(&mut self) -> Result<u8> {
        let mut b = [0u8; 1];
        self.inner.read_exact(&mut b)?;
        Ok(b[0])
    }

    fn u32(&mut self) -> Result<u32> {
        let mut b = [0u8; 4];
        self.inner.read_exact(&mut b)?;
        Ok(u32::from_le_bytes(b))
    }

    fn u64(&mut self) -> Result<u64> {
        let mut b = [0u8; 8];
        self.inner.read_exact(&mut b)?;
        Ok(u64::from_le_bytes(b))
    }

    /// Reads `len` bytes in bounded chunks so a hostile length field cannot
    /// trigger a giant allocation before data actually arrives.
    fn bytes(&mut self, len: usize) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        let mut remaining = len;
        let mut chunk = [0u8; 64 * 1024];
        while remaining > 0 {
            let take = remaining.min(chunk.len());
            self.inner.read_exact(&mut chunk[..take])?;
            out.extend_from_slice(&chunk[..take]);
            remaining -= take;
        }
        Ok(out)
    }
}

/// Parses metadata and tensors without constructing a model. Never panics
/// on malformed input; every length field is bounded before use.
pub fn read_checkpoint_raw(reader: impl Read) -> Result<(CheckpointMeta, Vec<NamedTensor>)> {
    let mut c = Cursor { inner: reader };

    let mut magic = [0u8; 4];
    c.inner.read_exact(&mut magic)?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(Error::Format("bad magic".into()));
    }

    let json_len = c.u32()?;
    if json_len > MAX_JSON_BYTES {
        return Err(Error::Format(format!("metadata block of {json_len} bytes")));
    }
    let json = c.bytes(json_len as usize)?;
    let meta: CheckpointMeta = serde_json::from_slice(&json)?;

    let count = c.u32()?;
    if count > MAX_TENSORS {
        return Err(Error::Format(format!("{count} tensors")));
    }
    let mut tensors = Vec::with_capacity(count.min(4096) as usize);
    for _ in 0..count {
        let name_len = c.u32()?;
        if name_len > MAX_NAME_BYTES {
            return Err(Error::Format(format!("tensor name of {name_len} bytes")));
        }
        let name = String::from_utf8(c.bytes(name_len as usize)?)
            .map_err(|e| Error::Format(format!("tensor name not UTF-8: {e}")))?;
        let precision = Precision::from_tag(c.u8()?)
            .map_err(|e| Error::Format(e.to_string()))?;
        let rank = c.u8()?;
        if rank > MAX_RANK {
            return Err(Error::Format(format!("tensor rank {rank}")));
        }
        let mut shape = Vec::with_capacity(rank as usize);
        let mut numel: u64 = 1;
        for _ in 0..rank {
            let d = c.u64()?;
            if d == 0 {
                return Err(Error::Format("zero extent".into()));
            }
            numel = numel.saturating_mul(d);
            shape.push(d as usize);
        }
        if numel > MAX_ELEMENTS {
            return Err(Error::Format(format!("tensor with {numel} elements")));
        }
        let raw = c.bytes(numel as usize * precision.element_bytes())?;
        let data: Vec<f64> = match precision {
            Precision::F64 => raw
                .chunks_exact(8)
                .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
                .collect(),
            Precision::F32 => raw
                .chunks_exact(4)
                .map(|b| f32::from_le_bytes(b.try_into().unwrap()) as f64)
                .collect(),
        };
        let tensor =
            Tensor::new(shape, data).map_err(|e| Error::Format(format!("bad tensor: {e}")))?;
        tensors.push(NamedTensor {
            name,
            precision,
            tensor,
        });
    }
    Ok((meta, tensors))
}

/// Rebuilds the model and optimizer state a checkpoint describes.
pub fn load_checkpoint(
    path: impl AsRef<Path>,
) -> Result<(CheckpointMeta, Box<dyn LanguageModel>, AdamState)> {
    let file = BufReader::new(File::open(path)?);
    let (meta, tensors) = read_checkpoint_raw(file)?;
    meta.train.validate()?;

    let mut model = meta
        .model
        .build(meta.vocab_size, meta.train.seed, meta.train.precision)?;
    let mut adam = AdamState::new(model.params());
    adam.step = meta.step;

    let expected = model.params().len() * 3;
    if tensors.len() != expected {
        return Err(Error::Format(format!(
            "expected {expected} tensors for this architecture, found {}",
            tensors.len()
        )));
    }

    for nt in tensors {
        let (kind, param_name) = if let Some(rest) = nt.name.strip_prefix("param.") {
            ("param", rest)
        } else if let Some(rest) = nt.name.strip_prefix("adam.m.") {
            ("adam.m", rest)
        } else if let Some(rest) = nt.name.strip_prefix("adam.v.") {
            ("adam.v", rest)
        } else {
            return Err(Error::Format(format!("unexpected tensor {:?}", nt.name)));
        };
        let id = model
            .params()
            .find(param_name)
            .ok_or_else(|| Error::Format(format!("unknown parameter {param_name:?}")))?;
        let slot = match kind {
            "param" => model.params_mut().value_mut(id),
            "adam.m" => &mut adam.first[id.index()],
            _ => &mut adam.second[id.index()],
        };
        if slot.shape() != nt.tensor.shape() {
            return Err(Error::Format(format!(
                "tensor {:?} has shape {:?}, expected {:?}",
                nt.name,
                nt.tensor.shape(),
                slot.shape()
            )));
        }
        *slot = nt.tensor;
    }
    Ok((meta, model, adam))
}
