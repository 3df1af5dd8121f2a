//! Named parameter tensors with gradient accumulators and Adam state,
//! plus the binary checkpoint container.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

const MAGIC: &[u8; 8] = b"HCFPARMS";
const FORMAT_VERSION: u32 = 1;
const FLAG_ADAM_STATE: u8 = 0x01;

#[derive(Clone, Debug)]
struct Entry {
    name: String,
    value: Tensor,
    grad: Tensor,
    m: Tensor,
    v: Tensor,
    step: u64,
}

/// Ordered collection of named parameters. Entries keep registration order,
/// so every iteration (Adam sweeps, checkpoint layout) is deterministic.
#[derive(Clone, Debug, Default)]
pub struct ParameterStore {
    entries: Vec<Entry>,
    index: HashMap<String, usize>,
}

impl ParameterStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, name: &str, value: Tensor) -> Result<()> {
        if self.index.contains_key(name) {
            return Err(Error::DuplicateParameter(name.to_string()));
        }
        let entry = Entry {
            name: name.to_string(),
            grad: Tensor::zeros_like(&value),
            m: Tensor::zeros_like(&value),
            v: Tensor::zeros_like(&value),
            step: 0,
            value,
        };
        self.index.insert(name.to_string(), self.entries.len());
        self.entries.push(entry);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Total number of scalar parameters.
    pub fn num_scalars(&self) -> usize {
        self.entries.iter().map(|e| e.value.len()).sum()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.name.as_str())
    }

    pub fn value(&self, name: &str) -> Option<&Tensor> {
        self.index.get(name).map(|&i| &self.entries[i].value)
    }

    pub fn grad(&self, name: &str) -> Option<&Tensor> {
        self.index.get(name).map(|&i| &self.entries[i].grad)
    }

    pub fn set_value(&mut self, name: &str, value: Tensor) -> Result<()> {
        let i = *self
            .index
            .get(name)
            .ok_or_else(|| Error::UnknownParameter(name.to_string()))?;
        if value.shape() != self.entries[i].value.shape() {
            return Err(Error::Data(format!(
                "set_value {name:?}: shape {:?} != {:?}",
                value.shape(),
                self.entries[i].value.shape()
            )));
        }
        self.entries[i].value = value;
        Ok(())
    }

    /// Nudge one scalar component (used by the finite-difference harness).
    pub fn perturb(&mut self, name: &str, idx: usize, delta: f64) -> Result<()> {
        let i = *self
            .index
            .get(name)
            .ok_or_else(|| Error::UnknownParameter(name.to_string()))?;
        self.entries[i].value.data_mut()[idx] += delta;
        Ok(())
    }

    /// Additive gradient accumulation; caller clears between steps
    /// ([`ParameterStore::adam_step`] clears after applying).
    pub fn accumulate_grad(&mut self, name: &str, grad: &Tensor) -> Result<()> {
        let i = *self
            .index
            .get(name)
            .ok_or_else(|| Error::UnknownParameter(name.to_string()))?;
        let e = &mut self.entries[i];
        if grad.shape() != e.value.shape() {
            return Err(Error::Data(format!(
                "gradient shape {:?} != parameter shape {:?} for {name:?}",
                grad.shape(),
                e.value.shape()
            )));
        }
        e.grad.axpy(1.0, grad);
        Ok(())
    }

    pub fn zero_grads(&mut self) {
        for e in &mut self.entries {
            e.grad = Tensor::zeros_like(&e.value);
        }
    }

    /// One Adam update with bias correction over every entry. Gradients are
    /// zeroed afterwards and each entry's step counter is incremented.
    pub fn adam_step(&mut self, lr: f64, beta1: f64, beta2: f64, eps: f64) -> Result<()> {
        for e in &self.entries {
            if !e.grad.is_finite() {
                return Err(Error::NonFiniteGradient(e.name.clone()));
            }
        }
        for e in &mut self.entries {
            e.step += 1;
            let t = e.step as i32;
            let bc1 = 1.0 - beta1.powi(t);
            let bc2 = 1.0 - beta2.powi(t);
            let n = e.value.len();
            for i in 0..n {
                let g = e.grad.data()[i];
                let m = beta1 * e.m.data()[i] + (1.0 - beta1) * g;
                let v = beta2 * e.v.data()[i] + (1.0 - beta2) * g * g;
                e.m.data_mut()[i] = m;
                e.v.data_mut()[i] = v;
                let m_hat = m / bc1;
                let v_hat = v / bc2;
                e.value.data_mut()[i] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
            e.grad = Tensor::zeros_like(&e.value);
        }
        Ok(())
    }

    /// Write the self-describing container. Adam moments and step counters go
    /// into a flagged trailer section when `include_moments` is set.
    pub fn save(&self, path: &Path, include_moments: bool) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        w.write_all(MAGIC)?;
        w.write_u32::<LittleEndian>(FORMAT_VERSION)?;
        w.write_u8(if include_moments { FLAG_ADAM_STATE } else { 0 })?;
        w.write_u32::<LittleEndian>(self.entries.len() as u32)?;
        for e in &self.entries {
            let name = e.name.as_bytes();
            w.write_u32::<LittleEndian>(name.len() as u32)?;
            w.write_all(name)?;
            w.write_u32::<LittleEndian>(e.value.rank() as u32)?;
            for &d in e.value.shape() {
                w.write_u64::<LittleEndian>(d as u64)?;
            }
            for &x in e.value.data() {
                w.write_f64::<LittleEndian>(x)?;
            }
        }
        if include_moments {
            for e in &self.entries {
                w.write_u64::<LittleEndian>(e.step)?;
                for &x in e.m.data() {
                    w.write_f64::<LittleEndian>(x)?;
                }
                for &x in e.v.data() {
                    w.write_f64::<LittleEndian>(x)?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bad = |msg: &str| Error::Checkpoint(format!("{}: {msg}", path.display()));
        let mut r = BufReader::new(File::open(path)?);
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(bad("bad magic"));
        }
        let version = r.read_u32::<LittleEndian>()?;
        if version != FORMAT_VERSION {
            return Err(bad(&format!("unsupported format version {version}")));
        }
        let flags = r.read_u8()?;
        let count = r.read_u32::<LittleEndian>()? as usize;
        let mut store = ParameterStore::new();
        for _ in 0..count {
            let name_len = r.read_u32::<LittleEndian>()? as usize;
            let mut name = vec![0u8; name_len];
            r.read_exact(&mut name)?;
            let name =
                String::from_utf8(name).map_err(|_| bad("parameter name is not valid UTF-8"))?;
            let rank = r.read_u32::<LittleEndian>()? as usize;
            let mut shape = Vec::with_capacity(rank);
            for _ in 0..rank {
                shape.push(r.read_u64::<LittleEndian>()? as usize);
            }
            let n: usize = shape.iter().product();
            let mut data = Vec::with_capacity(n);
            for _ in 0..n {
                data.push(r.read_f64::<LittleEndian>()?);
            }
            store.register(&name, Tensor::new(shape, data)?)?;
        }
        if flags & FLAG_ADAM_STATE != 0 {
            for i in 0..count {
                let step = r.read_u64::<LittleEndian>()?;
                let n = store.entries[i].value.len();
                let mut m = Vec::with_capacity(n);
                for _ in 0..n {
                    m.push(r.read_f64::<LittleEndian>()?);
                }
                let mut v = Vec::with_capacity(n);
                for _ in 0..n {
                    v.push(r.read_f64::<LittleEndian>()?);
                }
                let shape = store.entries[i].value.shape().to_vec();
                store.entries[i].m = Tensor::new(shape.clone(), m)?;
                store.entries[i].v = Tensor::new(shape, v)?;
                store.entries[i].step = step;
            }
        }
        Ok(store)
    }
}
