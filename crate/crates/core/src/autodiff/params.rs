//! Named parameters, Adam state, and the `LPCK` checkpoint format.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::tensor::Tensor;
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"LPCK";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(usize);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.0,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamStore {
    names: Vec<String>,
    tensors: Vec<Tensor>,
    by_name: BTreeMap<String, ParamId>,
    first_moment: Vec<Vec<f64>>,
    second_moment: Vec<Vec<f64>>,
    step: u64,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: &str, mut t: Tensor) -> Result<ParamId> {
        if self.by_name.contains_key(name) {
            return Err(Error::InvalidArgument(format!("duplicate parameter {name:?}")));
        }
        t.requires_grad = true;
        t.grad = None;
        let id = ParamId(self.tensors.len());
        self.first_moment.push(vec![0.0; t.len()]);
        self.second_moment.push(vec![0.0; t.len()]);
        self.names.push(name.to_string());
        self.tensors.push(t);
        self.by_name.insert(name.to_string(), id);
        Ok(id)
    }

    /// Adds a `rows x cols` matrix drawn uniformly from `±sqrt(6/(rows+cols))`.
    pub fn add_glorot<R: Rng>(&mut self, name: &str, rows: usize, cols: usize, rng: &mut R) -> Result<ParamId> {
        let bound = (6.0 / (rows + cols) as f64).sqrt();
        let values = (0..rows * cols).map(|_| rng.gen_range(-bound..bound)).collect();
        self.add(name, Tensor::matrix(rows, cols, values)?)
    }

    pub fn add_zeros(&mut self, name: &str, rows: usize, cols: usize) -> Result<ParamId> {
        self.add(name, Tensor::zeros(rows, cols))
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.by_name.get(name).copied()
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.tensors.len()).map(ParamId)
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn tensor(&self, id: ParamId) -> &Tensor {
        &self.tensors[id.0]
    }

    pub fn tensor_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.tensors[id.0]
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn num_scalars(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }

    pub(crate) fn add_grad(&mut self, id: ParamId, g: &[f64]) {
        let t = &mut self.tensors[id.0];
        match &mut t.grad {
            Some(acc) => acc.iter_mut().zip(g).for_each(|(a, b)| *a += b),
            slot => *slot = Some(g.to_vec()),
        }
    }

    /// Sets every gradient to zero.
    pub fn zero_grad(&mut self) {
        for t in &mut self.tensors {
            t.grad = Some(vec![0.0; t.len()]);
        }
    }

    /// Adam with decoupled weight decay; leaves gradients zeroed.
    pub fn adam_step(&mut self, cfg: &AdamConfig) -> Result<()> {
        if let Some(i) = self.tensors.iter().position(|t| t.grad.is_none()) {
            return Err(Error::InvalidArgument(format!(
                "parameter {:?} has no gradient",
                self.names[i]
            )));
        }
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - cfg.beta1.powi(t);
        let bc2 = 1.0 - cfg.beta2.powi(t);
        for (k, tensor) in self.tensors.iter_mut().enumerate() {
            let grad = tensor.grad.take().expect("checked above");
            let (m, v) = (&mut self.first_moment[k], &mut self.second_moment[k]);
            for (j, x) in tensor.values_mut().iter_mut().enumerate() {
                let g = grad[j];
                m[j] = cfg.beta1 * m[j] + (1.0 - cfg.beta1) * g;
                v[j] = cfg.beta2 * v[j] + (1.0 - cfg.beta2) * g * g;
                let m_hat = m[j] / bc1;
                let v_hat = v[j] / bc2;
                *x -= cfg.lr * cfg.weight_decay * *x;
                *x -= cfg.lr * m_hat / (v_hat.sqrt() + cfg.eps);
            }
            tensor.grad = Some(vec![0.0; grad.len()]);
        }
        Ok(())
    }

    pub fn write_checkpoint(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        self.write_to(&mut w).map_err(|e| Error::io(path, e))?;
        w.flush().map_err(|e| Error::io(path, e))
    }

    /// `LPCK`, u32 count, then per tensor: u32 name length, UTF-8 name,
    /// u32 rank, rank x u32 dims, f32 payload. All little-endian.
    pub fn write_to<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&(self.tensors.len() as u32).to_le_bytes())?;
        for (name, t) in self.names.iter().zip(&self.tensors) {
            w.write_all(&(name.len() as u32).to_le_bytes())?;
            w.write_all(name.as_bytes())?;
            w.write_all(&(t.shape().len() as u32).to_le_bytes())?;
            for &d in t.shape() {
                w.write_all(&(d as u32).to_le_bytes())?;
            }
            for &x in t.values() {
                w.write_all(&(x as f32).to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_checkpoint(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_from(&mut BufReader::new(file))
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<Self> {
        let io = |e| Error::io("<checkpoint>", e);
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic).map_err(io)?;
        if &magic != MAGIC {
            return Err(Error::Format("bad checkpoint magic".into()));
        }
        let count = read_u32(r).map_err(io)?;
        let mut store = ParamStore::new();
        for _ in 0..count {
            let len = read_u32(r).map_err(io)? as usize;
            let mut name = vec![0u8; len];
            r.read_exact(&mut name).map_err(io)?;
            let name = String::from_utf8(name).map_err(|_| Error::Format("non-UTF-8 tensor name".into()))?;
            let rank = read_u32(r).map_err(io)? as usize;
            let shape = (0..rank)
                .map(|_| read_u32(r).map(|d| d as usize))
                .collect::<std::io::Result<Vec<_>>>()
                .map_err(io)?;
            let n: usize = shape.iter().product();
            let mut values = Vec::with_capacity(n);
            for _ in 0..n {
                let mut buf = [0u8; 4];
                r.read_exact(&mut buf).map_err(io)?;
                values.push(f32::from_le_bytes(buf) as f64);
            }
            store.add(&name, Tensor::new(shape, values)?)?;
        }
        Ok(store)
    }

    /// Copies values from `other` for every parameter present in both stores
    /// with matching shapes; errors on a missing name or shape change.
    pub fn load_values_from(&mut self, other: &ParamStore) -> Result<()> {
        for k in 0..self.tensors.len() {
            let name = &self.names[k];
            let src = other
                .id(name)
                .map(|id| other.tensor(id))
                .ok_or_else(|| Error::Format(format!("checkpoint lacks parameter {name:?}")))?;
            if src.shape() != self.tensors[k].shape() {
                return Err(Error::Format(format!(
                    "parameter {name:?} has shape {:?} in checkpoint, expected {:?}",
                    src.shape(),
                    self.tensors[k].shape()
                )));
            }
            self.tensors[k].values_mut().copy_from_slice(src.values());
        }
        Ok(())
    }
}

fn read_u32<R: Read>(r: &mut R) -> std::io::Result<u32> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}
