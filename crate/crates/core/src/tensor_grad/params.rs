use std::io::{Read, Write};
use std::path::Path;

use indexmap::IndexMap;

use super::Tensor;
use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"STCP";
pub const CHECKPOINT_VERSION: u32 = 1;

/// A trainable tensor with its accumulated gradient and momentum buffer.
#[derive(Clone, Debug, PartialEq)]
pub struct Param {
    pub value: Tensor,
    pub grad: Tensor,
    pub velocity: Tensor,
}

impl Param {
    pub fn new(value: Tensor) -> Self {
        let grad = Tensor::zeros(value.shape());
        let velocity = Tensor::zeros(value.shape());
        Self {
            value,
            grad,
            velocity,
        }
    }
}

/// Named parameters in insertion order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamSet {
    entries: IndexMap<String, Param>,
}

impl ParamSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, value: Tensor) {
        self.entries.insert(name.into(), Param::new(value));
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn get(&self, name: &str) -> Option<&Param> {
        self.entries.get(name)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Param> {
        self.entries.get_mut(name)
    }

    pub fn value(&self, name: &str) -> Result<&Tensor> {
        self.get(name)
            .map(|p| &p.value)
            .ok_or_else(|| Error::invalid(format!("missing parameter `{name}`")))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Param)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&str, &mut Param)> {
        self.entries.iter_mut().map(|(k, v)| (k.as_str(), v))
    }

    pub fn num_scalars(&self) -> usize {
        self.entries.values().map(|p| p.value.len()).sum()
    }

    pub fn zero_grads(&mut self) {
        for p in self.entries.values_mut() {
            p.grad.fill(0.0);
        }
    }

    /// Adds `grads` (one tensor per entry, in entry order) into the stored
    /// gradients.
    pub fn accumulate_grads(&mut self, grads: &[Tensor]) -> Result<()> {
        if grads.len() != self.entries.len() {
            return Err(Error::invalid(format!(
                "expected {} gradient tensors, got {}",
                self.entries.len(),
                grads.len()
            )));
        }
        for (p, g) in self.entries.values_mut().zip(grads) {
            p.grad.add_assign(g)?;
        }
        Ok(())
    }

    /// True when every value tensor equals the other's bit for bit.
    pub fn same_values(&self, other: &ParamSet) -> bool {
        self.entries.len() == other.entries.len()
            && self
                .entries
                .iter()
                .zip(&other.entries)
                .all(|((a, pa), (b, pb))| a == b && pa.value == pb.value)
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.entries.len() as u32).to_le_bytes());
        for (name, p) in &self.entries {
            let name_len = u16::try_from(name.len())
                .map_err(|_| Error::invalid(format!("parameter name too long: {name}")))?;
            out.extend_from_slice(&name_len.to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            let rank = u8::try_from(p.value.rank())
                .map_err(|_| Error::invalid(format!("rank too large for `{name}`")))?;
            out.push(rank);
            for &d in p.value.shape() {
                let d = u32::try_from(d)
                    .map_err(|_| Error::invalid(format!("dimension too large in `{name}`")))?;
                out.extend_from_slice(&d.to_le_bytes());
            }
            for v in p.value.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> std::result::Result<Self, String> {
        let mut r = bytes;
        let mut magic = [0u8; 4];
        read_exact(&mut r, &mut magic)?;
        if &magic != CHECKPOINT_MAGIC {
            return Err(format!("bad magic {magic:?}"));
        }
        let version = read_u32(&mut r)?;
        if version != CHECKPOINT_VERSION {
            return Err(format!("unsupported checkpoint version {version}"));
        }
        let count = read_u32(&mut r)?;
        let mut set = ParamSet::new();
        for _ in 0..count {
            let mut len = [0u8; 2];
            read_exact(&mut r, &mut len)?;
            let mut name = vec![0u8; u16::from_le_bytes(len) as usize];
            read_exact(&mut r, &mut name)?;
            let name = String::from_utf8(name).map_err(|e| e.to_string())?;
            let mut rank = [0u8; 1];
            read_exact(&mut r, &mut rank)?;
            let shape = (0..rank[0])
                .map(|_| read_u32(&mut r).map(|d| d as usize))
                .collect::<std::result::Result<Vec<_>, _>>()?;
            let len: usize = shape.iter().product();
            if len * 8 > r.len() {
                return Err(format!("truncated values for `{name}`"));
            }
            let mut data = Vec::with_capacity(len);
            for _ in 0..len {
                let mut b = [0u8; 8];
                read_exact(&mut r, &mut b)?;
                data.push(f64::from_le_bytes(b));
            }
            let value = Tensor::new(shape, data).map_err(|e| format!("`{name}`: {e}"))?;
            if set
                .entries
                .insert(name.clone(), Param::new(value))
                .is_some()
            {
                return Err(format!("duplicate parameter `{name}`"));
            }
        }
        if !r.is_empty() {
            return Err(format!("{} trailing bytes", r.len()));
        }
        Ok(set)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let bytes = self.to_bytes()?;
        std::fs::File::create(path)
            .and_then(|mut f| f.write_all(&bytes))
            .map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes).map_err(|msg| Error::format(path, msg))
    }
}

fn read_exact(r: &mut &[u8], buf: &mut [u8]) -> std::result::Result<(), String> {
    r.read_exact(buf)
        .map_err(|_| "unexpected end of checkpoint".to_string())
}

fn read_u32(r: &mut &[u8]) -> std::result::Result<u32, String> {
    let mut b = [0u8; 4];
    read_exact(r, &mut b)?;
    Ok(u32::from_le_bytes(b))
}

/// One momentum-SGD update on every entry, then zeroes the gradients:
/// `v ← momentum·v + g + weight_decay·w`, `w ← w − lr·v`.
pub fn sgd_step(params: &mut ParamSet, lr: f64, momentum: f64, weight_decay: f64) -> Result<()> {
    sgd_step_scaled(params, lr, momentum, weight_decay, |_| 1.0)
}

/// [`sgd_step`] with a per-parameter learning-rate multiplier.
pub fn sgd_step_scaled(
    params: &mut ParamSet,
    lr: f64,
    momentum: f64,
    weight_decay: f64,
    lr_multiplier: impl Fn(&str) -> f64,
) -> Result<()> {
    if let Some((name, _)) = params.iter().find(|(_, p)| !p.grad.all_finite()) {
        return Err(Error::NonFiniteGradient(name.to_string()));
    }
    for (name, p) in params.iter_mut() {
        let step = lr * lr_multiplier(name);
        let Param {
            value,
            grad,
            velocity,
        } = p;
        for ((w, g), v) in value
            .data_mut()
            .iter_mut()
            .zip(grad.data_mut().iter_mut())
            .zip(velocity.data_mut())
        {
            *v = momentum * *v + *g + weight_decay * *w;
            *w -= step * *v;
            *g = 0.0;
        }
    }
    Ok(())
}
