//! Named parameter arrays and their versioned binary checkpoint format.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic  b"AFDPARAM"
//! u32    format version
//! u32    metadata entry count, then per entry: u32 len + key bytes, u32 len + value bytes
//! u32    parameter count, then per parameter:
//!        u32 len + name bytes, u64 rows, u64 cols, rows*cols f64 (row-major)
//! ```

use std::collections::{BTreeMap, HashMap};
use std::io::{Read, Write};
use std::path::Path;

use ndarray::{Array2, ArrayViewMut2};
use rand::Rng;
use rand_distr::{Distribution, Uniform};

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"AFDPARAM";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ParamId(usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamStore {
    names: Vec<String>,
    values: Vec<Array2<f64>>,
    index: HashMap<String, usize>,
    meta: BTreeMap<String, String>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Register a new parameter. Names are unique and values must be finite.
    pub fn add(&mut self, name: impl Into<String>, value: Array2<f64>) -> Result<ParamId> {
        let name = name.into();
        if self.index.contains_key(&name) {
            return Err(Error::Config(format!("duplicate parameter name `{name}`")));
        }
        if value.iter().any(|x| !x.is_finite()) {
            return Err(Error::numerical("param_store", format!("non-finite init for `{name}`")));
        }
        let id = self.values.len();
        self.index.insert(name.clone(), id);
        self.names.push(name);
        self.values.push(value);
        Ok(ParamId(id))
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.index.get(name).copied().map(ParamId)
    }

    pub fn get(&self, id: ParamId) -> &Array2<f64> {
        &self.values[id.0]
    }

    pub fn by_name(&self, name: &str) -> Option<&Array2<f64>> {
        self.id(name).map(|id| self.get(id))
    }

    /// Mutable view; the shape cannot change through it.
    pub fn view_mut(&mut self, id: ParamId) -> ArrayViewMut2<'_, f64> {
        self.values[id.0].view_mut()
    }

    /// Overwrite a parameter with a same-shaped value.
    pub fn assign(&mut self, id: ParamId, value: &Array2<f64>) -> Result<()> {
        let slot = &mut self.values[id.0];
        if slot.dim() != value.dim() {
            return Err(Error::Config(format!(
                "assign `{}`: shape {:?} != {:?}",
                self.names[id.0],
                slot.dim(),
                value.dim()
            )));
        }
        slot.assign(value);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Total number of scalar parameters.
    pub fn count(&self) -> usize {
        self.values.iter().map(|v| v.len()).sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Array2<f64>)> {
        self.names.iter().map(String::as_str).zip(self.values.iter())
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&str, ArrayViewMut2<'_, f64>)> {
        self.names
            .iter()
            .map(String::as_str)
            .zip(self.values.iter_mut().map(|v| v.view_mut()))
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn shapes(&self) -> Vec<(usize, usize)> {
        self.values.iter().map(|v| v.dim()).collect()
    }

    pub fn meta(&self) -> &BTreeMap<String, String> {
        &self.meta
    }

    pub fn set_meta(&mut self, key: impl Into<String>, value: impl Into<String>) {
        self.meta.insert(key.into(), value.into());
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.iter().all(|x| x.is_finite()))
    }

    /// True when both stores have the same names and shapes, in order.
    pub fn same_layout(&self, other: &ParamStore) -> bool {
        self.names == other.names && self.shapes() == other.shapes()
    }

    /// Euclidean distance between two stores with identical layout.
    pub fn distance(&self, other: &ParamStore) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).iter().map(|x| x * x).sum::<f64>())
            .sum::<f64>()
            .sqrt()
    }

    /// Copy entries whose name starts with `prefix` into a new store, stripping it.
    pub fn extract_prefixed(&self, prefix: &str) -> Result<ParamStore> {
        let mut out = ParamStore::new();
        for (name, value) in self.iter() {
            if let Some(rest) = name.strip_prefix(prefix) {
                out.add(rest, value.clone())?;
            }
        }
        Ok(out)
    }

    /// Append every entry of `other` under `prefix`.
    pub fn extend_prefixed(&mut self, prefix: &str, other: &ParamStore) -> Result<()> {
        for (name, value) in other.iter() {
            self.add(format!("{prefix}{name}"), value.clone())?;
        }
        Ok(())
    }

    pub fn write_to(&self, w: &mut impl Write) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&FORMAT_VERSION.to_le_bytes())?;
        w.write_all(&(self.meta.len() as u32).to_le_bytes())?;
        for (k, v) in &self.meta {
            write_str(w, k)?;
            write_str(w, v)?;
        }
        w.write_all(&(self.values.len() as u32).to_le_bytes())?;
        for (name, value) in self.iter() {
            write_str(w, name)?;
            w.write_all(&(value.nrows() as u64).to_le_bytes())?;
            w.write_all(&(value.ncols() as u64).to_le_bytes())?;
            for x in value.iter() {
                w.write_all(&x.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_from(r: &mut impl Read) -> Result<ParamStore> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)
            .map_err(|e| Error::Load(format!("truncated header: {e}")))?;
        if &magic != MAGIC {
            return Err(Error::Load("not a parameter checkpoint (bad magic)".into()));
        }
        let version = read_u32(r)?;
        if version != FORMAT_VERSION {
            return Err(Error::Load(format!(
                "checkpoint format version {version}, expected {FORMAT_VERSION}"
            )));
        }
        let mut store = ParamStore::new();
        for _ in 0..read_u32(r)? {
            let k = read_str(r)?;
            let v = read_str(r)?;
            store.meta.insert(k, v);
        }
        for _ in 0..read_u32(r)? {
            let name = read_str(r)?;
            let rows = read_u64(r)? as usize;
            let cols = read_u64(r)? as usize;
            let mut data = Vec::with_capacity(rows * cols);
            let mut buf = [0u8; 8];
            for _ in 0..rows * cols {
                r.read_exact(&mut buf)
                    .map_err(|e| Error::Load(format!("truncated values for `{name}`: {e}")))?;
                data.push(f64::from_le_bytes(buf));
            }
            let value = Array2::from_shape_vec((rows, cols), data)
                .map_err(|e| Error::Load(format!("bad shape for `{name}`: {e}")))?;
            store
                .add(name, value)
                .map_err(|e| Error::Load(e.to_string()))?;
        }
        Ok(store)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::new();
        self.write_to(&mut buf)?;
        std::fs::write(path, buf)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<ParamStore> {
        let bytes = std::fs::read(path)
            .map_err(|e| Error::Load(format!("{}: {e}", path.display())))?;
        ParamStore::read_from(&mut bytes.as_slice())
    }
}

fn write_str(w: &mut impl Write, s: &str) -> Result<()> {
    w.write_all(&(s.len() as u32).to_le_bytes())?;
    w.write_all(s.as_bytes())?;
    Ok(())
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)
        .map_err(|e| Error::Load(format!("truncated checkpoint: {e}")))?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64(r: &mut impl Read) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)
        .map_err(|e| Error::Load(format!("truncated checkpoint: {e}")))?;
    Ok(u64::from_le_bytes(b))
}

fn read_str(r: &mut impl Read) -> Result<String> {
    let len = read_u32(r)? as usize;
    let mut b = vec![0u8; len];
    r.read_exact(&mut b)
        .map_err(|e| Error::Load(format!("truncated string: {e}")))?;
    String::from_utf8(b).map_err(|e| Error::Load(format!("invalid utf-8: {e}")))
}

/// Glorot-uniform initialization for a `fan_in x fan_out` weight.
pub fn glorot<R: Rng + ?Sized>(fan_in: usize, fan_out: usize, rng: &mut R) -> Array2<f64> {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let dist = Uniform::new_inclusive(-limit, limit).expect("finite glorot bound");
    Array2::from_shape_fn((fan_in, fan_out), |_| dist.sample(rng))
}
