//! FPW1: an ordered list of named tensors.
//!
//! ```text
//! "FPW1" | u32 count | count × { u16 name_len | name (UTF-8) | u8 dtype |
//!                                u8 ndim | ndim × u32 dims | payload }
//! ```
//!
//! dtype 0 is `f32`; dtype 1 is complex stored as interleaved `(re, im)` f32
//! pairs. Names must be unique and no bytes may follow the last tensor.

use std::path::Path;

use num_complex::Complex32;

use super::{magic_str, Cursor, FormatError};

pub const FPW_MAGIC: &[u8; 4] = b"FPW1";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DType {
    F32 = 0,
    Complex64 = 1,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TensorData {
    F32(Vec<f32>),
    Complex64(Vec<Complex32>),
}

impl TensorData {
    pub fn len(&self) -> usize {
        match self {
            TensorData::F32(v) => v.len(),
            TensorData::Complex64(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dtype(&self) -> DType {
        match self {
            TensorData::F32(_) => DType::F32,
            TensorData::Complex64(_) => DType::Complex64,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    dims: Vec<usize>,
    data: TensorData,
}

impl Tensor {
    /// Fails if the element count does not match the product of `dims`.
    pub fn new(dims: Vec<usize>, data: TensorData) -> Result<Self, FormatError> {
        let n = dims
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or_else(|| FormatError::Shape("dimension product overflows".into()))?;
        if n != data.len() {
            return Err(FormatError::Shape(format!(
                "dims {dims:?} need {n} elements, got {}",
                data.len()
            )));
        }
        if dims.len() > u8::MAX as usize || dims.iter().any(|&d| d > u32::MAX as usize) {
            return Err(FormatError::Shape(format!("dims {dims:?} not representable")));
        }
        Ok(Self { dims, data })
    }

    pub fn f32(dims: Vec<usize>, data: Vec<f32>) -> Result<Self, FormatError> {
        Self::new(dims, TensorData::F32(data))
    }

    pub fn complex(dims: Vec<usize>, data: Vec<Complex32>) -> Result<Self, FormatError> {
        Self::new(dims, TensorData::Complex64(data))
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn data(&self) -> &TensorData {
        &self.data
    }

    pub fn dtype(&self) -> DType {
        self.data.dtype()
    }

    /// Element count; a complex value counts once.
    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Number of real scalars stored: complex elements count twice.
    pub fn scalar_count(&self) -> usize {
        match self.data {
            TensorData::F32(ref v) => v.len(),
            TensorData::Complex64(ref v) => 2 * v.len(),
        }
    }

    pub fn as_f32(&self) -> Option<&[f32]> {
        match &self.data {
            TensorData::F32(v) => Some(v),
            TensorData::Complex64(_) => None,
        }
    }

    pub fn as_complex(&self) -> Option<&[Complex32]> {
        match &self.data {
            TensorData::Complex64(v) => Some(v),
            TensorData::F32(_) => None,
        }
    }
}

/// Ordered, uniquely-named tensor collection.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct WeightStore {
    tensors: Vec<(String, Tensor)>,
}

impl WeightStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends a tensor; names must be unique.
    pub fn insert(&mut self, name: impl Into<String>, tensor: Tensor) -> Result<(), FormatError> {
        let name = name.into();
        if name.len() > u16::MAX as usize {
            return Err(FormatError::Shape(format!("name of {} bytes too long", name.len())));
        }
        if self.get(&name).is_some() {
            return Err(FormatError::DuplicateName { offset: 0, name });
        }
        self.tensors.push((name, tensor));
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.tensors.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    /// Like [`WeightStore::get`], but a missing name is an error naming it.
    pub fn require(&self, name: &str) -> Result<&Tensor, FormatError> {
        self.get(name)
            .ok_or_else(|| FormatError::MissingTensor(name.to_string()))
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.tensors.iter().map(|(n, _)| n.as_str())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.tensors.iter().map(|(n, t)| (n.as_str(), t))
    }

    /// Total real scalars across all tensors.
    pub fn scalar_count(&self) -> usize {
        self.tensors.iter().map(|(_, t)| t.scalar_count()).sum()
    }
}

pub fn encode_weights(store: &WeightStore) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(FPW_MAGIC);
    out.extend_from_slice(&(store.len() as u32).to_le_bytes());
    for (name, t) in store.iter() {
        out.extend_from_slice(&(name.len() as u16).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.push(t.dtype() as u8);
        out.push(t.dims.len() as u8);
        for &d in &t.dims {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        match &t.data {
            TensorData::F32(v) => v
                .iter()
                .for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
            TensorData::Complex64(v) => v.iter().for_each(|z| {
                out.extend_from_slice(&z.re.to_le_bytes());
                out.extend_from_slice(&z.im.to_le_bytes());
            }),
        }
    }
    out
}

pub fn decode_weights(bytes: &[u8]) -> Result<WeightStore, FormatError> {
    let mut cur = Cursor::new(bytes);
    let magic = cur.take(4)?;
    if magic != FPW_MAGIC {
        return Err(FormatError::BadMagic {
            offset: 0,
            expected: "FPW1",
            found: magic_str(magic),
        });
    }
    let count = cur.u32()?;
    let mut store = WeightStore::new();
    for _ in 0..count {
        let name_at = cur.offset();
        let len = cur.u16()? as usize;
        let raw = cur.take(len)?;
        let name = std::str::from_utf8(raw)
            .map_err(|e| FormatError::Invalid {
                offset: name_at + 2,
                reason: format!("tensor name is not UTF-8: {e}"),
            })?
            .to_string();
        if store.get(&name).is_some() {
            return Err(FormatError::DuplicateName {
                offset: name_at,
                name,
            });
        }
        let dtype_at = cur.offset();
        let dtype = match cur.u8()? {
            0 => DType::F32,
            1 => DType::Complex64,
            other => {
                return Err(FormatError::Invalid {
                    offset: dtype_at,
                    reason: format!("unknown dtype {other}"),
                })
            }
        };
        let ndim = cur.u8()? as usize;
        let dims_at = cur.offset();
        let mut dims = Vec::with_capacity(ndim);
        for _ in 0..ndim {
            dims.push(cur.u32()? as usize);
        }
        let n = dims
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or(FormatError::DimOverflow { offset: dims_at })?;
        let data = match dtype {
            DType::F32 => TensorData::F32(cur.f32s(n)?),
            DType::Complex64 => {
                let pairs = n
                    .checked_mul(2)
                    .ok_or(FormatError::DimOverflow { offset: dims_at })?;
                let flat = cur.f32s(pairs)?;
                TensorData::Complex64(
                    flat.chunks_exact(2)
                        .map(|p| Complex32::new(p[0], p[1]))
                        .collect(),
                )
            }
        };
        store.tensors.push((name, Tensor { dims, data }));
    }
    cur.finish()?;
    Ok(store)
}

pub fn write_weights(store: &WeightStore, path: impl AsRef<Path>) -> Result<(), FormatError> {
    std::fs::write(path, encode_weights(store))?;
    Ok(())
}

pub fn read_weights(path: impl AsRef<Path>) -> Result<WeightStore, FormatError> {
    decode_weights(&std::fs::read(path)?)
}
