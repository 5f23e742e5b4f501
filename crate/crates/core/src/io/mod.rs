//! File formats: FVID raw video, FPW1 weight container, and signal CSV.
//!
//! Both binary formats are little-endian throughout. Every decoding failure is
//! a [`FormatError`] carrying the byte offset where parsing stopped; decoders
//! never panic on malformed input and never return partially-filled values.

mod csv;
mod fpw;
mod fvid;

pub use self::csv::{format_signal_csv, parse_signal_csv, read_signal_csv, write_signal_csv};
pub use self::fpw::{
    decode_weights, encode_weights, read_weights, write_weights, DType, Tensor, TensorData,
    WeightStore, FPW_MAGIC,
};
pub use self::fvid::{
    decode_fvid, encode_fvid, read_fvid, write_fvid, write_fvid_stream, FrameTensor, FvidHeader,
    FvidStreamReader, FVID_HEADER_LEN, FVID_MAGIC, FVID_VERSION, MAX_STREAM_FRAME_BYTES,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad magic at offset {offset}: expected {expected:?}, found {found:?}")]
    BadMagic {
        offset: u64,
        expected: &'static str,
        found: String,
    },
    #[error("unsupported version {version} at offset {offset}")]
    UnsupportedVersion { offset: u64, version: u16 },
    #[error("truncated input at offset {offset}: needed {needed} more bytes, {available} available")]
    Truncated {
        offset: u64,
        needed: u64,
        available: u64,
    },
    #[error("dimensions at offset {offset} overflow the addressable size")]
    DimOverflow { offset: u64 },
    #[error("zero-sized dimension at offset {offset}")]
    ZeroDim { offset: u64 },
    #[error("{count} trailing bytes after offset {offset}")]
    TrailingBytes { offset: u64, count: u64 },
    #[error("invalid field at offset {offset}: {reason}")]
    Invalid { offset: u64, reason: String },
    #[error("duplicate tensor name {name:?} at offset {offset}")]
    DuplicateName { offset: u64, name: String },
    #[error("required tensor {0:?} missing from weight store")]
    MissingTensor(String),
    #[error("non-finite value at element {index}")]
    NonFinite { index: usize },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("csv line {line}: {reason}")]
    Csv { line: usize, reason: String },
}

/// Bounds-checked little-endian cursor over a byte slice.
pub(crate) struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    pub(crate) fn new(buf: &'a [u8]) -> Self {
        Self { buf, pos: 0 }
    }

    pub(crate) fn offset(&self) -> u64 {
        self.pos as u64
    }

    pub(crate) fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }

    pub(crate) fn take(&mut self, n: usize) -> Result<&'a [u8], FormatError> {
        if self.remaining() < n {
            return Err(FormatError::Truncated {
                offset: self.offset(),
                needed: n as u64,
                available: self.remaining() as u64,
            });
        }
        let out = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    pub(crate) fn u8(&mut self) -> Result<u8, FormatError> {
        Ok(self.take(1)?[0])
    }

    pub(crate) fn u16(&mut self) -> Result<u16, FormatError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().expect("2 bytes")))
    }

    pub(crate) fn u32(&mut self) -> Result<u32, FormatError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    pub(crate) fn f32(&mut self) -> Result<f32, FormatError> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    /// Reads `count` little-endian f32 values after checking the whole run is present.
    pub(crate) fn f32s(&mut self, count: usize) -> Result<Vec<f32>, FormatError> {
        let bytes = count.checked_mul(4).ok_or(FormatError::DimOverflow {
            offset: self.offset(),
        })?;
        let raw = self.take(bytes)?;
        Ok(raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
            .collect())
    }

    pub(crate) fn finish(&self) -> Result<(), FormatError> {
        if self.remaining() != 0 {
            return Err(FormatError::TrailingBytes {
                offset: self.offset(),
                count: self.remaining() as u64,
            });
        }
        Ok(())
    }
}

pub(crate) fn magic_str(bytes: &[u8]) -> String {
    String::from_utf8_lossy(bytes).into_owned()
}
