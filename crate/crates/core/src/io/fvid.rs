//! FVID: a fixed 26-byte header followed by raw `f32` frames.
//!
//! ```text
//! offset  size  field
//!      0     4  magic "FVID"
//!      4     2  version (u16) = 1
//!      6     4  T frames (u32)
//!     10     4  H rows (u32)
//!     14     4  W columns (u32)
//!     18     4  C channels (u32)
//!     22     4  fps (f32)
//!     26   4·N  payload, N = T·H·W·C f32 values, row-major, channel-last
//! ```

use std::io::{Read, Write};
use std::path::Path;

use super::{magic_str, Cursor, FormatError};

pub const FVID_MAGIC: &[u8; 4] = b"FVID";
pub const FVID_VERSION: u16 = 1;
pub const FVID_HEADER_LEN: usize = 26;
/// Largest single frame the streaming reader will buffer.
pub const MAX_STREAM_FRAME_BYTES: usize = 1 << 30;

/// Video as `T × H × W × C` 32-bit samples, row-major and channel-last.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameTensor {
    t: usize,
    h: usize,
    w: usize,
    c: usize,
    fps: f32,
    data: Vec<f32>,
}

impl FrameTensor {
    /// Checks that every dimension is non-zero, the payload length matches,
    /// `fps` is positive, and every sample is finite.
    pub fn new(
        t: usize,
        h: usize,
        w: usize,
        c: usize,
        fps: f32,
        data: Vec<f32>,
    ) -> Result<Self, FormatError> {
        if t == 0 || h == 0 || w == 0 || c == 0 {
            return Err(FormatError::Shape(format!(
                "all dimensions must be positive, got {t}×{h}×{w}×{c}"
            )));
        }
        let expected = t
            .checked_mul(h)
            .and_then(|v| v.checked_mul(w))
            .and_then(|v| v.checked_mul(c))
            .ok_or_else(|| FormatError::Shape("dimensions overflow".into()))?;
        if data.len() != expected {
            return Err(FormatError::Shape(format!(
                "payload holds {} values, dimensions need {expected}",
                data.len()
            )));
        }
        if !(fps > 0.0 && fps.is_finite()) {
            return Err(FormatError::Shape(format!("fps must be positive, got {fps}")));
        }
        if let Some(index) = data.iter().position(|v| !v.is_finite()) {
            return Err(FormatError::NonFinite { index });
        }
        Ok(Self {
            t,
            h,
            w,
            c,
            fps,
            data,
        })
    }

    pub fn frames(&self) -> usize {
        self.t
    }
    pub fn height(&self) -> usize {
        self.h
    }
    pub fn width(&self) -> usize {
        self.w
    }
    pub fn channels(&self) -> usize {
        self.c
    }
    pub fn fps(&self) -> f32 {
        self.fps
    }
    /// Values per frame, `H·W·C`.
    pub fn frame_len(&self) -> usize {
        self.h * self.w * self.c
    }
    pub fn frame(&self, t: usize) -> &[f32] {
        let n = self.frame_len();
        &self.data[t * n..(t + 1) * n]
    }
    pub fn data(&self) -> &[f32] {
        &self.data
    }

    /// The series of one pixel/channel coordinate over time.
    pub fn pixel_series(&self, y: usize, x: usize, ch: usize) -> Vec<f64> {
        let n = self.frame_len();
        let off = (y * self.w + x) * self.c + ch;
        (0..self.t).map(|t| self.data[t * n + off] as f64).collect()
    }

    pub fn header(&self) -> FvidHeader {
        FvidHeader {
            t: self.t as u32,
            h: self.h as u32,
            w: self.w as u32,
            c: self.c as u32,
            fps: self.fps,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FvidHeader {
    pub t: u32,
    pub h: u32,
    pub w: u32,
    pub c: u32,
    pub fps: f32,
}

impl FvidHeader {
    pub fn to_bytes(&self) -> [u8; FVID_HEADER_LEN] {
        let mut out = [0u8; FVID_HEADER_LEN];
        out[0..4].copy_from_slice(FVID_MAGIC);
        out[4..6].copy_from_slice(&FVID_VERSION.to_le_bytes());
        out[6..10].copy_from_slice(&self.t.to_le_bytes());
        out[10..14].copy_from_slice(&self.h.to_le_bytes());
        out[14..18].copy_from_slice(&self.w.to_le_bytes());
        out[18..22].copy_from_slice(&self.c.to_le_bytes());
        out[22..26].copy_from_slice(&self.fps.to_le_bytes());
        out
    }

    fn parse(cur: &mut Cursor<'_>) -> Result<Self, FormatError> {
        let magic = cur.take(4)?;
        if magic != FVID_MAGIC {
            return Err(FormatError::BadMagic {
                offset: 0,
                expected: "FVID",
                found: magic_str(magic),
            });
        }
        let version = cur.u16()?;
        if version != FVID_VERSION {
            return Err(FormatError::UnsupportedVersion { offset: 4, version });
        }
        let (t, h, w, c) = (cur.u32()?, cur.u32()?, cur.u32()?, cur.u32()?);
        for (i, d) in [t, h, w, c].into_iter().enumerate() {
            if d == 0 {
                return Err(FormatError::ZeroDim {
                    offset: 6 + 4 * i as u64,
                });
            }
        }
        let fps = cur.f32()?;
        if !(fps > 0.0 && fps.is_finite()) {
            return Err(FormatError::Invalid {
                offset: 22,
                reason: format!("fps must be positive, got {fps}"),
            });
        }
        Ok(Self { t, h, w, c, fps })
    }

    /// Values per frame, or `None` if it does not fit in memory-addressable size.
    pub fn frame_len(&self) -> Option<usize> {
        (self.h as usize)
            .checked_mul(self.w as usize)?
            .checked_mul(self.c as usize)
    }

    /// Payload length in bytes, `T·H·W·C·4`.
    pub fn payload_bytes(&self) -> Option<usize> {
        self.frame_len()?
            .checked_mul(self.t as usize)?
            .checked_mul(4)
    }
}

/// Serializes a tensor to FVID bytes.
pub fn encode_fvid(tensor: &FrameTensor) -> Vec<u8> {
    let mut out = Vec::with_capacity(FVID_HEADER_LEN + tensor.data.len() * 4);
    out.extend_from_slice(&tensor.header().to_bytes());
    for v in &tensor.data {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

/// Parses a complete FVID buffer.
pub fn decode_fvid(bytes: &[u8]) -> Result<FrameTensor, FormatError> {
    let mut cur = Cursor::new(bytes);
    let header = FvidHeader::parse(&mut cur)?;
    let count = header
        .payload_bytes()
        .ok_or(FormatError::DimOverflow { offset: 6 })?
        / 4;
    let data = cur.f32s(count)?;
    cur.finish()?;
    if let Some(index) = data.iter().position(|v| !v.is_finite()) {
        return Err(FormatError::NonFinite { index });
    }
    FrameTensor::new(
        header.t as usize,
        header.h as usize,
        header.w as usize,
        header.c as usize,
        header.fps,
        data,
    )
}

pub fn write_fvid(tensor: &FrameTensor, path: impl AsRef<Path>) -> Result<(), FormatError> {
    std::fs::write(path, encode_fvid(tensor))?;
    Ok(())
}

pub fn read_fvid(path: impl AsRef<Path>) -> Result<FrameTensor, FormatError> {
    decode_fvid(&std::fs::read(path)?)
}

/// Incremental FVID reader: parses the header up front, then yields one
/// frame at a time without buffering the rest of the stream.
pub struct FvidStreamReader<R> {
    inner: R,
    header: FvidHeader,
    frame_len: usize,
    frames_read: u64,
    bytes: Vec<u8>,
}

impl<R: Read> FvidStreamReader<R> {
    pub fn new(mut inner: R) -> Result<Self, FormatError> {
        let mut head = [0u8; FVID_HEADER_LEN];
        let got = read_full(&mut inner, &mut head)?;
        let mut cur = Cursor::new(&head[..got]);
        let header = FvidHeader::parse(&mut cur)?;
        header
            .payload_bytes()
            .ok_or(FormatError::DimOverflow { offset: 6 })?;
        let frame_len = header.frame_len().expect("checked above");
        if frame_len * 4 > MAX_STREAM_FRAME_BYTES {
            return Err(FormatError::Invalid {
                offset: 10,
                reason: format!("frame of {frame_len} values exceeds the streaming limit"),
            });
        }
        Ok(Self {
            inner,
            header,
            frame_len,
            frames_read: 0,
            bytes: vec![0u8; frame_len * 4],
        })
    }

    pub fn header(&self) -> &FvidHeader {
        &self.header
    }

    pub fn frame_len(&self) -> usize {
        self.frame_len
    }

    pub fn frames_read(&self) -> u64 {
        self.frames_read
    }

    /// Reads the next frame into `out` (length `H·W·C`).
    ///
    /// Returns `Ok(false)` once all `T` frames are consumed, or when the
    /// input ends cleanly on a frame boundary. A partial frame is an error.
    pub fn next_frame(&mut self, out: &mut [f32]) -> Result<bool, FormatError> {
        assert_eq!(out.len(), self.frame_len, "frame buffer length");
        if self.frames_read >= self.header.t as u64 {
            return Ok(false);
        }
        let offset = FVID_HEADER_LEN as u64 + self.frames_read * self.bytes.len() as u64;
        let got = read_full(&mut self.inner, &mut self.bytes)?;
        if got == 0 {
            return Ok(false);
        }
        if got < self.bytes.len() {
            return Err(FormatError::Truncated {
                offset: offset + got as u64,
                needed: (self.bytes.len() - got) as u64,
                available: 0,
            });
        }
        for (dst, c) in out.iter_mut().zip(self.bytes.chunks_exact(4)) {
            *dst = f32::from_le_bytes(c.try_into().expect("4 bytes"));
        }
        self.frames_read += 1;
        Ok(true)
    }
}

/// Streams a header and frames to `w`, flushing after each frame.
pub fn write_fvid_stream<W: Write>(tensor: &FrameTensor, mut w: W) -> std::io::Result<()> {
    w.write_all(&tensor.header().to_bytes())?;
    for t in 0..tensor.frames() {
        let mut buf = Vec::with_capacity(tensor.frame_len() * 4);
        for v in tensor.frame(t) {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&buf)?;
        w.flush()?;
    }
    Ok(())
}

fn read_full<R: Read>(r: &mut R, buf: &mut [u8]) -> Result<usize, FormatError> {
    let mut got = 0;
    while got < buf.len() {
        match r.read(&mut buf[got..]) {
            Ok(0) => break,
            Ok(n) => got += n,
            Err(e) if e.kind() == std::io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e.into()),
        }
    }
    Ok(got)
}
