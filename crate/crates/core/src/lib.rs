//! Streaming state-space inference for camera-based pulse extraction.
//!
//! The crate is organized bottom-up:
//!
//! - [`ssm`]: complex-diagonal state-space systems, zero-order-hold
//!   discretization, the recurrent scan and its masked-attention dual form.
//! - [`temporal_norm`]: per-pixel detrending and standardization, in batch
//!   (least-squares trend) and streaming (recursive moving average) variants.
//! - [`model`]: the network that turns video into a pulse waveform, with a
//!   whole-sequence forward pass and a constant-memory per-frame session.
//! - [`signal`]: power spectra, heart-rate estimation and evaluation metrics.
//! - [`synth`]: synthetic skin video with a known embedded pulse.
//! - [`io`]: the FVID video, FPW1 weight and signal CSV file formats.
//!
//! The guide in `book/` walks through each piece with runnable listings.

pub mod io;
pub mod matrix;
pub mod model;
pub mod signal;
pub mod ssm;
pub mod synth;
pub mod temporal_norm;

pub use matrix::{Matrix, Sample};
