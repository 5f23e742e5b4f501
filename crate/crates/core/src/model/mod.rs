//! The pulse-extraction network.
//!
//! Each frame is detrended and standardized per pixel, then passed through a
//! chain of blocks. Block `b` has a spatial half and a temporal half:
//!
//! ```text
//! map_{b+1} = act(conv_b(act(conv_a(map_b))))          stride s, then 1
//! f_b       = mean over pixels of map_{b+1}            D features
//! u_b       = f_b + z_{b-1}                            (z_{-1} = 0)
//! B_t = W_B u_b,  C_t = W_C u_b                        selective, n each
//! h_d ← ā ⊙ h_d + (g ⊙ B_t) u_b[d]                     per channel d
//! y_d = Re(C_t · h_d) + d · u_b[d]
//! z_b = W_o y + b_o
//! ```
//!
//! and the pulse sample is `w_r · z_last + b_r`. All `D` channels share the
//! per-step `B̄_t`, `C_t`, which is what lets the whole-sequence path run as
//! one masked score matrix per block ([`crate::ssm::shared_dual_chunked`]).
//!
//! Spatial features never depend on temporal state, so the batch path
//! computes every frame's features independently (in parallel) and then runs
//! the temporal blocks; the streaming path interleaves the two per frame.

mod conv;
mod forward;
mod stream;
mod weights;

pub use conv::{conv_out_len, Conv2d};
pub use forward::Features;
pub use stream::{StreamOutput, StreamSession};
pub use weights::{init_weights, oracle_filterbank, param_count, store_param_count, Model};

use thiserror::Error;

use crate::io::FormatError;
use crate::signal::SignalError;
use crate::ssm::SsmError;
use crate::temporal_norm::TnError;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error("tensor {name:?} has shape {found:?}, expected {expected:?}")]
    WeightShape {
        name: String,
        expected: Vec<usize>,
        found: Vec<usize>,
    },
    #[error("tensor {name:?} has the wrong dtype")]
    WeightType { name: String },
    #[error("tensor {name:?} contains non-finite values")]
    NonFiniteWeight { name: String },
    #[error("input shape mismatch: {0}")]
    Shape(String),
    #[error("non-finite input value at element {index}")]
    NonFiniteInput { index: usize },
    #[error("sequence needs at least 2 frames, got {0}")]
    TooShort(usize),
    #[error(transparent)]
    Ssm(#[from] SsmError),
    #[error(transparent)]
    Tn(#[from] TnError),
    #[error(transparent)]
    Signal(#[from] SignalError),
}

/// Pointwise nonlinearity after every convolution. Both choices are odd and
/// map zero to zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Tanh,
    Identity,
}

impl Activation {
    pub fn code(self) -> u32 {
        match self {
            Activation::Tanh => 0,
            Activation::Identity => 1,
        }
    }

    pub fn from_code(code: u32) -> Option<Self> {
        match code {
            0 => Some(Activation::Tanh),
            1 => Some(Activation::Identity),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Tanh => "tanh",
            Activation::Identity => "identity",
        }
    }

    #[inline]
    pub fn apply(self, xs: &mut [f32]) {
        if self == Activation::Tanh {
            xs.iter_mut().for_each(|x| *x = x.tanh());
        }
    }
}

impl std::str::FromStr for Activation {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "tanh" => Ok(Activation::Tanh),
            "identity" => Ok(Activation::Identity),
            other => Err(format!("unknown activation {other:?} (expected tanh or identity)")),
        }
    }
}

/// Network shape plus the runtime settings used to discretize and normalize.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub input_h: usize,
    pub input_w: usize,
    pub in_channels: usize,
    /// Feature width `D`.
    pub d_model: usize,
    /// State size per channel.
    pub n_state: usize,
    pub n_blocks: usize,
    /// Odd convolution kernel side.
    pub kernel_size: usize,
    /// Stride of the first convolution in each block.
    pub conv_stride: usize,
    pub activation: Activation,
    /// Frame rate; the SSM step is `1 / fps` seconds.
    pub fps: f64,
    /// Complex eigenvalues when true; purely real decay when false.
    pub oscillator: bool,
    pub alpha_tn: f64,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            input_h: 32,
            input_w: 32,
            in_channels: 3,
            d_model: 64,
            n_state: 16,
            n_blocks: 3,
            kernel_size: 5,
            conv_stride: 2,
            activation: Activation::Tanh,
            fps: 30.0,
            oscillator: true,
            alpha_tn: crate::temporal_norm::DEFAULT_ALPHA,
            seed: 0,
        }
    }
}

/// Number of values in the `meta.config` tensor.
pub(crate) const META_LEN: usize = 10;
pub(crate) const META_NAME: &str = "meta.config";

impl ModelConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        let dims = [
            ("input_h", self.input_h),
            ("input_w", self.input_w),
            ("in_channels", self.in_channels),
            ("d_model", self.d_model),
            ("n_state", self.n_state),
            ("n_blocks", self.n_blocks),
            ("kernel_size", self.kernel_size),
            ("conv_stride", self.conv_stride),
        ];
        for (name, v) in dims {
            if v == 0 {
                return Err(ModelError::Config(format!("{name} must be at least 1")));
            }
        }
        if self.kernel_size % 2 == 0 {
            return Err(ModelError::Config(format!(
                "kernel_size must be odd, got {}",
                self.kernel_size
            )));
        }
        if !(self.fps > 0.0 && self.fps.is_finite()) {
            return Err(ModelError::Config(format!("fps must be positive, got {}", self.fps)));
        }
        if !(self.alpha_tn > 0.0 && self.alpha_tn < 1.0) {
            return Err(ModelError::Config(format!(
                "alpha_tn must lie in (0, 1), got {}",
                self.alpha_tn
            )));
        }
        Ok(())
    }

    /// Spatial size of the map entering block `b` (block 0 sees the frame).
    pub fn map_size(&self, b: usize) -> (usize, usize) {
        let (mut h, mut w) = (self.input_h, self.input_w);
        for _ in 0..b {
            h = conv_out_len(h, self.conv_stride);
            w = conv_out_len(w, self.conv_stride);
        }
        (h, w)
    }

    pub fn block_in_channels(&self, b: usize) -> usize {
        if b == 0 {
            self.in_channels
        } else {
            self.d_model
        }
    }

    pub fn frame_len(&self) -> usize {
        self.input_h * self.input_w * self.in_channels
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.fps
    }

    /// Approximate real multiply-accumulates per streamed frame.
    pub fn macs_per_frame(&self) -> usize {
        let (k, d, n) = (self.kernel_size, self.d_model, self.n_state);
        let mut total = 0;
        for b in 0..self.n_blocks {
            let (h, w) = self.map_size(b);
            let (oh, ow) = (conv_out_len(h, self.conv_stride), conv_out_len(w, self.conv_stride));
            total += oh * ow * k * k * self.block_in_channels(b) * d;
            total += oh * ow * k * k * d * d;
            // selective projections, complex recurrence and readout, skip, output mix
            total += 2 * n * d + 8 * n * d + d + d * d;
        }
        total + d
    }

    /// Structural fields serialized into the weight file.
    pub(crate) fn to_meta(&self) -> Vec<f32> {
        vec![
            self.input_h as f32,
            self.input_w as f32,
            self.in_channels as f32,
            self.d_model as f32,
            self.n_state as f32,
            self.n_blocks as f32,
            self.kernel_size as f32,
            self.conv_stride as f32,
            self.activation.code() as f32,
            if self.oscillator { 1.0 } else { 0.0 },
        ]
    }

    /// Reads the structural fields stored with a set of weights; runtime
    /// fields (`fps`, `alpha_tn`, `seed`) take their defaults.
    pub fn from_store(store: &crate::io::WeightStore) -> Result<Self, ModelError> {
        let t = store.require(META_NAME)?;
        let meta = t.as_f32().ok_or_else(|| ModelError::WeightType {
            name: META_NAME.into(),
        })?;
        if meta.len() != META_LEN {
            return Err(ModelError::WeightShape {
                name: META_NAME.into(),
                expected: vec![META_LEN],
                found: t.dims().to_vec(),
            });
        }
        let as_dim = |i: usize| -> Result<usize, ModelError> {
            let v = meta[i];
            if v >= 0.0 && v.fract() == 0.0 && v < 1e7 {
                Ok(v as usize)
            } else {
                Err(ModelError::Config(format!("{META_NAME}[{i}] = {v} is not a dimension")))
            }
        };
        let activation = Activation::from_code(as_dim(8)? as u32)
            .ok_or_else(|| ModelError::Config(format!("unknown activation code {}", meta[8])))?;
        let cfg = Self {
            input_h: as_dim(0)?,
            input_w: as_dim(1)?,
            in_channels: as_dim(2)?,
            d_model: as_dim(3)?,
            n_state: as_dim(4)?,
            n_blocks: as_dim(5)?,
            kernel_size: as_dim(6)?,
            conv_stride: as_dim(7)?,
            activation,
            oscillator: meta[9] != 0.0,
            ..Self::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn map_sizes_follow_strides() {
        let cfg = ModelConfig::default();
        assert_eq!(cfg.map_size(0), (32, 32));
        assert_eq!(cfg.map_size(1), (16, 16));
        assert_eq!(cfg.map_size(3), (4, 4));
    }

    #[test]
    fn validation() {
        assert!(ModelConfig::default().validate().is_ok());
        let bad = ModelConfig {
            kernel_size: 4,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = ModelConfig {
            d_model: 0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = ModelConfig {
            alpha_tn: 1.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }
}
