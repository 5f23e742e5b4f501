use std::f64::consts::TAU;

use num_complex::{Complex32, Complex64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{conv::Conv2d, Activation, ModelConfig, ModelError, META_NAME};
use crate::io::{Tensor, WeightStore};
use crate::matrix::Matrix;
use crate::ssm::{stability_project, zoh_input_gain, ComplexDiag};

/// Lowest and highest initial oscillation frequency (Hz).
const OSC_BAND_HZ: (f64, f64) = (0.5, 3.5);
/// Initial decay rate (1/s) of every state.
const INIT_DECAY: f64 = -0.2;

#[derive(Debug, Clone)]
pub(crate) struct Block {
    pub conv_a: Conv2d,
    pub conv_b: Conv2d,
    pub a: ComplexDiag,
    pub a_bar: Vec<Complex64>,
    /// Per-state zero-order-hold gain, `B̄_t = gain ⊙ B_t`.
    pub gain: Vec<Complex64>,
    /// `n × D`
    pub w_b: Matrix<f64>,
    /// `n × D`
    pub w_c: Matrix<f64>,
    pub d: f64,
    /// `D × D`, row = output channel.
    pub out_w: Matrix<f64>,
    pub out_b: Vec<f64>,
}

/// Loaded, validated and discretized network.
#[derive(Debug, Clone)]
pub struct Model {
    pub(crate) cfg: ModelConfig,
    pub(crate) blocks: Vec<Block>,
    pub(crate) readout_w: Vec<f64>,
    pub(crate) readout_b: f64,
}

/// Log-spaced angular frequencies across [`OSC_BAND_HZ`].
fn log_spaced_omegas(n: usize) -> Vec<f64> {
    let (lo, hi) = OSC_BAND_HZ;
    (0..n)
        .map(|k| {
            let frac = if n > 1 { k as f64 / (n - 1) as f64 } else { 0.0 };
            TAU * lo * (hi / lo).powf(frac)
        })
        .collect()
}

pub(crate) fn block_name(b: usize, part: &str) -> String {
    format!("block{b}.{part}")
}

/// Every parameter tensor name and shape a config requires, in file order.
fn expected_tensors(cfg: &ModelConfig) -> Vec<(String, Vec<usize>)> {
    let (k, d, n) = (cfg.kernel_size, cfg.d_model, cfg.n_state);
    let mut out = Vec::new();
    for b in 0..cfg.n_blocks {
        let c_in = cfg.block_in_channels(b);
        out.push((block_name(b, "conv_a.weight"), vec![k, k, c_in, d]));
        out.push((block_name(b, "conv_a.bias"), vec![d]));
        out.push((block_name(b, "conv_b.weight"), vec![k, k, d, d]));
        out.push((block_name(b, "conv_b.bias"), vec![d]));
        out.push((block_name(b, "ssd.a"), vec![n]));
        out.push((block_name(b, "ssd.w_b"), vec![n, d]));
        out.push((block_name(b, "ssd.w_c"), vec![n, d]));
        out.push((block_name(b, "ssd.d"), vec![1]));
        out.push((block_name(b, "out_proj.weight"), vec![d, d]));
        out.push((block_name(b, "out_proj.bias"), vec![d]));
    }
    out.push(("readout.weight".into(), vec![d]));
    out.push(("readout.bias".into(), vec![1]));
    out
}

/// Closed-form count of real trainable scalars; complex eigenvalues count twice.
pub fn param_count(cfg: &ModelConfig) -> usize {
    let (k, d, n) = (cfg.kernel_size, cfg.d_model, cfg.n_state);
    let per_block = |c_in: usize| {
        (k * k * c_in * d + d) + (k * k * d * d + d) + 2 * n + 2 * n * d + 1 + (d * d + d)
    };
    let blocks: usize = (0..cfg.n_blocks)
        .map(|b| per_block(cfg.block_in_channels(b)))
        .sum();
    blocks + d + 1
}

/// Real scalars stored in a weight file, excluding `meta.*` tensors.
pub fn store_param_count(store: &WeightStore) -> usize {
    store
        .iter()
        .filter(|(name, _)| !name.starts_with("meta."))
        .map(|(_, t)| t.scalar_count())
        .sum()
}

/// Mutable parameter set in file layout, used to build stores.
struct Builder {
    cfg: ModelConfig,
    f32s: Vec<(String, Vec<usize>, Vec<f32>)>,
    eig: Vec<Vec<Complex32>>,
}

impl Builder {
    fn zeros(cfg: &ModelConfig) -> Self {
        let mut f32s = Vec::new();
        for (name, dims) in expected_tensors(cfg) {
            if !name.ends_with("ssd.a") {
                let len = dims.iter().product();
                f32s.push((name, dims, vec![0.0; len]));
            }
        }
        Self {
            cfg: cfg.clone(),
            f32s,
            eig: vec![vec![Complex32::new(0.0, 0.0); cfg.n_state]; cfg.n_blocks],
        }
    }

    fn get(&mut self, name: &str) -> &mut Vec<f32> {
        &mut self
            .f32s
            .iter_mut()
            .find(|(n, _, _)| n == name)
            .unwrap_or_else(|| panic!("no tensor {name}"))
            .2
    }

    fn into_store(self) -> WeightStore {
        let mut store = WeightStore::new();
        store
            .insert(META_NAME, Tensor::f32(vec![super::META_LEN], self.cfg.to_meta()).unwrap())
            .unwrap();
        let mut f32s = self.f32s.into_iter();
        for (name, dims) in expected_tensors(&self.cfg) {
            let tensor = if let Some(b) = name
                .strip_prefix("block")
                .and_then(|r| r.strip_suffix(".ssd.a"))
            {
                let b: usize = b.parse().expect("block index");
                Tensor::complex(dims, self.eig[b].clone())
            } else {
                let (n2, d2, data) = f32s.next().expect("tensor order");
                debug_assert_eq!((n2.as_str(), &d2), (name.as_str(), &dims));
                Tensor::f32(dims, data)
            };
            store.insert(name, tensor.expect("builder shapes")).unwrap();
        }
        store
    }
}

/// Seeded random initialization.
///
/// Eigenvalues start at `-0.2 + i ω_k` with `ω_k` log-spaced over
/// `2π·[0.5, 3.5]` rad/s (`ω_k = 0` when `oscillator` is off). Convolution
/// and projection weights are uniform in `±1/√fan_in`; biases start at zero
/// and the skip weight `d` at one.
pub fn init_weights(cfg: &ModelConfig, seed: u64) -> Result<WeightStore, ModelError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut p = Builder::zeros(cfg);
    let omegas = log_spaced_omegas(cfg.n_state);
    let (k, d) = (cfg.kernel_size, cfg.d_model);
    for b in 0..cfg.n_blocks {
        let c_in = cfg.block_in_channels(b);
        let mut fill = |name: String, fan_in: usize, p: &mut Builder| {
            let lim = 1.0 / (fan_in as f32).sqrt();
            p.get(&name)
                .iter_mut()
                .for_each(|v| *v = rng.random_range(-lim..lim));
        };
        fill(block_name(b, "conv_a.weight"), k * k * c_in, &mut p);
        fill(block_name(b, "conv_b.weight"), k * k * d, &mut p);
        fill(block_name(b, "ssd.w_b"), d, &mut p);
        fill(block_name(b, "ssd.w_c"), d, &mut p);
        fill(block_name(b, "out_proj.weight"), d, &mut p);
        p.get(&block_name(b, "ssd.d"))[0] = 1.0;
        p.eig[b] = omegas
            .iter()
            .map(|&w| Complex32::new(INIT_DECAY as f32, if cfg.oscillator { w as f32 } else { 0.0 }))
            .collect();
    }
    let lim = 1.0 / (d as f32).sqrt();
    p.get("readout.weight")
        .iter_mut()
        .for_each(|v| *v = rng.random_range(-lim..lim));
    Ok(p.into_store())
}

/// Hand-built weights that turn the network into a band-pass filterbank.
///
/// Block 0 averages all colour channels with a `k × k` box filter into
/// feature 0 and emits a constant 1 in feature 1 (via a bias). Its SSD uses
/// the constant feature to make `B_t ≡ 1` and `C_t[k] ≡ σ_k`, so feature 0 is
/// filtered by a bank of resonators at log-spaced frequencies across the
/// cardiac band, each with decay `σ_k` equal to half the gap to its
/// neighbour (unit peak gain per resonator). Later blocks pass their input
/// through unchanged and the readout selects feature 0. The activation is
/// forced to identity so the spatial path stays linear.
///
/// With `oscillator` off the same decays are kept and all frequencies are
/// zero, leaving a bank of first-order low-pass filters.
pub fn oracle_filterbank(cfg: &ModelConfig) -> Result<WeightStore, ModelError> {
    let cfg = ModelConfig {
        activation: Activation::Identity,
        ..cfg.clone()
    };
    cfg.validate()?;
    if cfg.d_model < 2 {
        return Err(ModelError::Config(
            "the filterbank needs d_model >= 2".into(),
        ));
    }
    let (k, d, n, c) = (cfg.kernel_size, cfg.d_model, cfg.n_state, cfg.in_channels);
    let centre = k / 2;
    let mut p = Builder::zeros(&cfg);
    let omegas = log_spaced_omegas(n);
    let sigmas: Vec<f64> = (0..n)
        .map(|i| {
            let gap = match (i.checked_sub(1), omegas.get(i + 1)) {
                (_, Some(&next)) if n > 1 => next - omegas[i],
                (Some(prev), _) => omegas[i] - omegas[prev],
                _ => TAU * 0.5,
            };
            0.5 * gap
        })
        .collect();
    let w_idx = |ky: usize, kx: usize, ci: usize, co: usize, c_in: usize| {
        ((ky * k + kx) * c_in + ci) * d + co
    };

    let box_w = 1.0 / (c * k * k) as f32;
    let wa = p.get("block0.conv_a.weight");
    for ky in 0..k {
        for kx in 0..k {
            for ci in 0..c {
                wa[w_idx(ky, kx, ci, 0, c)] = box_w;
            }
        }
    }
    p.get("block0.conv_a.bias")[1] = 1.0;
    let wb = p.get("block0.conv_b.weight");
    for ch in 0..2 {
        wb[w_idx(centre, centre, ch, ch, d)] = 1.0;
    }
    let w_b = p.get("block0.ssd.w_b");
    for i in 0..n {
        w_b[i * d + 1] = 1.0;
    }
    let w_c = p.get("block0.ssd.w_c");
    for (i, s) in sigmas.iter().enumerate() {
        w_c[i * d + 1] = *s as f32;
    }

    for b in 0..cfg.n_blocks {
        let out = p.get(&block_name(b, "out_proj.weight"));
        for ch in 0..d {
            out[ch * d + ch] = 1.0;
        }
        if b > 0 {
            p.get(&block_name(b, "ssd.d"))[0] = 1.0;
        }
        p.eig[b] = omegas
            .iter()
            .zip(&sigmas)
            .map(|(&w, &s)| Complex32::new(-s as f32, if cfg.oscillator { w as f32 } else { 0.0 }))
            .collect();
    }
    p.get("readout.weight")[0] = 1.0;
    Ok(p.into_store())
}

fn f32_tensor<'s>(
    store: &'s WeightStore,
    name: &str,
    dims: &[usize],
) -> Result<&'s [f32], ModelError> {
    let t = store.require(name)?;
    if t.dims() != dims {
        return Err(ModelError::WeightShape {
            name: name.into(),
            expected: dims.to_vec(),
            found: t.dims().to_vec(),
        });
    }
    let data = t.as_f32().ok_or_else(|| ModelError::WeightType { name: name.into() })?;
    if data.iter().any(|v| !v.is_finite()) {
        return Err(ModelError::NonFiniteWeight { name: name.into() });
    }
    Ok(data)
}

fn to_matrix(rows: usize, cols: usize, data: &[f32]) -> Matrix<f64> {
    Matrix::from_fn(rows, cols, |r, c| data[r * cols + c] as f64)
}

impl Model {
    /// Builds a model from a weight store whose tensors must match `cfg`.
    ///
    /// Eigenvalues are stability-projected and, when `cfg.oscillator` is
    /// false, stripped of their imaginary parts before discretizing with step
    /// `1 / cfg.fps`. Tensors the config does not use are ignored with a
    /// warning.
    pub fn new(cfg: ModelConfig, store: &WeightStore) -> Result<Self, ModelError> {
        cfg.validate()?;
        let expected = expected_tensors(&cfg);
        for name in store.names() {
            if name != META_NAME && !expected.iter().any(|(e, _)| e == name) {
                log::warn!("ignoring unknown tensor {name:?} in weight store");
            }
        }
        let (k, d, n) = (cfg.kernel_size, cfg.d_model, cfg.n_state);
        let dt = cfg.dt();
        let mut blocks = Vec::with_capacity(cfg.n_blocks);
        for b in 0..cfg.n_blocks {
            let c_in = cfg.block_in_channels(b);
            let conv = |part: &str, c_in: usize, stride: usize| -> Result<Conv2d, ModelError> {
                Ok(Conv2d {
                    k,
                    stride,
                    c_in,
                    c_out: d,
                    weight: f32_tensor(store, &block_name(b, &format!("{part}.weight")), &[k, k, c_in, d])?
                        .to_vec(),
                    bias: f32_tensor(store, &block_name(b, &format!("{part}.bias")), &[d])?.to_vec(),
                })
            };
            let conv_a = conv("conv_a", c_in, cfg.conv_stride)?;
            let conv_b = conv("conv_b", d, 1)?;

            let a_name = block_name(b, "ssd.a");
            let at = store.require(&a_name)?;
            if at.dims() != [n] {
                return Err(ModelError::WeightShape {
                    name: a_name,
                    expected: vec![n],
                    found: at.dims().to_vec(),
                });
            }
            let eig = at
                .as_complex()
                .ok_or_else(|| ModelError::WeightType { name: a_name.clone() })?;
            if eig.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                return Err(ModelError::NonFiniteWeight { name: a_name });
            }
            let raw = ComplexDiag::new_unchecked(
                eig.iter().map(|z| z.re as f64).collect(),
                eig.iter().map(|z| z.im as f64).collect(),
            );
            let mut a = stability_project(&raw);
            if !cfg.oscillator {
                a = a.without_oscillation();
            }
            let a_bar = a.eigenvalues().map(|l| (l * dt).exp()).collect();
            let gain = a.eigenvalues().map(|l| zoh_input_gain(l, dt)).collect();

            blocks.push(Block {
                conv_a,
                conv_b,
                a,
                a_bar,
                gain,
                w_b: to_matrix(n, d, f32_tensor(store, &block_name(b, "ssd.w_b"), &[n, d])?),
                w_c: to_matrix(n, d, f32_tensor(store, &block_name(b, "ssd.w_c"), &[n, d])?),
                d: f32_tensor(store, &block_name(b, "ssd.d"), &[1])?[0] as f64,
                out_w: to_matrix(d, d, f32_tensor(store, &block_name(b, "out_proj.weight"), &[d, d])?),
                out_b: f32_tensor(store, &block_name(b, "out_proj.bias"), &[d])?
                    .iter()
                    .map(|&v| v as f64)
                    .collect(),
            });
        }
        Ok(Self {
            blocks,
            readout_w: f32_tensor(store, "readout.weight", &[d])?
                .iter()
                .map(|&v| v as f64)
                .collect(),
            readout_b: f32_tensor(store, "readout.bias", &[1])?[0] as f64,
            cfg,
        })
    }

    /// Reads the shape from the store's `meta.config` tensor, with default
    /// runtime settings.
    pub fn from_store(store: &WeightStore) -> Result<Self, ModelError> {
        Self::new(ModelConfig::from_store(store)?, store)
    }

    pub fn config(&self) -> &ModelConfig {
        &self.cfg
    }

    /// Continuous eigenvalues of block `b` as used (after projection).
    pub fn eigenvalues(&self, b: usize) -> &ComplexDiag {
        &self.blocks[b].a
    }

    /// Discrete transition `ā = e^{λ Δt}` of block `b`.
    pub fn a_bar(&self, b: usize) -> &[Complex64] {
        &self.blocks[b].a_bar
    }

    pub fn param_count(&self) -> usize {
        param_count(&self.cfg)
    }

    /// Largest `|ā|` over all blocks.
    pub fn spectral_radius(&self) -> f64 {
        self.blocks
            .iter()
            .flat_map(|b| b.a_bar.iter().map(|z| z.norm()))
            .fold(0.0, f64::max)
    }
}
