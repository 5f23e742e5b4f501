//! Synthetic skin video with a known embedded pulse.
//!
//! A fixed subset of pixels ("skin") carries
//! `pulse_amp · (sin θ + 0.3 sin 2θ)` with `θ = 2π f t + φ` shared by every
//! skin pixel; all pixels get a per-pixel base intensity, a common linear
//! trend and i.i.d. Gaussian noise. The second harmonic makes the waveform
//! non-sinusoidal so an estimator that locks onto `2f` is caught.

use std::f64::consts::TAU;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::io::FrameTensor;
use crate::signal::BvpSignal;

pub const MIN_HR_BPM: f64 = 40.0;
pub const MAX_HR_BPM: f64 = 180.0;
pub const HARMONIC_AMP: f64 = 0.3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SynthError {
    #[error("heart rate {0} BPM outside [40, 180]")]
    HeartRate(f64),
    #[error("invalid parameter {name} = {value}")]
    Invalid { name: &'static str, value: f64 },
    #[error("video would have fewer than 2 frames")]
    TooShort,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub h: usize,
    pub w: usize,
    pub channels: usize,
    pub fps: f64,
    pub duration_s: f64,
    pub hr_bpm: f64,
    pub pulse_amp: f64,
    /// Intensity units per second, applied to every pixel.
    pub trend_slope: f64,
    pub noise_sigma: f64,
    pub skin_fraction: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            h: 32,
            w: 32,
            channels: 3,
            fps: 30.0,
            duration_s: 30.0,
            hr_bpm: 72.0,
            pulse_amp: 0.02,
            trend_slope: 0.0,
            noise_sigma: 0.01,
            skin_fraction: 0.6,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        if !(MIN_HR_BPM..=MAX_HR_BPM).contains(&self.hr_bpm) {
            return Err(SynthError::HeartRate(self.hr_bpm));
        }
        let checks = [
            ("fps", self.fps, self.fps > 0.0),
            ("duration_s", self.duration_s, self.duration_s > 0.0),
            ("pulse_amp", self.pulse_amp, self.pulse_amp >= 0.0),
            ("noise_sigma", self.noise_sigma, self.noise_sigma >= 0.0),
            ("trend_slope", self.trend_slope, self.trend_slope.is_finite()),
            (
                "skin_fraction",
                self.skin_fraction,
                (0.0..=1.0).contains(&self.skin_fraction),
            ),
        ];
        for (name, value, ok) in checks {
            if !ok || !value.is_finite() {
                return Err(SynthError::Invalid { name, value });
            }
        }
        for (name, v) in [("h", self.h), ("w", self.w), ("channels", self.channels)] {
            if v == 0 {
                return Err(SynthError::Invalid { name, value: 0.0 });
            }
        }
        if self.frames() < 2 {
            return Err(SynthError::TooShort);
        }
        Ok(())
    }

    pub fn frames(&self) -> usize {
        (self.duration_s * self.fps).round() as usize
    }
}

#[derive(Debug, Clone)]
pub struct SynthOutput {
    pub video: FrameTensor,
    /// The clean pulse waveform `sin θ + 0.3 sin 2θ`, one sample per frame.
    pub gt_bvp: BvpSignal,
    pub gt_hr: f64,
    /// Row-major `H × W` mask of pulse-carrying pixels.
    pub skin_mask: Vec<bool>,
}

/// The pulse shape at phase `theta`.
pub fn pulse_wave(theta: f64) -> f64 {
    theta.sin() + HARMONIC_AMP * (2.0 * theta).sin()
}

/// Deterministic for a fixed config (including seed).
pub fn generate(cfg: &SynthConfig) -> Result<SynthOutput, SynthError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (t_len, hw, c) = (cfg.frames(), cfg.h * cfg.w, cfg.channels);

    let base: Vec<f64> = (0..hw * c).map(|_| rng.random_range(0.3..0.7)).collect();
    let n_skin = (cfg.skin_fraction * hw as f64).round() as usize;
    let mut order: Vec<usize> = (0..hw).collect();
    order.shuffle(&mut rng);
    let mut skin_mask = vec![false; hw];
    for &p in &order[..n_skin] {
        skin_mask[p] = true;
    }
    let phase = rng.random_range(0.0..TAU);
    let noise = Normal::new(0.0, cfg.noise_sigma).expect("sigma validated");

    let f = cfg.hr_bpm / 60.0;
    let gt: Vec<f64> = (0..t_len)
        .map(|t| pulse_wave(TAU * f * t as f64 / cfg.fps + phase))
        .collect();

    let mut data = Vec::with_capacity(t_len * hw * c);
    for (t, &s) in gt.iter().enumerate() {
        let trend = cfg.trend_slope * t as f64 / cfg.fps;
        for p in 0..hw {
            let pulse = if skin_mask[p] { cfg.pulse_amp * s } else { 0.0 };
            for ch in 0..c {
                let mut v = base[p * c + ch] + trend + pulse;
                if cfg.noise_sigma > 0.0 {
                    v += noise.sample(&mut rng);
                }
                data.push(v as f32);
            }
        }
    }
    let video = FrameTensor::new(t_len, cfg.h, cfg.w, c, cfg.fps as f32, data)
        .expect("generator produces a consistent finite tensor");
    let gt_bvp = BvpSignal::new(gt, cfg.fps, 0.0).expect("at least two finite samples");
    Ok(SynthOutput {
        video,
        gt_bvp,
        gt_hr: cfg.hr_bpm,
        skin_mask,
    })
}
