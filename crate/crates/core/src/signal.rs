//! Pulse-waveform post-processing: periodogram, heart-rate readout, and the
//! error metrics used to score heart-rate estimates (MAE, RMSE, Pearson r).

use std::sync::Arc;

use rustfft::{num_complex::Complex, Fft, FftPlanner};
use thiserror::Error;

/// Shortest series accepted by [`psd`].
pub const MIN_PSD_LEN: usize = 32;

/// Default heart-rate search band in Hz (≈ 40–180 BPM).
pub const DEFAULT_BAND: (f64, f64) = (0.66, 3.0);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SignalError {
    #[error("signal needs at least {min} samples, got {len}")]
    TooShort { len: usize, min: usize },
    #[error("sampling rate must be positive and finite, got {0}")]
    InvalidRate(f64),
    #[error("signal contains a non-finite sample at index {0}")]
    NonFinite(usize),
    #[error("invalid band [{lo}, {hi}] Hz")]
    InvalidBand { lo: f64, hi: f64 },
    #[error("band [{lo}, {hi}] Hz holds {bins} frequency bins, need at least 2")]
    EmptyBand { lo: f64, hi: f64, bins: usize },
    #[error("length mismatch: predictions have {pred} entries, ground truth {gt}")]
    LengthMismatch { pred: usize, gt: usize },
    #[error("metrics need at least one pair")]
    Empty,
    #[error("Pearson correlation is undefined for a constant series")]
    ZeroVariance,
    #[error("invalid window: length {window_s} s, hop {hop_s} s")]
    InvalidWindow { window_s: f64, hop_s: f64 },
}

/// A sampled pulse waveform.
#[derive(Debug, Clone, PartialEq)]
pub struct BvpSignal {
    samples: Vec<f64>,
    fps: f64,
    t0: f64,
}

impl BvpSignal {
    pub fn new(samples: Vec<f64>, fps: f64, t0: f64) -> Result<Self, SignalError> {
        if samples.len() < 2 {
            return Err(SignalError::TooShort {
                len: samples.len(),
                min: 2,
            });
        }
        if !(fps > 0.0 && fps.is_finite()) {
            return Err(SignalError::InvalidRate(fps));
        }
        if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
            return Err(SignalError::NonFinite(i));
        }
        Ok(Self { samples, fps, t0 })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }
    pub fn fps(&self) -> f64 {
        self.fps
    }
    pub fn t0(&self) -> f64 {
        self.t0
    }
    pub fn len(&self) -> usize {
        self.samples.len()
    }
    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.fps
    }

    /// Time stamp of sample `i`, in seconds.
    pub fn time(&self, i: usize) -> f64 {
        self.t0 + i as f64 / self.fps
    }

    /// Samples `start..end` as a new signal with the matching start time.
    pub fn slice(&self, start: usize, end: usize) -> Result<Self, SignalError> {
        Self::new(
            self.samples[start..end].to_vec(),
            self.fps,
            self.time(start),
        )
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }
}

/// One-sided power spectrum.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub freqs: Vec<f64>,
    pub power: Vec<f64>,
}

/// Periodic Hann window of length `n`.
fn hann(n: usize) -> impl Iterator<Item = f64> {
    let step = 2.0 * std::f64::consts::PI / n as f64;
    (0..n).map(move |i| 0.5 - 0.5 * (step * i as f64).cos())
}

fn plan(n: usize) -> Arc<dyn Fft<f64>> {
    FftPlanner::new().plan_fft_forward(n)
}

/// Mean-removed, Hann-windowed series: the sequence whose energy [`psd`] conserves.
pub fn windowed(samples: &[f64]) -> Vec<f64> {
    let mean = samples.iter().sum::<f64>() / samples.len() as f64;
    samples
        .iter()
        .zip(hann(samples.len()))
        .map(|(x, w)| (x - mean) * w)
        .collect()
}

/// Hann-windowed periodogram with mean removal, one-sided, bin spacing `fps/T`.
///
/// Scaled so that the powers sum to the energy of the windowed series.
pub fn psd(bvp: &BvpSignal) -> Result<Spectrum, SignalError> {
    let n = bvp.len();
    if n < MIN_PSD_LEN {
        return Err(SignalError::TooShort {
            len: n,
            min: MIN_PSD_LEN,
        });
    }
    let mut buf: Vec<Complex<f64>> = windowed(bvp.samples())
        .into_iter()
        .map(|v| Complex::new(v, 0.0))
        .collect();
    plan(n).process(&mut buf);

    let half = n / 2;
    let scale = 1.0 / n as f64;
    let mut power = Vec::with_capacity(half + 1);
    for (k, x) in buf[..=half].iter().enumerate() {
        let p = x.norm_sqr() * scale;
        let doubled = k != 0 && !(n % 2 == 0 && k == half);
        power.push(if doubled { 2.0 * p } else { p });
    }
    let df = bvp.fps() / n as f64;
    let freqs = (0..=half).map(|k| k as f64 * df).collect();
    Ok(Spectrum { freqs, power })
}

/// Heart-rate readout from the dominant in-band spectral peak.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HrEstimate {
    pub bpm: f64,
    /// Power of the peak bin and its in-band neighbours over total in-band power.
    pub peak_power_fraction: f64,
}

/// Spectral-peak heart rate within `band` (Hz).
///
/// The peak bin is refined by fitting a parabola through the log powers of
/// the peak and its two neighbours; the offset is clamped to half a bin.
pub fn estimate_hr(bvp: &BvpSignal, band: (f64, f64)) -> Result<HrEstimate, SignalError> {
    let (lo, hi) = band;
    if !(lo.is_finite() && hi.is_finite() && lo >= 0.0 && lo < hi) {
        return Err(SignalError::InvalidBand { lo, hi });
    }
    let spec = psd(bvp)?;
    let in_band: Vec<usize> = (0..spec.freqs.len())
        .filter(|&k| spec.freqs[k] >= lo && spec.freqs[k] <= hi)
        .collect();
    if in_band.len() < 2 {
        return Err(SignalError::EmptyBand {
            lo,
            hi,
            bins: in_band.len(),
        });
    }
    let (first, last) = (in_band[0], *in_band.last().expect("non-empty"));
    let p = &spec.power;
    let mut peak = first;
    for k in first..=last {
        if p[k] > p[peak] {
            peak = k;
        }
    }

    let mut offset = 0.0;
    if peak > 0 && peak + 1 < p.len() {
        let (a, b, c) = (p[peak - 1], p[peak], p[peak + 1]);
        if a > 0.0 && b > 0.0 && c > 0.0 {
            // relative to the peak, so a uniform power-of-two scale cancels exactly
            let (la, lc) = ((a / b).ln(), (c / b).ln());
            let denom = la + lc;
            if denom < 0.0 {
                offset = (0.5 * (la - lc) / denom).clamp(-0.5, 0.5);
            }
        }
    }
    let df = bvp.fps() / bvp.len() as f64;
    let freq = (peak as f64 + offset) * df;

    let band_power: f64 = p[first..=last].iter().sum();
    let lo_k = peak.saturating_sub(1).max(first);
    let hi_k = (peak + 1).min(last);
    let peak_power: f64 = p[lo_k..=hi_k].iter().sum();
    let peak_power_fraction = if band_power > 0.0 {
        (peak_power / band_power).min(1.0)
    } else {
        0.0
    };
    Ok(HrEstimate {
        bpm: 60.0 * freq,
        peak_power_fraction,
    })
}

/// Heart rate over sliding windows. Returns `(window centre time, estimate)`.
pub fn windowed_hr(
    bvp: &BvpSignal,
    window_s: f64,
    hop_s: f64,
    band: (f64, f64),
) -> Result<Vec<(f64, HrEstimate)>, SignalError> {
    if !(window_s > 0.0 && hop_s > 0.0) {
        return Err(SignalError::InvalidWindow { window_s, hop_s });
    }
    let win = (window_s * bvp.fps()).round() as usize;
    let hop = ((hop_s * bvp.fps()).round() as usize).max(1);
    if win > bvp.len() {
        return Err(SignalError::TooShort {
            len: bvp.len(),
            min: win,
        });
    }
    let mut out = Vec::new();
    let mut start = 0;
    while start + win <= bvp.len() {
        let seg = bvp.slice(start, start + win)?;
        let centre = bvp.time(start) + 0.5 * win as f64 / bvp.fps();
        out.push((centre, estimate_hr(&seg, band)?));
        start += hop;
    }
    Ok(out)
}

/// Heart-rate error metrics in BPM, plus Pearson correlation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    pub mae: f64,
    pub rmse: f64,
    pub pearson_r: f64,
}

fn check_pairs(pred: &[f64], gt: &[f64]) -> Result<(), SignalError> {
    if pred.len() != gt.len() {
        return Err(SignalError::LengthMismatch {
            pred: pred.len(),
            gt: gt.len(),
        });
    }
    if pred.is_empty() {
        return Err(SignalError::Empty);
    }
    Ok(())
}

/// `(mae, rmse)`.
pub fn error_metrics(pred: &[f64], gt: &[f64]) -> Result<(f64, f64), SignalError> {
    check_pairs(pred, gt)?;
    let n = pred.len() as f64;
    let (mut abs, mut sq) = (0.0, 0.0);
    for (p, g) in pred.iter().zip(gt) {
        let e = p - g;
        abs += e.abs();
        sq += e * e;
    }
    Ok((abs / n, (sq / n).sqrt()))
}

pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64, SignalError> {
    check_pairs(x, y)?;
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(SignalError::ZeroVariance);
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// MAE, RMSE and Pearson r between predicted and reference heart rates.
///
/// Fails when either series is constant, since r is then undefined.
pub fn compute_metrics(pred_hr: &[f64], gt_hr: &[f64]) -> Result<Metrics, SignalError> {
    let (mae, rmse) = error_metrics(pred_hr, gt_hr)?;
    let pearson_r = pearson(pred_hr, gt_hr)?;
    Ok(Metrics {
        mae,
        rmse,
        pearson_r,
    })
}
