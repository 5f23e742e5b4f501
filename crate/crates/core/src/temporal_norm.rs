//! Temporal normalization: per-series detrending and standardization.
//!
//! Batch path: fit a least-squares line over the whole series, subtract it,
//! divide by the RMS of the residual. Streaming path: track the trend with a
//! recursive moving average (RMA) and the residual variance with the same
//! exponential weighting, so each step needs constant time and memory:
//!
//! ```text
//! μ_t  = α μ_{t-1} + (1-α) x_t
//! r_t  = x_t - μ_t
//! σ²_t = α σ²_{t-1} + (1-α) r_t²
//! x̃_t  = r_t / σ_t
//! ```
//!
//! Both variants output zero while the variance is at or below [`EPS_VAR`], so
//! constant or purely linear series never produce NaN.

use thiserror::Error;

/// Degenerate-variance guard: residual variances at or below this give zero output.
pub const EPS_VAR: f64 = 1e-8;

/// Default RMA factor at 30 fps (time constant ≈ 6.6 s).
pub const DEFAULT_ALPHA: f64 = 0.995;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TnError {
    #[error("series needs at least 2 samples, got {0}")]
    TooShort(usize),
    #[error("smoothing factor must lie in (0, 1), got {0}")]
    InvalidAlpha(f64),
    #[error("non-finite sample {value} at stream position {position}")]
    NonFinite { position: u64, value: f64 },
}

/// Least-squares line `x_t ≈ slope·t + intercept` over `t = 1..=T`.
///
/// Returns `(slope, intercept)`.
pub fn fit_linear_trend(x: &[f64]) -> Result<(f64, f64), TnError> {
    let n = x.len();
    if n < 2 {
        return Err(TnError::TooShort(n));
    }
    let nf = n as f64;
    let t_mean = (nf + 1.0) / 2.0;
    let x_mean = x.iter().sum::<f64>() / nf;
    let mut sxy = 0.0;
    for (i, &v) in x.iter().enumerate() {
        sxy += ((i + 1) as f64 - t_mean) * (v - x_mean);
    }
    // Σ (t - t̄)² for t = 1..n
    let sxx = nf * (nf * nf - 1.0) / 12.0;
    let slope = sxy / sxx;
    Ok((slope, x_mean - slope * t_mean))
}

/// Detrend and standardize a whole series.
///
/// The output has zero mean and unit RMS, or is all zeros when the residual
/// variance is at or below [`EPS_VAR`].
pub fn tn_batch(x: &[f64]) -> Result<Vec<f64>, TnError> {
    let mut out = x.to_vec();
    tn_batch_in_place(&mut out)?;
    Ok(out)
}

/// In-place variant of [`tn_batch`].
pub fn tn_batch_in_place(x: &mut [f64]) -> Result<(), TnError> {
    let (slope, intercept) = fit_linear_trend(x)?;
    for (i, v) in x.iter_mut().enumerate() {
        *v -= slope * (i + 1) as f64 + intercept;
    }
    let var = x.iter().map(|r| r * r).sum::<f64>() / x.len() as f64;
    if var <= EPS_VAR {
        x.fill(0.0);
    } else {
        let inv = 1.0 / var.sqrt();
        x.iter_mut().for_each(|r| *r *= inv);
    }
    Ok(())
}

/// Streaming RMA state for one series. Fixed size, no history.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TnState {
    pub mu: f64,
    pub var: f64,
    pub alpha: f64,
    /// Samples consumed so far, including the initializing one.
    pub warm: u64,
}

/// Starts a stream at `x0`: `μ = x0`, `σ² = 0`.
pub fn rma_init(x0: f64, alpha: f64) -> Result<TnState, TnError> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(TnError::InvalidAlpha(alpha));
    }
    if !x0.is_finite() {
        return Err(TnError::NonFinite {
            position: 0,
            value: x0,
        });
    }
    Ok(TnState {
        mu: x0,
        var: 0.0,
        alpha,
        warm: 1,
    })
}

/// Advances the stream by one sample and returns the normalized value.
pub fn rma_step(state: &TnState, x_t: f64) -> Result<(TnState, f64), TnError> {
    let mut next = *state;
    let out = next.step(x_t)?;
    Ok((next, out))
}

/// Number of initial samples flagged low-confidence: `ceil(1 / (1 - α))`.
pub fn warmup_len(alpha: f64) -> u64 {
    // the small offset keeps e.g. alpha = 0.9 at 10 despite 1/(1-0.9) rounding up
    (1.0 / (1.0 - alpha) - 1e-9).ceil() as u64
}

impl TnState {
    /// In-place [`rma_step`]. On error the state is unchanged.
    #[inline]
    pub fn step(&mut self, x_t: f64) -> Result<f64, TnError> {
        if !x_t.is_finite() {
            return Err(TnError::NonFinite {
                position: self.warm,
                value: x_t,
            });
        }
        Ok(self.step_unchecked(x_t))
    }

    /// [`TnState::step`] for inputs already known to be finite.
    #[inline]
    pub fn step_unchecked(&mut self, x_t: f64) -> f64 {
        let a = self.alpha;
        self.mu = a * self.mu + (1.0 - a) * x_t;
        let r = x_t - self.mu;
        self.var = a * self.var + (1.0 - a) * r * r;
        self.warm += 1;
        if self.var <= EPS_VAR {
            0.0
        } else {
            r / self.var.sqrt()
        }
    }

    /// True once more than [`warmup_len`] samples have been consumed.
    pub fn is_warm(&self) -> bool {
        self.warm > warmup_len(self.alpha)
    }
}
