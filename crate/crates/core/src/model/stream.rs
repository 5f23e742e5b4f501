use num_complex::Complex64;

use super::forward::{check_finite, SpatialScratch};
use super::{Model, ModelError};
use crate::matrix::Matrix;
use crate::ssm::shared_recurrent_step;
use crate::temporal_norm::{warmup_len, TnState};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StreamOutput {
    pub bvp: f64,
    /// False while the per-pixel normalizers are still warming up.
    pub confident: bool,
}

/// Frame-at-a-time inference with fixed-size state.
///
/// Holds one normalizer per pixel value, one `D × n` complex state per block
/// and preallocated scratch; nothing grows with the number of frames.
#[derive(Debug, Clone)]
pub struct StreamSession<'m> {
    model: &'m Model,
    tn: Vec<TnState>,
    /// Per block, `D × n`.
    h: Vec<Matrix<Complex64>>,
    frames: u64,
    warmup: u64,
    scratch: SpatialScratch,
    feats: Vec<Vec<f64>>,
    normalized: Vec<f32>,
    u: Vec<f64>,
    y: Vec<f64>,
    z: Vec<f64>,
    b_bar: Vec<Complex64>,
    c_sel: Vec<Complex64>,
}

impl Model {
    /// Opens a session with zero SSM state; normalizers start on the first frame.
    pub fn stream_open(&self) -> StreamSession<'_> {
        StreamSession::new(self)
    }
}

impl<'m> StreamSession<'m> {
    pub fn new(model: &'m Model) -> Self {
        let cfg = &model.cfg;
        let (d, n) = (cfg.d_model, cfg.n_state);
        Self {
            model,
            tn: Vec::with_capacity(cfg.frame_len()),
            h: vec![Matrix::zeros(d, n); cfg.n_blocks],
            frames: 0,
            warmup: warmup_len(cfg.alpha_tn),
            scratch: SpatialScratch::new(model),
            feats: vec![vec![0.0; d]; cfg.n_blocks],
            normalized: vec![0.0; cfg.frame_len()],
            u: vec![0.0; d],
            y: vec![0.0; d],
            z: vec![0.0; d],
            b_bar: vec![Complex64::new(0.0, 0.0); n],
            c_sel: vec![Complex64::new(0.0, 0.0); n],
        }
    }

    pub fn frames_processed(&self) -> u64 {
        self.frames
    }

    pub fn model(&self) -> &Model {
        self.model
    }

    /// SSM state of block `b`, `D × n`.
    pub fn ssm_state(&self, b: usize) -> &Matrix<Complex64> {
        &self.h[b]
    }

    fn check_len(&self, frame: &[f32]) -> Result<(), ModelError> {
        let n = self.model.cfg.frame_len();
        if frame.len() != n {
            return Err(ModelError::Shape(format!(
                "frame has {} values, expected {n}",
                frame.len()
            )));
        }
        Ok(())
    }

    /// Normalizes `frame` with the running per-pixel statistics, then
    /// advances every block by one step. A non-finite or wrongly-sized frame
    /// is rejected and leaves the session untouched.
    pub fn step(&mut self, frame: &[f32]) -> Result<StreamOutput, ModelError> {
        self.check_len(frame)?;
        check_finite(frame)?;
        let alpha = self.model.cfg.alpha_tn;
        if self.tn.is_empty() {
            // μ starts at the first value and σ² at zero, so this frame maps to zero.
            self.tn.extend(frame.iter().map(|&x| TnState {
                mu: x as f64,
                var: 0.0,
                alpha,
                warm: 1,
            }));
            self.normalized.fill(0.0);
        } else {
            for ((s, &x), out) in self.tn.iter_mut().zip(frame).zip(&mut self.normalized) {
                *out = s.step_unchecked(x as f64) as f32;
            }
        }
        let normalized = std::mem::take(&mut self.normalized);
        let bvp = self.advance(&normalized);
        self.normalized = normalized;
        Ok(StreamOutput {
            bvp,
            confident: self.frames > self.warmup,
        })
    }

    /// Advances on an already-normalized frame, bypassing the normalizers.
    pub fn step_normalized(&mut self, frame: &[f32]) -> Result<StreamOutput, ModelError> {
        self.check_len(frame)?;
        check_finite(frame)?;
        let bvp = self.advance(frame);
        Ok(StreamOutput {
            bvp,
            confident: true,
        })
    }

    /// Temporal step on precomputed pooled features (one vector per block).
    pub fn step_features(&mut self, feats: &[Vec<f64>]) -> Result<f64, ModelError> {
        let d = self.model.cfg.d_model;
        if feats.len() != self.h.len() || feats.iter().any(|f| f.len() != d) {
            return Err(ModelError::Shape("features do not match the model".into()));
        }
        self.frames += 1;
        Ok(self.temporal(feats))
    }

    fn advance(&mut self, frame: &[f32]) -> f64 {
        let mut feats = std::mem::take(&mut self.feats);
        self.model.encode_into(frame, &mut self.scratch, &mut feats);
        self.frames += 1;
        let out = self.temporal(&feats);
        self.feats = feats;
        out
    }

    fn temporal(&mut self, feats: &[Vec<f64>]) -> f64 {
        let model = self.model;
        self.z.fill(0.0);
        for ((blk, f), h) in model.blocks.iter().zip(feats).zip(&mut self.h) {
            for ((u, &fv), &zv) in self.u.iter_mut().zip(f).zip(&self.z) {
                *u = fv + zv;
            }
            for k in 0..blk.a_bar.len() {
                let bk: f64 = blk.w_b.row(k).iter().zip(&self.u).map(|(w, x)| w * x).sum();
                let ck: f64 = blk.w_c.row(k).iter().zip(&self.u).map(|(w, x)| w * x).sum();
                self.b_bar[k] = blk.gain[k] * bk;
                self.c_sel[k] = Complex64::new(ck, 0.0);
            }
            shared_recurrent_step(h, &self.u, &self.b_bar, &self.c_sel, &blk.a_bar, &mut self.y);
            for (y, &u) in self.y.iter_mut().zip(&self.u) {
                *y += blk.d * u;
            }
            for (o, zo) in self.z.iter_mut().enumerate() {
                let acc: f64 = blk.out_w.row(o).iter().zip(&self.y).map(|(w, y)| w * y).sum();
                *zo = acc + blk.out_b[o];
            }
        }
        model.readout_b + self.z.iter().zip(&model.readout_w).map(|(a, b)| a * b).sum::<f64>()
    }

    /// Serialized recurrent state: normalizer statistics, SSM states and the
    /// frame counter. Scratch buffers are excluded (see [`Self::footprint_bytes`]).
    pub fn to_bytes(&self) -> Vec<u8> {
        let n_px = self.model.cfg.frame_len();
        let mut out = Vec::with_capacity(self.state_len());
        out.extend_from_slice(&self.frames.to_le_bytes());
        out.push(u8::from(!self.tn.is_empty()));
        for i in 0..n_px {
            let s = self.tn.get(i).copied().unwrap_or(TnState {
                mu: 0.0,
                var: 0.0,
                alpha: self.model.cfg.alpha_tn,
                warm: 0,
            });
            out.extend_from_slice(&s.mu.to_le_bytes());
            out.extend_from_slice(&s.var.to_le_bytes());
            out.extend_from_slice(&s.warm.to_le_bytes());
        }
        for h in &self.h {
            for z in h.as_slice() {
                out.extend_from_slice(&z.re.to_le_bytes());
                out.extend_from_slice(&z.im.to_le_bytes());
            }
        }
        out
    }

    /// Closed-form length of [`Self::to_bytes`]:
    /// `9 + 24·H·W·C + 16·n_blocks·D·n`.
    pub fn state_len(&self) -> usize {
        let cfg = &self.model.cfg;
        9 + 24 * cfg.frame_len() + 16 * cfg.n_blocks * cfg.d_model * cfg.n_state
    }

    /// Serialized state plus all scratch buffers held by the session.
    pub fn footprint_bytes(&self) -> usize {
        let d = self.model.cfg.d_model;
        let n = self.model.cfg.n_state;
        self.state_len()
            + self.scratch.byte_len()
            + self.normalized.len() * 4
            + (self.feats.len() * d + 3 * d) * 8
            + 2 * n * 16
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{init_weights, oracle_filterbank, ModelConfig};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn small() -> Model {
        let cfg = ModelConfig {
            input_h: 8,
            input_w: 8,
            d_model: 6,
            n_state: 4,
            n_blocks: 2,
            kernel_size: 3,
            alpha_tn: 0.9,
            ..Default::default()
        };
        let store = init_weights(&cfg, 7).unwrap();
        Model::new(cfg, &store).unwrap()
    }

    fn random_frames(t: usize, n: usize, seed: u64) -> Vec<f32> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..t * n).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    #[test]
    fn open_twice_identical() {
        let m = small();
        let a = m.stream_open();
        let b = m.stream_open();
        assert_eq!(a.to_bytes(), b.to_bytes());
        assert_eq!(a.to_bytes().len(), a.state_len());
        assert!(a.h.iter().all(|h| h.as_slice().iter().all(|z| z.norm() == 0.0)));
    }

    #[test]
    fn stream_matches_batch_on_normalized_frames() {
        let m = small();
        let n = m.config().frame_len();
        let frames = random_frames(150, n, 1);
        let batch = m.forward_normalized(&frames, 150).unwrap();
        let mut s = m.stream_open();
        for (t, f) in frames.chunks(n).enumerate() {
            let out = s.step_normalized(f).unwrap();
            assert!((out.bvp - batch[t]).abs() < 1e-9, "t={t}");
        }
    }

    #[test]
    fn first_step_matches_batch_first_step() {
        let m = small();
        let n = m.config().frame_len();
        let frames = random_frames(2, n, 2);
        let batch = m.forward_normalized(&frames, 2).unwrap();
        let mut s = m.stream_open();
        assert!((s.step_normalized(&frames[..n]).unwrap().bvp - batch[0]).abs() < 1e-12);
    }

    #[test]
    fn bad_frames_leave_state_unchanged() {
        let m = small();
        let n = m.config().frame_len();
        let frames = random_frames(5, n, 3);
        let mut s = m.stream_open();
        for f in frames.chunks(n) {
            s.step(f).unwrap();
        }
        let before = s.to_bytes();
        let mut bad = frames[..n].to_vec();
        bad[n - 1] = f32::INFINITY;
        assert!(s.step(&bad).is_err());
        assert!(s.step(&bad[..3]).is_err());
        assert_eq!(s.to_bytes(), before);
    }

    #[test]
    fn confidence_follows_warmup() {
        let m = small();
        let n = m.config().frame_len();
        let mut s = m.stream_open();
        let frames = random_frames(12, n, 4);
        let flags: Vec<bool> = frames.chunks(n).map(|f| s.step(f).unwrap().confident).collect();
        // alpha 0.9 → 10 warm-up frames
        assert!(flags[..10].iter().all(|&c| !c));
        assert!(flags[10..].iter().all(|&c| c));
    }

    #[test]
    fn zero_input_decays_geometrically() {
        let cfg = ModelConfig {
            input_h: 8,
            input_w: 8,
            n_blocks: 1,
            ..Default::default()
        };
        let m = Model::from_store(&oracle_filterbank(&cfg).unwrap()).unwrap();
        let n = m.config().frame_len();
        let mut s = m.stream_open();
        for f in random_frames(60, n, 5).chunks(n) {
            s.step_normalized(f).unwrap();
        }
        let rho = m.spectral_radius();
        let zero = vec![0.0; n];
        // channel 1 is the filterbank's constant drive; the pulse lives in channel 0
        let norm = |s: &StreamSession| s.ssm_state(0).row(0).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let mut prev = norm(&s);
        let mut bound = prev;
        for _ in 0..200 {
            let out = s.step_normalized(&zero).unwrap();
            let cur = norm(&s);
            bound *= rho;
            assert!(cur <= prev * rho * (1.0 + 1e-12));
            assert!(out.bvp.abs() <= 10.0 * bound);
            prev = cur;
        }
    }
}
