use num_complex::Complex64;

use super::{Model, ModelError};
use crate::io::FrameTensor;
use crate::matrix::Matrix;
use crate::signal::BvpSignal;
use crate::ssm::{shared_dual_chunked, DUAL_CHUNK};
use crate::temporal_norm::tn_batch_in_place;

/// Pooled spatial features of a frame sequence: one `T × D` matrix per block.
#[derive(Debug, Clone, PartialEq)]
pub struct Features {
    pub blocks: Vec<Matrix<f64>>,
}

impl Features {
    pub fn t_len(&self) -> usize {
        self.blocks.first().map_or(0, |m| m.rows())
    }
}

/// Reusable buffers for one frame's trip through the spatial path.
#[derive(Debug, Clone)]
pub(crate) struct SpatialScratch {
    mid: Vec<Vec<f32>>,
    maps: Vec<Vec<f32>>,
}

impl SpatialScratch {
    pub(crate) fn new(model: &Model) -> Self {
        let cfg = &model.cfg;
        let d = cfg.d_model;
        let sizes: Vec<usize> = (0..cfg.n_blocks)
            .map(|b| {
                let (h, w) = cfg.map_size(b + 1);
                h * w * d
            })
            .collect();
        Self {
            mid: sizes.iter().map(|&n| vec![0.0; n]).collect(),
            maps: sizes.iter().map(|&n| vec![0.0; n]).collect(),
        }
    }

    pub(crate) fn byte_len(&self) -> usize {
        self.mid.iter().chain(&self.maps).map(|v| v.len() * 4).sum()
    }
}

pub(crate) fn check_finite(values: &[f32]) -> Result<(), ModelError> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(index) => Err(ModelError::NonFiniteInput { index }),
        None => Ok(()),
    }
}

impl Model {
    fn check_frame(&self, frame: &[f32]) -> Result<(), ModelError> {
        let n = self.cfg.frame_len();
        if frame.len() != n {
            return Err(ModelError::Shape(format!(
                "frame has {} values, model expects {}×{}×{} = {n}",
                frame.len(),
                self.cfg.input_h,
                self.cfg.input_w,
                self.cfg.in_channels
            )));
        }
        Ok(())
    }

    /// Runs the spatial half of every block on one (normalized) frame,
    /// writing the pooled features of block `b` into `out[b]`.
    pub(crate) fn encode_into(&self, frame: &[f32], s: &mut SpatialScratch, out: &mut [Vec<f64>]) {
        let act = self.cfg.activation;
        let (mut h, mut w) = (self.cfg.input_h, self.cfg.input_w);
        for (b, blk) in self.blocks.iter().enumerate() {
            let (oh, ow) = blk.conv_a.out_size(h, w);
            {
                let input: &[f32] = if b == 0 { frame } else { &s.maps[b - 1] };
                blk.conv_a.apply(input, h, w, &mut s.mid[b]);
            }
            act.apply(&mut s.mid[b]);
            blk.conv_b.apply(&s.mid[b], oh, ow, &mut s.maps[b]);
            act.apply(&mut s.maps[b]);

            let feat = &mut out[b];
            feat.iter_mut().for_each(|v| *v = 0.0);
            for px in s.maps[b].chunks_exact(self.cfg.d_model) {
                for (f, &v) in feat.iter_mut().zip(px) {
                    *f += v as f64;
                }
            }
            let inv = 1.0 / (oh * ow) as f64;
            feat.iter_mut().for_each(|v| *v *= inv);
            (h, w) = (oh, ow);
        }
    }

    /// Pooled features of every block for one `H × W × C` frame.
    pub fn spatial_features(&self, frame: &[f32]) -> Result<Vec<Vec<f64>>, ModelError> {
        self.check_frame(frame)?;
        check_finite(frame)?;
        let mut s = SpatialScratch::new(self);
        let mut out = vec![vec![0.0; self.cfg.d_model]; self.cfg.n_blocks];
        self.encode_into(frame, &mut s, &mut out);
        Ok(out)
    }

    /// Pooled features of block `block_idx` for one frame. Blocks chain
    /// spatially, so this runs blocks `0..=block_idx`.
    pub fn spatial_encode(&self, frame: &[f32], block_idx: usize) -> Result<Vec<f64>, ModelError> {
        if block_idx >= self.cfg.n_blocks {
            return Err(ModelError::Shape(format!(
                "block {block_idx} out of range for {} blocks",
                self.cfg.n_blocks
            )));
        }
        Ok(self.spatial_features(frame)?.swap_remove(block_idx))
    }

    /// `(B_t, C_t) = (W_B u, W_C u)` for block `block_idx`.
    pub fn selective_project(&self, features: &[f64], block_idx: usize) -> (Vec<f64>, Vec<f64>) {
        let blk = &self.blocks[block_idx];
        let dot = |row: &[f64]| row.iter().zip(features).map(|(w, x)| w * x).sum::<f64>();
        (
            (0..blk.w_b.rows()).map(|k| dot(blk.w_b.row(k))).collect(),
            (0..blk.w_c.rows()).map(|k| dot(blk.w_c.row(k))).collect(),
        )
    }

    /// Spatial features for `t_len` normalized frames stored back to back.
    /// Frames are independent here, so they are split across threads.
    pub fn encode_sequence(&self, frames: &[f32], t_len: usize) -> Result<Features, ModelError> {
        let n = self.cfg.frame_len();
        if frames.len() != t_len * n {
            return Err(ModelError::Shape(format!(
                "{} values do not form {t_len} frames of {n}",
                frames.len()
            )));
        }
        check_finite(frames)?;
        let (d, nb) = (self.cfg.d_model, self.cfg.n_blocks);
        let threads = std::thread::available_parallelism()
            .map_or(1, |p| p.get())
            .min(t_len.max(1));
        let per = t_len.div_ceil(threads.max(1)).max(1);
        let parts: Vec<Vec<Vec<Vec<f64>>>> = std::thread::scope(|scope| {
            let handles: Vec<_> = frames
                .chunks(per * n)
                .map(|chunk| {
                    scope.spawn(move || {
                        let mut s = SpatialScratch::new(self);
                        chunk
                            .chunks_exact(n)
                            .map(|frame| {
                                let mut out = vec![vec![0.0; d]; nb];
                                self.encode_into(frame, &mut s, &mut out);
                                out
                            })
                            .collect()
                    })
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("spatial worker panicked"))
                .collect()
        });
        let mut blocks = vec![Matrix::zeros(t_len, d); nb];
        for (t, feats) in parts.into_iter().flatten().enumerate() {
            for (b, f) in feats.into_iter().enumerate() {
                blocks[b].row_mut(t).copy_from_slice(&f);
            }
        }
        Ok(Features { blocks })
    }

    /// Temporal half of every block over a whole sequence, from rest, in
    /// masked-attention form. Returns the pulse sample per frame.
    pub fn temporal_forward(&self, feats: &Features) -> Result<Vec<f64>, ModelError> {
        let t_len = feats.t_len();
        let (d, n) = (self.cfg.d_model, self.cfg.n_state);
        if feats.blocks.len() != self.blocks.len()
            || feats.blocks.iter().any(|m| m.shape() != (t_len, d))
        {
            return Err(ModelError::Shape("features do not match the model".into()));
        }
        if t_len == 0 {
            return Ok(Vec::new());
        }
        let mut z = Matrix::<f64>::zeros(t_len, d);
        for (blk, f) in self.blocks.iter().zip(&feats.blocks) {
            let u = Matrix::from_fn(t_len, d, |t, c| f.get(t, c) + z.get(t, c));
            let mut b_bar = Matrix::<Complex64>::zeros(t_len, n);
            let mut c_sel = Matrix::<Complex64>::zeros(t_len, n);
            for t in 0..t_len {
                let ut = u.row(t);
                for k in 0..n {
                    let bk: f64 = blk.w_b.row(k).iter().zip(ut).map(|(w, x)| w * x).sum();
                    let ck: f64 = blk.w_c.row(k).iter().zip(ut).map(|(w, x)| w * x).sum();
                    b_bar.set(t, k, blk.gain[k] * bk);
                    c_sel.set(t, k, Complex64::new(ck, 0.0));
                }
            }
            let mut h = Matrix::zeros(d, n);
            let y = shared_dual_chunked(&u, &b_bar, &c_sel, &blk.a_bar, &mut h, DUAL_CHUNK)?;
            for t in 0..t_len {
                let (yt, ut) = (y.row(t), u.row(t));
                let zt = z.row_mut(t);
                for (o, zo) in zt.iter_mut().enumerate() {
                    let wrow = blk.out_w.row(o);
                    let mut acc = blk.out_b[o];
                    for c in 0..d {
                        acc += wrow[c] * (yt[c] + blk.d * ut[c]);
                    }
                    *zo = acc;
                }
            }
        }
        Ok((0..t_len)
            .map(|t| {
                self.readout_b
                    + z.row(t)
                        .iter()
                        .zip(&self.readout_w)
                        .map(|(a, b)| a * b)
                        .sum::<f64>()
            })
            .collect())
    }

    /// Per-pixel batch normalization of a whole video (`T × H·W·C`).
    pub fn normalize_batch(&self, video: &FrameTensor) -> Result<Vec<f32>, ModelError> {
        self.check_video(video)?;
        let (t_len, n) = (video.frames(), video.frame_len());
        let data = video.data();
        let mut out = vec![0.0f32; data.len()];
        let mut series = vec![0.0f64; t_len];
        for p in 0..n {
            for (t, s) in series.iter_mut().enumerate() {
                *s = data[t * n + p] as f64;
            }
            tn_batch_in_place(&mut series)?;
            for (t, &s) in series.iter().enumerate() {
                out[t * n + p] = s as f32;
            }
        }
        Ok(out)
    }

    fn check_video(&self, video: &FrameTensor) -> Result<(), ModelError> {
        let cfg = &self.cfg;
        if (video.height(), video.width(), video.channels())
            != (cfg.input_h, cfg.input_w, cfg.in_channels)
        {
            return Err(ModelError::Shape(format!(
                "video is {}×{}×{}, model expects {}×{}×{}",
                video.height(),
                video.width(),
                video.channels(),
                cfg.input_h,
                cfg.input_w,
                cfg.in_channels
            )));
        }
        if video.frames() < 2 {
            return Err(ModelError::TooShort(video.frames()));
        }
        if (video.fps() as f64 - cfg.fps).abs() > 1e-3 * cfg.fps {
            log::warn!(
                "video is {} fps but the model was discretized for {} fps",
                video.fps(),
                cfg.fps
            );
        }
        Ok(())
    }

    /// Whole-sequence forward pass on already-normalized frames.
    pub fn forward_normalized(&self, frames: &[f32], t_len: usize) -> Result<Vec<f64>, ModelError> {
        let feats = self.encode_sequence(frames, t_len)?;
        self.temporal_forward(&feats)
    }

    /// Normalizes every pixel series over the whole clip, then runs
    /// [`Model::forward_normalized`].
    pub fn forward_batch(&self, video: &FrameTensor) -> Result<BvpSignal, ModelError> {
        let frames = self.normalize_batch(video)?;
        let bvp = self.forward_normalized(&frames, video.frames())?;
        Ok(BvpSignal::new(bvp, video.fps() as f64, 0.0)?)
    }
}
