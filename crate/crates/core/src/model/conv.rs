//! Strided 2D convolution with zero "same" padding over channel-last maps.

/// `k × k` kernel, weights laid out `[ky][kx][c_in][c_out]` so the innermost
/// loop runs over contiguous output channels.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv2d {
    pub k: usize,
    pub stride: usize,
    pub c_in: usize,
    pub c_out: usize,
    pub weight: Vec<f32>,
    pub bias: Vec<f32>,
}

impl Conv2d {
    pub fn zeros(k: usize, stride: usize, c_in: usize, c_out: usize) -> Self {
        Self {
            k,
            stride,
            c_in,
            c_out,
            weight: vec![0.0; k * k * c_in * c_out],
            bias: vec![0.0; c_out],
        }
    }

    pub fn weight_dims(&self) -> [usize; 4] {
        [self.k, self.k, self.c_in, self.c_out]
    }

    #[inline]
    pub fn w_index(&self, ky: usize, kx: usize, ci: usize, co: usize) -> usize {
        ((ky * self.k + kx) * self.c_in + ci) * self.c_out + co
    }

    /// Output height and width for an `h × w` input.
    pub fn out_size(&self, h: usize, w: usize) -> (usize, usize) {
        (conv_out_len(h, self.stride), conv_out_len(w, self.stride))
    }

    /// Multiply-accumulates for one application to an `h × w` input.
    pub fn macs(&self, h: usize, w: usize) -> usize {
        let (oh, ow) = self.out_size(h, w);
        oh * ow * self.k * self.k * self.c_in * self.c_out
    }

    /// Convolves `input` (`h × w × c_in`) into `out` (`oh × ow × c_out`).
    pub fn apply(&self, input: &[f32], h: usize, w: usize, out: &mut [f32]) {
        let (oh, ow) = self.out_size(h, w);
        debug_assert_eq!(input.len(), h * w * self.c_in);
        debug_assert_eq!(out.len(), oh * ow * self.c_out);
        let pad = (self.k / 2) as isize;
        let block = self.c_in * self.c_out;
        for oy in 0..oh {
            for ox in 0..ow {
                let acc = &mut out[(oy * ow + ox) * self.c_out..][..self.c_out];
                acc.copy_from_slice(&self.bias);
                for ky in 0..self.k {
                    let iy = (oy * self.stride) as isize + ky as isize - pad;
                    if iy < 0 || iy >= h as isize {
                        continue;
                    }
                    for kx in 0..self.k {
                        let ix = (ox * self.stride) as isize + kx as isize - pad;
                        if ix < 0 || ix >= w as isize {
                            continue;
                        }
                        let px = &input[(iy as usize * w + ix as usize) * self.c_in..][..self.c_in];
                        let wk = &self.weight[(ky * self.k + kx) * block..][..block];
                        for (&x, wrow) in px.iter().zip(wk.chunks_exact(self.c_out)) {
                            for (a, &wv) in acc.iter_mut().zip(wrow) {
                                *a += x * wv;
                            }
                        }
                    }
                }
            }
        }
    }
}

pub fn conv_out_len(n: usize, stride: usize) -> usize {
    (n - 1) / stride + 1
}
