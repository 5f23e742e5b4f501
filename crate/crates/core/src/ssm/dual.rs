//! Masked-attention ("dual") evaluation of the diagonal SSM.
//!
//! Over a block of `m` steps the recurrence unrolls to
//!
//! ```text
//! y_t = Re( Σ_k C_t[:, k] · ( Σ_{s ≤ t} L_k[t, s] · B̄_s[k, :] x_s  +  ā_k^(t+1) h_k ) )
//! ```
//!
//! which is `(L ⊙ (C B̄)) X` plus the contribution of the state `h` carried in
//! from earlier blocks. Long sequences are split into blocks of [`DUAL_CHUNK`]
//! steps so the mask is never larger than `DUAL_CHUNK × DUAL_CHUNK`; the state
//! passed between blocks is exactly the recurrent state at the block boundary.

use num_complex::Complex64;

use super::scan::check_sequences;
use super::{check_dim, CausalMask, SSMState, SsmError};
use crate::matrix::{Matrix, Sample};

/// Block length used when a sequence is too long for one mask.
pub const DUAL_CHUNK: usize = 64;
/// Longest sequence evaluated with a single full-length mask.
pub const DUAL_FULL_MAX: usize = 512;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Parallel form of [`super::selective_scan`] starting from rest.
///
/// `b_bar_seq[t]` is `n_state × d_in`, `c_seq[t]` is `d_out × n_state`. The
/// feedforward term is left to the caller. Sequences up to [`DUAL_FULL_MAX`]
/// steps use one mask; longer ones are processed in [`DUAL_CHUNK`]-step blocks.
pub fn dual_form_apply<S: Sample>(
    x: &Matrix<S>,
    b_bar_seq: &[Matrix<Complex64>],
    c_seq: &[Matrix<Complex64>],
    a_bar: &[Complex64],
) -> Result<Matrix<S>, SsmError> {
    let chunk = if x.rows() <= DUAL_FULL_MAX {
        x.rows().max(1)
    } else {
        DUAL_CHUNK
    };
    let init = SSMState::zeros(a_bar.len());
    dual_form_apply_chunked(x, b_bar_seq, c_seq, a_bar, &init, chunk).map(|(y, _)| y)
}

/// Block-wise dual form with an explicit initial state and block length.
/// Returns the outputs and the state after the last step.
pub fn dual_form_apply_chunked<S: Sample>(
    x: &Matrix<S>,
    b_bar_seq: &[Matrix<Complex64>],
    c_seq: &[Matrix<Complex64>],
    a_bar: &[Complex64],
    init: &SSMState,
    chunk: usize,
) -> Result<(Matrix<S>, SSMState), SsmError> {
    let n = a_bar.len();
    let d_out = check_sequences(x.rows(), n, x.cols(), b_bar_seq, c_seq)?;
    check_dim("state length", n, init.n_state())?;
    let chunk = chunk.clamp(1, x.rows());
    // powers up to ā^chunk: the carried state needs one more than the mask
    let masks = CausalMask::build_all(a_bar, chunk + 1)?;

    let mut h = init.as_slice().to_vec();
    let mut out = Matrix::zeros(x.rows(), d_out);
    let mut u = vec![ZERO; chunk];
    let mut acc = vec![0.0f64; chunk * d_out];

    let mut start = 0;
    while start < x.rows() {
        let m = chunk.min(x.rows() - start);
        acc[..m * d_out].fill(0.0);
        for (k, mask) in masks.iter().enumerate() {
            // u_s = B̄_s[k, :] · x_s
            for (s, us) in u[..m].iter_mut().enumerate() {
                let row = b_bar_seq[start + s].row(k);
                *us = row
                    .iter()
                    .zip(x.row(start + s))
                    .map(|(&b, xi)| b * xi.to_f64())
                    .sum();
            }
            let carry = h[k];
            let mut last = ZERO;
            for t in 0..m {
                let mut z = mask.power(t + 1) * carry;
                for (s, &us) in u[..=t].iter().enumerate() {
                    z += mask.get(t, s) * us;
                }
                let c = &c_seq[start + t];
                for (o, a) in acc[t * d_out..(t + 1) * d_out].iter_mut().enumerate() {
                    *a += (c.get(o, k) * z).re;
                }
                last = z;
            }
            h[k] = last;
        }
        for t in 0..m {
            for (dst, &v) in out
                .row_mut(start + t)
                .iter_mut()
                .zip(&acc[t * d_out..(t + 1) * d_out])
            {
                *dst = S::from_f64(v);
            }
        }
        start += m;
    }
    Ok((out, SSMState::from_vec(h)))
}

/// Dual form for `D` independent single-input channels sharing one set of
/// per-step `B̄_t` and `C_t` (rows of `b_bar` / `c`, each `T × n_state`).
///
/// Within a block this is literally `(L ⊙ (C B̄ᵀ)) · V`: one `m × m` score
/// matrix is formed and applied to every channel of `v` (`T × D`). `h`
/// (`D × n_state`) holds the carried states and is updated in place.
/// Returns `T × D` outputs without a feedforward term.
pub fn shared_dual_chunked(
    v: &Matrix<f64>,
    b_bar: &Matrix<Complex64>,
    c: &Matrix<Complex64>,
    a_bar: &[Complex64],
    h: &mut Matrix<Complex64>,
    chunk: usize,
) -> Result<Matrix<f64>, SsmError> {
    let (t_len, d) = v.shape();
    let n = a_bar.len();
    if t_len == 0 {
        return Err(SsmError::EmptySequence);
    }
    check_dim("rows of B̄", t_len, b_bar.rows())?;
    check_dim("rows of C", t_len, c.rows())?;
    check_dim("columns of B̄", n, b_bar.cols())?;
    check_dim("columns of C", n, c.cols())?;
    check_dim("state channels", d, h.rows())?;
    check_dim("state length", n, h.cols())?;
    let chunk = chunk.clamp(1, t_len);
    let masks = CausalMask::build_all(a_bar, chunk + 1)?;

    let mut out = Matrix::zeros(t_len, d);
    let mut scores = vec![0.0f64; chunk * chunk];
    let mut start = 0;
    while start < t_len {
        let m = chunk.min(t_len - start);
        // G[t, s] = Re Σ_k C_t[k] ā_k^(t-s) B̄_s[k]
        for t in 0..m {
            let ct = c.row(start + t);
            for s in 0..=t {
                let bs = b_bar.row(start + s);
                let mut g = 0.0;
                for k in 0..n {
                    g += (ct[k] * masks[k].power(t - s) * bs[k]).re;
                }
                scores[t * chunk + s] = g;
            }
        }
        for t in 0..m {
            let row = out.row_mut(start + t);
            for s in 0..=t {
                let g = scores[t * chunk + s];
                for (y, &vs) in row.iter_mut().zip(v.row(start + s)) {
                    *y += g * vs;
                }
            }
            // carried-state contribution
            let ct = c.row(start + t);
            for (ch, y) in row.iter_mut().enumerate() {
                let hc = h.row(ch);
                let mut acc = 0.0;
                for k in 0..n {
                    acc += (ct[k] * masks[k].power(t + 1) * hc[k]).re;
                }
                *y += acc;
            }
        }
        for ch in 0..d {
            let hc = h.row_mut(ch);
            for (k, hk) in hc.iter_mut().enumerate() {
                let mut next = masks[k].power(m) * *hk;
                for s in 0..m {
                    next += masks[k].power(m - 1 - s) * b_bar.get(start + s, k) * v.get(start + s, ch);
                }
                *hk = next;
            }
        }
        start += m;
    }
    Ok(out)
}

/// One recurrent step of the shared-kernel system in [`shared_dual_chunked`].
pub fn shared_recurrent_step(
    h: &mut Matrix<Complex64>,
    v: &[f64],
    b_bar_t: &[Complex64],
    c_t: &[Complex64],
    a_bar: &[Complex64],
    y: &mut [f64],
) {
    debug_assert_eq!(h.rows(), v.len());
    for (ch, (&vc, yc)) in v.iter().zip(y.iter_mut()).enumerate() {
        let hc = h.row_mut(ch);
        let mut acc = 0.0;
        for k in 0..a_bar.len() {
            hc[k] = a_bar[k] * hc[k] + b_bar_t[k] * vc;
            acc += (c_t[k] * hc[k]).re;
        }
        *yc = acc;
    }
}

#[cfg(test)]
mod tests {
    use super::super::selective_scan;
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rand_c(rng: &mut ChaCha8Rng) -> Complex64 {
        Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    }

    fn random_problem(
        seed: u64,
        t: usize,
        n: usize,
        d_in: usize,
        d_out: usize,
    ) -> (Matrix<f64>, Vec<Matrix<Complex64>>, Vec<Matrix<Complex64>>, Vec<Complex64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = Matrix::from_fn(t, d_in, |_, _| rng.random_range(-1.0..1.0));
        let b = (0..t)
            .map(|_| Matrix::from_fn(n, d_in, |_, _| rand_c(&mut rng)))
            .collect();
        let c = (0..t)
            .map(|_| Matrix::from_fn(d_out, n, |_, _| rand_c(&mut rng)))
            .collect();
        let a = (0..n)
            .map(|_| Complex64::from_polar(rng.random_range(0.0..0.99), rng.random_range(-3.0..3.0)))
            .collect();
        (x, b, c, a)
    }

    #[test]
    fn single_step_is_product() {
        let (x, b, c, a) = random_problem(1, 1, 3, 2, 2);
        let y = dual_form_apply(&x, &b, &c, &a).unwrap();
        for o in 0..2 {
            let mut expect = 0.0;
            for k in 0..3 {
                let bx: Complex64 = (0..2).map(|i| b[0].get(k, i) * x.get(0, i)).sum();
                expect += (c[0].get(o, k) * bx).re;
            }
            assert!((y.get(0, o) - expect).abs() < 1e-14);
        }
    }

    #[test]
    fn constant_b_c_matches_scan() {
        let (x, b, c, a) = random_problem(7, 4, 2, 1, 1);
        let b = vec![b[0].clone(); 4];
        let c = vec![c[0].clone(); 4];
        let y = dual_form_apply(&x, &b, &c, &a).unwrap();
        let (r, _) = selective_scan(&x, &b, &c, &a, &SSMState::zeros(2)).unwrap();
        for (p, q) in y.as_slice().iter().zip(r.as_slice()) {
            assert!((p - q).abs() < 1e-13);
        }
    }

    #[test]
    fn zero_transition_is_memoryless() {
        let (x, b, c, _) = random_problem(3, 6, 4, 2, 3);
        let a = vec![ZERO; 4];
        let y = dual_form_apply(&x, &b, &c, &a).unwrap();
        for t in 0..6 {
            let xt = Matrix::from_vec(1, 2, x.row(t).to_vec()).unwrap();
            let yt = dual_form_apply(&xt, &b[t..t + 1], &c[t..t + 1], &a).unwrap();
            assert_eq!(y.row(t), yt.row(0));
        }
    }

    #[test]
    fn chunked_matches_full_and_returns_state() {
        let (x, b, c, a) = random_problem(11, 150, 5, 2, 3);
        let init = SSMState::zeros(5);
        let (full, h_full) = dual_form_apply_chunked(&x, &b, &c, &a, &init, 150).unwrap();
        let (ch, h_ch) = dual_form_apply_chunked(&x, &b, &c, &a, &init, 16).unwrap();
        let (rec, h_rec) = selective_scan(&x, &b, &c, &a, &init).unwrap();
        for ((p, q), r) in full.as_slice().iter().zip(ch.as_slice()).zip(rec.as_slice()) {
            assert!((p - q).abs() < 1e-10);
            assert!((p - r).abs() < 1e-10);
        }
        for ((p, q), r) in h_full.as_slice().iter().zip(h_ch.as_slice()).zip(h_rec.as_slice()) {
            assert!((p - q).norm() < 1e-10);
            assert!((p - r).norm() < 1e-10);
        }
    }

    #[test]
    fn length_mismatch_rejected() {
        let (x, b, c, a) = random_problem(2, 5, 2, 1, 1);
        assert!(matches!(
            dual_form_apply(&x, &b[..4], &c, &a),
            Err(SsmError::DimensionMismatch { .. })
        ));
        assert!(dual_form_apply(&x, &b, &c[..3], &a).is_err());
        assert!(dual_form_apply(&x, &b, &c, &a[..1]).is_err());
    }

    #[test]
    fn shared_dual_matches_shared_steps() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (t, d, n) = (200, 6, 4);
        let v = Matrix::from_fn(t, d, |_, _| rng.random_range(-1.0..1.0));
        let b = Matrix::from_fn(t, n, |_, _| rand_c(&mut rng));
        let c = Matrix::from_fn(t, n, |_, _| rand_c(&mut rng));
        let a: Vec<Complex64> = (0..n)
            .map(|_| Complex64::from_polar(rng.random_range(0.5..0.999), rng.random_range(-1.0..1.0)))
            .collect();
        let h0 = Matrix::from_fn(d, n, |_, _| rand_c(&mut rng));

        let mut h_dual = h0.clone();
        let y_dual = shared_dual_chunked(&v, &b, &c, &a, &mut h_dual, 64).unwrap();

        let mut h_rec = h0;
        let mut y = vec![0.0; d];
        for s in 0..t {
            shared_recurrent_step(&mut h_rec, v.row(s), b.row(s), c.row(s), &a, &mut y);
            for ch in 0..d {
                assert!((y[ch] - y_dual.get(s, ch)).abs() < 1e-10, "t={s} ch={ch}");
            }
        }
        for (p, q) in h_dual.as_slice().iter().zip(h_rec.as_slice()) {
            assert!((p - q).norm() < 1e-10);
        }
    }
}
