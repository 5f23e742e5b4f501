use num_complex::Complex64;

use super::{check_dim, DiscreteSSM, SsmError};
use crate::matrix::{Matrix, Sample};

/// The carried complex hidden state `h`, one entry per diagonal mode.
#[derive(Debug, Clone, PartialEq)]
pub struct SSMState {
    h: Vec<Complex64>,
}

impl SSMState {
    pub fn zeros(n_state: usize) -> Self {
        Self {
            h: vec![Complex64::new(0.0, 0.0); n_state],
        }
    }

    pub fn from_vec(h: Vec<Complex64>) -> Self {
        Self { h }
    }

    pub fn n_state(&self) -> usize {
        self.h.len()
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.h
    }

    pub fn as_mut_slice(&mut self) -> &mut [Complex64] {
        &mut self.h
    }

    /// Euclidean norm over all modes.
    pub fn norm(&self) -> f64 {
        self.h.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.h.iter().all(|v| v.is_finite())
    }
}

/// `h ← ā ⊙ h + B̄ x`, then `y = Re(C h) + D x`. Writes `y` into `out`.
fn step_in_place(h: &mut [Complex64], x: &[f64], sys: &DiscreteSSM, out: &mut [f64]) {
    let b_bar = sys.b_bar();
    for (k, (hk, &a)) in h.iter_mut().zip(sys.a_bar()).enumerate() {
        let drive: Complex64 = b_bar.row(k).iter().zip(x).map(|(&b, &xi)| b * xi).sum();
        *hk = a * *hk + drive;
    }
    for (o, y) in out.iter_mut().enumerate() {
        let state: f64 = sys
            .c()
            .row(o)
            .iter()
            .zip(h.iter())
            .map(|(c, hk)| (c * hk).re)
            .sum();
        let skip: f64 = sys.d().row(o).iter().zip(x).map(|(d, xi)| d * xi).sum();
        *y = state + skip;
    }
}

/// One step of the discrete recurrence. Returns the next state and the output.
pub fn recurrent_step<S: Sample>(
    state: &SSMState,
    x_t: &[S],
    sys: &DiscreteSSM,
) -> Result<(SSMState, Vec<f64>), SsmError> {
    check_dim("state length", sys.n_state(), state.n_state())?;
    check_dim("input width", sys.d_in(), x_t.len())?;
    let x: Vec<f64> = x_t.iter().map(|v| v.to_f64()).collect();
    let mut next = state.clone();
    let mut y = vec![0.0; sys.d_out()];
    step_in_place(&mut next.h, &x, sys, &mut y);
    Ok((next, y))
}

/// Folds [`recurrent_step`] over the rows of `x` (`T × d_in`).
///
/// Returns the `T × d_out` outputs and the final state, which can seed a
/// later call to continue the same stream.
pub fn recurrent_scan<S: Sample>(
    x: &Matrix<S>,
    sys: &DiscreteSSM,
    init: &SSMState,
) -> Result<(Matrix<S>, SSMState), SsmError> {
    if x.rows() == 0 {
        return Err(SsmError::EmptySequence);
    }
    check_dim("state length", sys.n_state(), init.n_state())?;
    check_dim("input width", sys.d_in(), x.cols())?;
    let mut h = init.h.clone();
    let mut xf = vec![0.0; x.cols()];
    let mut yf = vec![0.0; sys.d_out()];
    let mut out = Matrix::zeros(x.rows(), sys.d_out());
    for t in 0..x.rows() {
        for (dst, v) in xf.iter_mut().zip(x.row(t)) {
            *dst = v.to_f64();
        }
        step_in_place(&mut h, &xf, sys, &mut yf);
        for (dst, &v) in out.row_mut(t).iter_mut().zip(&yf) {
            *dst = S::from_f64(v);
        }
    }
    Ok((out, SSMState { h }))
}

pub(super) fn check_sequences(
    t_len: usize,
    n: usize,
    d_in: usize,
    b_bar_seq: &[Matrix<Complex64>],
    c_seq: &[Matrix<Complex64>],
) -> Result<usize, SsmError> {
    if t_len == 0 {
        return Err(SsmError::EmptySequence);
    }
    check_dim("length of B̄ sequence", t_len, b_bar_seq.len())?;
    check_dim("length of C sequence", t_len, c_seq.len())?;
    let d_out = c_seq[0].rows();
    for (b, c) in b_bar_seq.iter().zip(c_seq) {
        check_dim("rows of B̄_t", n, b.rows())?;
        check_dim("columns of B̄_t", d_in, b.cols())?;
        check_dim("columns of C_t", n, c.cols())?;
        check_dim("rows of C_t", d_out, c.rows())?;
    }
    Ok(d_out)
}

/// Recurrence with per-timestep (input-dependent) `B̄_t` and `C_t`.
///
/// `h_t = ā ⊙ h_{t-1} + B̄_t x_t`, `y_t = Re(C_t h_t)`. No feedforward term;
/// callers add `D x_t` themselves. This is the reference the dual form is
/// checked against.
pub fn selective_scan<S: Sample>(
    x: &Matrix<S>,
    b_bar_seq: &[Matrix<Complex64>],
    c_seq: &[Matrix<Complex64>],
    a_bar: &[Complex64],
    init: &SSMState,
) -> Result<(Matrix<S>, SSMState), SsmError> {
    let n = a_bar.len();
    let d_out = check_sequences(x.rows(), n, x.cols(), b_bar_seq, c_seq)?;
    check_dim("state length", n, init.n_state())?;
    let mut h = init.h.clone();
    let mut out = Matrix::zeros(x.rows(), d_out);
    for t in 0..x.rows() {
        let xt = x.row(t);
        let b = &b_bar_seq[t];
        for (k, hk) in h.iter_mut().enumerate() {
            let drive: Complex64 = b
                .row(k)
                .iter()
                .zip(xt)
                .map(|(&bk, xi)| bk * xi.to_f64())
                .sum();
            *hk = a_bar[k] * *hk + drive;
        }
        let c = &c_seq[t];
        for (o, y) in out.row_mut(t).iter_mut().enumerate() {
            let v: f64 = c.row(o).iter().zip(&h).map(|(ck, hk)| (ck * hk).re).sum();
            *y = S::from_f64(v);
        }
    }
    Ok((out, SSMState { h }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn col(v: &[f64]) -> Matrix<f64> {
        Matrix::from_vec(v.len(), 1, v.to_vec()).unwrap()
    }

    #[test]
    fn zero_in_zero_out() {
        let sys = DiscreteSSM::scalar(0.5, 1.0, 1.0, 0.3, 0.1).unwrap();
        let (h, y) = recurrent_step(&SSMState::zeros(1), &[0.0f64], &sys).unwrap();
        assert_eq!(h, SSMState::zeros(1));
        assert_eq!(y, vec![0.0]);
    }

    #[test]
    fn hand_arithmetic_steps() {
        let h0 = SSMState::from_vec(vec![Complex64::new(1.0, 0.0)]);
        let sys = DiscreteSSM::scalar(0.5, 1.0, 1.0, 0.0, 1.0).unwrap();
        let (h, y) = recurrent_step(&h0, &[1.0f64], &sys).unwrap();
        assert_eq!(h.as_slice()[0], Complex64::new(1.5, 0.0));
        assert_eq!(y, vec![1.5]);

        let sys = DiscreteSSM::scalar(0.5, 1.0, 0.0, 2.0, 1.0).unwrap();
        let (h, y) = recurrent_step(&h0, &[3.0f64], &sys).unwrap();
        assert_eq!(h.as_slice()[0], Complex64::new(3.5, 0.0));
        assert_eq!(y, vec![6.0]);
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let sys = DiscreteSSM::scalar(0.5, 1.0, 1.0, 0.0, 1.0).unwrap();
        assert!(matches!(
            recurrent_step(&SSMState::zeros(2), &[1.0f64], &sys),
            Err(SsmError::DimensionMismatch { .. })
        ));
        assert!(recurrent_step(&SSMState::zeros(1), &[1.0f64, 2.0], &sys).is_err());
        let x: Matrix<f64> = Matrix::zeros(0, 1);
        assert_eq!(
            recurrent_scan(&x, &sys, &SSMState::zeros(1)).unwrap_err(),
            SsmError::EmptySequence
        );
    }

    #[test]
    fn single_step_closed_form() {
        let sys = DiscreteSSM::scalar(0.9, 0.7, 1.3, 0.2, 1.0).unwrap();
        let (y, _) = recurrent_scan(&col(&[2.0]), &sys, &SSMState::zeros(1)).unwrap();
        assert!((y.get(0, 0) - (1.3 * 0.7 * 2.0 + 0.2 * 2.0)).abs() < 1e-15);
    }

    #[test]
    fn zero_sequence_from_rest() {
        let sys = DiscreteSSM::scalar(0.9, 0.7, 1.3, 0.2, 1.0).unwrap();
        let (y, fin) = recurrent_scan(&col(&[0.0; 8]), &sys, &SSMState::zeros(1)).unwrap();
        assert!(y.as_slice().iter().all(|&v| v == 0.0));
        assert_eq!(fin, SSMState::zeros(1));
    }

    #[test]
    fn four_step_unroll() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
        let sys = DiscreteSSM::scalar(0.5, 1.0, 1.0, 0.0, 1.0).unwrap();
        let (y, fin) = recurrent_scan(&col(&x), &sys, &SSMState::zeros(1)).unwrap();
        let h1 = x[0];
        let h2 = 0.5 * h1 + x[1];
        let h3 = 0.5 * h2 + x[2];
        let h4 = 0.5 * h3 + x[3];
        for (t, h) in [h1, h2, h3, h4].into_iter().enumerate() {
            assert!((y.get(t, 0) - h).abs() < 1e-15);
        }
        assert!((fin.as_slice()[0].re - h4).abs() < 1e-15);
    }

    #[test]
    fn scan_splits_into_continued_scans() {
        let sys = DiscreteSSM::from_parts(
            vec![Complex64::from_polar(0.95, 0.3), Complex64::new(0.2, 0.0)],
            Matrix::from_vec(2, 1, vec![Complex64::new(1.0, 0.5), Complex64::new(-0.3, 0.0)])
                .unwrap(),
            Matrix::from_vec(1, 2, vec![Complex64::new(0.4, -0.1), Complex64::new(1.0, 0.0)])
                .unwrap(),
            Matrix::from_vec(1, 1, vec![0.1]).unwrap(),
            0.1,
        )
        .unwrap();
        let x: Vec<f64> = (0..20).map(|t| (t as f64 * 0.7).sin()).collect();
        let (whole, end) = recurrent_scan(&col(&x), &sys, &SSMState::zeros(2)).unwrap();
        let (a, mid) = recurrent_scan(&col(&x[..7]), &sys, &SSMState::zeros(2)).unwrap();
        let (b, end2) = recurrent_scan(&col(&x[7..]), &sys, &mid).unwrap();
        let joined: Vec<f64> = a.as_slice().iter().chain(b.as_slice()).copied().collect();
        assert_eq!(whole.as_slice(), &joined[..]);
        assert_eq!(end, end2);
    }
}
