use num_complex::Complex64;

use super::{check_dim, ComplexDiag, SsmError};
use crate::matrix::Matrix;

/// Below this `|λ·Δt|` the input gain uses its analytic limit `Δt`.
pub const ZOH_LIMIT: f64 = 1e-8;

/// Continuous-time system `h' = A h + B x`, `y = Re(C h) + D x` with diagonal `A`.
#[derive(Debug, Clone, PartialEq)]
pub struct ContinuousSSM {
    a: ComplexDiag,
    b: Matrix<f64>,
    c: Matrix<Complex64>,
    d: Matrix<f64>,
}

impl ContinuousSSM {
    /// `b` is `n_state × d_in`, `c` is `d_out × n_state`, `d` is `d_out × d_in`.
    pub fn new(
        a: ComplexDiag,
        b: Matrix<f64>,
        c: Matrix<Complex64>,
        d: Matrix<f64>,
    ) -> Result<Self, SsmError> {
        let n = a.n_state();
        check_dim("rows of B", n, b.rows())?;
        check_dim("columns of C", n, c.cols())?;
        check_dim("rows of D", c.rows(), d.rows())?;
        check_dim("columns of D", b.cols(), d.cols())?;
        if !b.as_slice().iter().all(|v| v.is_finite()) {
            return Err(SsmError::NonFinite("B"));
        }
        if !c.as_slice().iter().all(|v| v.is_finite()) {
            return Err(SsmError::NonFinite("C"));
        }
        if !d.as_slice().iter().all(|v| v.is_finite()) {
            return Err(SsmError::NonFinite("D"));
        }
        Ok(Self { a, b, c, d })
    }

    /// Single-input single-output system with per-state `b` and real `c`.
    pub fn siso(a: ComplexDiag, b: &[f64], c: &[f64], d: f64) -> Result<Self, SsmError> {
        let n = a.n_state();
        check_dim("length of b", n, b.len())?;
        check_dim("length of c", n, c.len())?;
        Self::new(
            a,
            Matrix::from_vec(n, 1, b.to_vec()).expect("shape checked"),
            Matrix::from_fn(1, n, |_, k| Complex64::new(c[k], 0.0)),
            Matrix::from_vec(1, 1, vec![d]).expect("1x1"),
        )
    }

    pub fn a(&self) -> &ComplexDiag {
        &self.a
    }
    pub fn b(&self) -> &Matrix<f64> {
        &self.b
    }
    pub fn c(&self) -> &Matrix<Complex64> {
        &self.c
    }
    pub fn d(&self) -> &Matrix<f64> {
        &self.d
    }
    pub fn n_state(&self) -> usize {
        self.a.n_state()
    }
    pub fn d_in(&self) -> usize {
        self.b.cols()
    }
    pub fn d_out(&self) -> usize {
        self.c.rows()
    }
}

/// Discrete-time system after zero-order hold: `h_t = Ā ⊙ h_{t-1} + B̄ x_t`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteSSM {
    a_bar: Vec<Complex64>,
    b_bar: Matrix<Complex64>,
    c: Matrix<Complex64>,
    d: Matrix<f64>,
    dt: f64,
}

impl DiscreteSSM {
    /// Assembles a discrete system directly. Every `|a_bar[k]|` must be below one.
    pub fn from_parts(
        a_bar: Vec<Complex64>,
        b_bar: Matrix<Complex64>,
        c: Matrix<Complex64>,
        d: Matrix<f64>,
        dt: f64,
    ) -> Result<Self, SsmError> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(SsmError::InvalidStep(dt));
        }
        let n = a_bar.len();
        check_dim("rows of B̄", n, b_bar.rows())?;
        check_dim("columns of C", n, c.cols())?;
        check_dim("rows of D", c.rows(), d.rows())?;
        check_dim("columns of D", b_bar.cols(), d.cols())?;
        for (index, a) in a_bar.iter().enumerate() {
            let modulus = a.norm();
            if !(modulus < 1.0) {
                return Err(SsmError::UnstableTransition { index, modulus });
            }
        }
        Ok(Self {
            a_bar,
            b_bar,
            c,
            d,
            dt,
        })
    }

    /// Scalar real system, convenient for hand-checked examples.
    pub fn scalar(a_bar: f64, b_bar: f64, c: f64, d: f64, dt: f64) -> Result<Self, SsmError> {
        Self::from_parts(
            vec![Complex64::new(a_bar, 0.0)],
            Matrix::from_vec(1, 1, vec![Complex64::new(b_bar, 0.0)]).expect("1x1"),
            Matrix::from_vec(1, 1, vec![Complex64::new(c, 0.0)]).expect("1x1"),
            Matrix::from_vec(1, 1, vec![d]).expect("1x1"),
            dt,
        )
    }

    pub fn a_bar(&self) -> &[Complex64] {
        &self.a_bar
    }
    pub fn b_bar(&self) -> &Matrix<Complex64> {
        &self.b_bar
    }
    pub fn c(&self) -> &Matrix<Complex64> {
        &self.c
    }
    pub fn d(&self) -> &Matrix<f64> {
        &self.d
    }
    pub fn dt(&self) -> f64 {
        self.dt
    }
    pub fn n_state(&self) -> usize {
        self.a_bar.len()
    }
    pub fn d_in(&self) -> usize {
        self.b_bar.cols()
    }
    pub fn d_out(&self) -> usize {
        self.c.rows()
    }

    /// Largest `|a_bar[k]|`.
    pub fn spectral_radius(&self) -> f64 {
        self.a_bar.iter().map(|a| a.norm()).fold(0.0, f64::max)
    }
}

/// `exp(z) - 1` without cancellation for small `|z|`.
fn expm1(z: Complex64) -> Complex64 {
    let half_sin = (z.im * 0.5).sin();
    Complex64::new(
        z.re.exp_m1() * z.im.cos() - 2.0 * half_sin * half_sin,
        z.re.exp() * z.im.sin(),
    )
}

/// Per-state zero-order-hold input gain `∫₀^Δt e^{λτ} dτ = (e^{λΔt} - 1)/λ`.
///
/// Falls back to `Δt` when `|λ·Δt| < ZOH_LIMIT`.
pub fn zoh_input_gain(lambda: Complex64, dt: f64) -> Complex64 {
    let z = lambda * dt;
    if z.norm() < ZOH_LIMIT {
        Complex64::new(dt, 0.0)
    } else {
        expm1(z) / lambda
    }
}

/// Exact discretization of `sys` under a zero-order hold of length `dt` seconds.
///
/// For diagonal `A` this is elementwise: `ā_k = e^{λ_k Δt}` and row `k` of `B̄`
/// is row `k` of `B` scaled by [`zoh_input_gain`]. `C` and `D` are copied.
pub fn zoh_discretize(sys: &ContinuousSSM, dt: f64) -> Result<DiscreteSSM, SsmError> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(SsmError::InvalidStep(dt));
    }
    let n = sys.n_state();
    let mut a_bar = Vec::with_capacity(n);
    let mut b_bar = Matrix::zeros(n, sys.d_in());
    for (k, lambda) in sys.a().eigenvalues().enumerate() {
        if !lambda.is_finite() {
            return Err(SsmError::NonFiniteEigenvalue {
                index: k,
                re: lambda.re,
                im: lambda.im,
            });
        }
        a_bar.push((lambda * dt).exp());
        let gain = zoh_input_gain(lambda, dt);
        for (dst, &b) in b_bar.row_mut(k).iter_mut().zip(sys.b().row(k)) {
            *dst = gain * b;
        }
    }
    Ok(DiscreteSSM {
        a_bar,
        b_bar,
        c: sys.c().clone(),
        d: sys.d().clone(),
        dt,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn scalar_sys(lambda: Complex64, b: f64) -> ContinuousSSM {
        ContinuousSSM::siso(
            ComplexDiag::new_unchecked(vec![lambda.re], vec![lambda.im]),
            &[b],
            &[1.0],
            0.0,
        )
        .unwrap()
    }

    #[test]
    fn zero_eigenvalue_uses_limit() {
        for dt in [1e-3, 0.5, 7.0] {
            let d = zoh_discretize(&scalar_sys(Complex64::new(0.0, 0.0), 1.0), dt).unwrap();
            assert_eq!(d.a_bar()[0], Complex64::new(1.0, 0.0));
            assert_eq!(d.b_bar().get(0, 0), Complex64::new(dt, 0.0));
        }
    }

    #[test]
    fn unit_decay_matches_closed_form() {
        let d = zoh_discretize(&scalar_sys(Complex64::new(-1.0, 0.0), 1.0), 1.0).unwrap();
        // e^-1 and 1 - e^-1 to 15 digits
        assert!((d.a_bar()[0].re - 0.367_879_441_171_442_3).abs() < 1e-15);
        assert!((d.b_bar().get(0, 0).re - 0.632_120_558_828_557_7).abs() < 1e-15);
        assert_eq!(d.a_bar()[0].im, 0.0);
    }

    #[test]
    fn half_turn_rotation() {
        let lambda = Complex64::new(-1e-6, PI);
        let d = zoh_discretize(&scalar_sys(lambda, 1.0), 1.0).unwrap();
        let a = d.a_bar()[0];
        // Euler: e^{-1e-6}(cos π + i sin π)
        assert!((a.norm() - (-1e-6f64).exp()).abs() < 1e-15);
        assert!((a.re + (-1e-6f64).exp()).abs() < 1e-15);
        assert!(a.im.abs() < 1e-15);
        assert!((a.arg().abs() - PI).abs() < 1e-12);
    }

    #[test]
    fn limit_branch_is_continuous() {
        let dt = 0.1;
        let below = zoh_input_gain(Complex64::new(-0.9e-7, 0.0), dt);
        let above = zoh_input_gain(Complex64::new(-1.1e-7, 0.0), dt);
        // first-order limit differs from the exact gain by about dt·|λΔt|/2
        assert!((below - above).norm() < dt * 1.1e-8);
        // expm1 path keeps full accuracy just above the threshold
        let z = Complex64::new(-2e-8, 3e-8);
        let exact = 1.0 + z / 2.0 + z * z / 6.0;
        assert!((zoh_input_gain(z, 1.0) - exact).norm() < 1e-15);
    }

    #[test]
    fn rejects_bad_step_and_nonfinite() {
        let s = scalar_sys(Complex64::new(-1.0, 0.0), 1.0);
        assert_eq!(zoh_discretize(&s, 0.0), Err(SsmError::InvalidStep(0.0)));
        assert!(zoh_discretize(&s, f64::NAN).is_err());
        let bad = ContinuousSSM::siso(
            ComplexDiag::new_unchecked(vec![-1.0, f64::INFINITY], vec![0.0, 0.0]),
            &[1.0, 1.0],
            &[1.0, 1.0],
            0.0,
        )
        .unwrap();
        let err = zoh_discretize(&bad, 0.1).unwrap_err();
        assert!(matches!(err, SsmError::NonFiniteEigenvalue { index: 1, .. }));
        assert!(err.to_string().contains("eigenvalue 1"));
    }

    #[test]
    fn shapes_are_validated() {
        let a = ComplexDiag::new(vec![-1.0, -2.0], vec![0.0, 1.0]).unwrap();
        let err = ContinuousSSM::new(
            a,
            Matrix::zeros(3, 1),
            Matrix::zeros(1, 2),
            Matrix::zeros(1, 1),
        );
        assert!(matches!(err, Err(SsmError::DimensionMismatch { .. })));
    }

    #[test]
    fn from_parts_rejects_marginal_transition() {
        assert!(matches!(
            DiscreteSSM::scalar(1.0, 1.0, 1.0, 0.0, 1.0),
            Err(SsmError::UnstableTransition { index: 0, .. })
        ));
        assert!(DiscreteSSM::scalar(0.5, 1.0, 1.0, 0.0, 1.0).is_ok());
    }
}
