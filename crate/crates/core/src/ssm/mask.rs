use num_complex::Complex64;

use super::SsmError;

/// The 1-semiseparable causal mask `L[i, j] = ā^(i-j)` for `i ≥ j`, zero above
/// the diagonal, for a single diagonal mode.
///
/// `L` is Toeplitz, so only the powers `ā^0 … ā^(T-1)` are stored; dense
/// entries are produced on demand.
#[derive(Debug, Clone, PartialEq)]
pub struct CausalMask {
    powers: Vec<Complex64>,
}

impl CausalMask {
    /// Mask for a strictly decaying mode, `|ā| < 1`.
    pub fn build(a_bar: Complex64, t_len: usize) -> Result<Self, SsmError> {
        let modulus = a_bar.norm();
        if !(modulus < 1.0) {
            return Err(SsmError::UnstableTransition { index: 0, modulus });
        }
        Self::build_marginal(a_bar, t_len)
    }

    /// Also accepts `|ā| = 1` (pure rotation or the all-ones mask), for
    /// diagnostics. Larger moduli are rejected.
    pub fn build_marginal(a_bar: Complex64, t_len: usize) -> Result<Self, SsmError> {
        if t_len == 0 {
            return Err(SsmError::EmptySequence);
        }
        let modulus = a_bar.norm();
        if !(modulus <= 1.0) {
            return Err(SsmError::UnstableTransition { index: 0, modulus });
        }
        let mut powers = Vec::with_capacity(t_len);
        let mut p = Complex64::new(1.0, 0.0);
        for _ in 0..t_len {
            powers.push(p);
            p *= a_bar;
        }
        Ok(Self { powers })
    }

    /// One mask per diagonal mode.
    pub fn build_all(a_bar: &[Complex64], t_len: usize) -> Result<Vec<Self>, SsmError> {
        a_bar
            .iter()
            .enumerate()
            .map(|(index, &a)| {
                Self::build(a, t_len).map_err(|e| match e {
                    SsmError::UnstableTransition { modulus, .. } => {
                        SsmError::UnstableTransition { index, modulus }
                    }
                    other => other,
                })
            })
            .collect()
    }

    pub fn t_len(&self) -> usize {
        self.powers.len()
    }

    /// `ā^lag` for `lag < T`.
    #[inline]
    pub fn power(&self, lag: usize) -> Complex64 {
        self.powers[lag]
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        if i < j {
            Complex64::new(0.0, 0.0)
        } else {
            self.powers[i - j]
        }
    }

    /// Column `j`, rows `0..T` (zeros above the diagonal).
    pub fn column(&self, j: usize) -> Vec<Complex64> {
        (0..self.t_len()).map(|i| self.get(i, j)).collect()
    }

    /// Dense `T × T` row-major entries.
    pub fn to_dense(&self) -> Vec<Complex64> {
        let t = self.t_len();
        let mut out = Vec::with_capacity(t * t);
        for i in 0..t {
            for j in 0..t {
                out.push(self.get(i, j));
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn all_ones_when_marginal() {
        let m = CausalMask::build_marginal(c(1.0), 3).unwrap();
        let expected = [1.0, 0.0, 0.0, 1.0, 1.0, 0.0, 1.0, 1.0, 1.0];
        let dense: Vec<f64> = m.to_dense().iter().map(|v| v.re).collect();
        assert_eq!(dense, expected);
        assert!(CausalMask::build(c(1.0), 3).is_err());
    }

    #[test]
    fn half_decay_powers() {
        let m = CausalMask::build(c(0.5), 3).unwrap();
        let dense: Vec<f64> = m.to_dense().iter().map(|v| v.re).collect();
        assert_eq!(dense, [1.0, 0.0, 0.0, 0.5, 1.0, 0.0, 0.25, 0.5, 1.0]);
    }

    #[test]
    fn quarter_turn_signs() {
        let a = Complex64::from_polar(0.999, PI / 2.0);
        let col = CausalMask::build(a, 5).unwrap().column(0);
        let re: Vec<f64> = col.iter().map(|v| v.re).collect();
        assert!(re[0] > 0.9);
        assert!(re[1].abs() < 1e-12);
        assert!(re[2] < -0.9);
        assert!(re[3].abs() < 1e-12);
        assert!(re[4] > 0.9);
    }

    #[test]
    fn rejects_empty_and_growing() {
        assert_eq!(CausalMask::build(c(0.5), 0), Err(SsmError::EmptySequence));
        assert!(CausalMask::build_marginal(c(1.01), 4).is_err());
        let err = CausalMask::build_all(&[c(0.1), c(2.0)], 4).unwrap_err();
        assert!(matches!(err, SsmError::UnstableTransition { index: 1, .. }));
    }

    #[test]
    fn structure_invariants() {
        let a = Complex64::from_polar(0.97, 0.4);
        let m = CausalMask::build(a, 9).unwrap();
        for i in 0..9 {
            assert_eq!(m.get(i, i), c(1.0));
            for j in 0..9 {
                if i < j {
                    assert_eq!(m.get(i, j), c(0.0));
                } else {
                    let direct = a.powu((i - j) as u32);
                    assert!((m.get(i, j) - direct).norm() < 1e-14);
                }
            }
        }
    }
}
