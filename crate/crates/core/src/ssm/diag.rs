use num_complex::Complex64;

use super::SsmError;

/// Minimum decay rate (1/s) enforced on every eigenvalue.
pub const EPS_STAB: f64 = 1e-6;

/// Diagonal of the continuous transition matrix `A`, one complex eigenvalue
/// `λ_k = re[k] + i·im[k]` per state.
///
/// `re` is a decay rate in 1/s and `im` an angular frequency in rad/s. Every
/// real part is at most `-EPS_STAB`, so `|exp(λ Δt)| < 1` for any positive step.
/// With `im ≡ 0` the system has no oscillatory modes.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexDiag {
    re: Vec<f64>,
    im: Vec<f64>,
}

impl ComplexDiag {
    /// Builds a diagonal, rejecting non-finite or insufficiently damped entries.
    ///
    /// Use [`stability_project`] first on raw (e.g. freshly initialized)
    /// parameters.
    pub fn new(re: Vec<f64>, im: Vec<f64>) -> Result<Self, SsmError> {
        super::check_dim("imaginary parts", re.len(), im.len())?;
        for (index, (&r, &i)) in re.iter().zip(&im).enumerate() {
            if !r.is_finite() || !i.is_finite() {
                return Err(SsmError::NonFiniteEigenvalue { index, re: r, im: i });
            }
            if r > -EPS_STAB {
                return Err(SsmError::UnstableEigenvalue { index, re: r });
            }
        }
        Ok(Self { re, im })
    }

    /// Builds a diagonal without validation. [`super::zoh_discretize`]
    /// still rejects non-finite entries.
    pub fn new_unchecked(re: Vec<f64>, im: Vec<f64>) -> Self {
        assert_eq!(re.len(), im.len(), "re/im length mismatch");
        Self { re, im }
    }

    pub fn from_eigenvalues(lambdas: &[Complex64]) -> Result<Self, SsmError> {
        Self::new(
            lambdas.iter().map(|l| l.re).collect(),
            lambdas.iter().map(|l| l.im).collect(),
        )
    }

    pub fn n_state(&self) -> usize {
        self.re.len()
    }

    pub fn re(&self) -> &[f64] {
        &self.re
    }

    pub fn im(&self) -> &[f64] {
        &self.im
    }

    pub fn eigenvalue(&self, k: usize) -> Complex64 {
        Complex64::new(self.re[k], self.im[k])
    }

    pub fn eigenvalues(&self) -> impl Iterator<Item = Complex64> + '_ {
        self.re
            .iter()
            .zip(&self.im)
            .map(|(&r, &i)| Complex64::new(r, i))
    }

    /// True when every imaginary part is zero.
    pub fn is_real(&self) -> bool {
        self.im.iter().all(|&i| i == 0.0)
    }

    /// Same decay rates with all rotation removed.
    pub fn without_oscillation(&self) -> Self {
        Self {
            re: self.re.clone(),
            im: vec![0.0; self.im.len()],
        }
    }
}

/// Clamps every real part to at most `-EPS_STAB`; imaginary parts are untouched.
pub fn stability_project(a: &ComplexDiag) -> ComplexDiag {
    ComplexDiag {
        re: a.re.iter().map(|&r| r.min(-EPS_STAB)).collect(),
        im: a.im.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn project_leaves_stable_entries() {
        let a = ComplexDiag::new_unchecked(vec![-0.5], vec![3.0]);
        assert_eq!(stability_project(&a).re(), &[-0.5]);
        assert_eq!(stability_project(&a).im(), &[3.0]);
    }

    #[test]
    fn project_clamps_growing_and_marginal() {
        let a = ComplexDiag::new_unchecked(vec![0.3, -1e-9, 0.0], vec![1.0, 2.0, 0.0]);
        let p = stability_project(&a);
        assert_eq!(p.re(), &[-1e-6, -1e-6, -1e-6]);
        assert_eq!(p.im(), &[1.0, 2.0, 0.0]);
        assert!(ComplexDiag::new(p.re().to_vec(), p.im().to_vec()).is_ok());
    }

    #[test]
    fn new_rejects_unstable_and_nonfinite() {
        assert!(matches!(
            ComplexDiag::new(vec![-1.0, 0.1], vec![0.0, 0.0]),
            Err(SsmError::UnstableEigenvalue { index: 1, .. })
        ));
        assert!(matches!(
            ComplexDiag::new(vec![f64::NAN], vec![0.0]),
            Err(SsmError::NonFiniteEigenvalue { index: 0, .. })
        ));
        assert!(ComplexDiag::new(vec![-1.0], vec![]).is_err());
    }
}
