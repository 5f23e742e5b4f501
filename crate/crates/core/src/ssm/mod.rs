//! Complex-diagonal linear state-space systems.
//!
//! The continuous heart-state system
//!
//! ```text
//! h'(t) = A h(t) + B x(t)
//! y(t)  = C h(t) + D x(t)
//! ```
//!
//! is kept with a diagonal, complex `A` ([`ComplexDiag`]). Zero-order-hold
//! discretization ([`zoh_discretize`]) turns it into the per-step recurrence
//! run at inference time ([`recurrent_step`], [`recurrent_scan`]). The same
//! map can be evaluated as a masked attention product with the
//! 1-semiseparable mask `L[i, j] = Ā^(i-j)` ([`CausalMask`], [`dual_form_apply`]),
//! which is the parallel path used over whole sequences.
//!
//! States are complex; outputs take the real part of `C h` at readout.

mod diag;
mod dual;
mod mask;
mod scan;
mod system;

pub use diag::{stability_project, ComplexDiag, EPS_STAB};
pub use dual::{
    dual_form_apply, dual_form_apply_chunked, shared_dual_chunked, shared_recurrent_step,
    DUAL_CHUNK, DUAL_FULL_MAX,
};
pub use mask::CausalMask;
pub use scan::{recurrent_scan, recurrent_step, selective_scan, SSMState};
pub use system::{zoh_discretize, zoh_input_gain, ContinuousSSM, DiscreteSSM, ZOH_LIMIT};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SsmError {
    #[error("eigenvalue {index} is not finite ({re} + {im}i)")]
    NonFiniteEigenvalue { index: usize, re: f64, im: f64 },
    #[error("eigenvalue {index} has real part {re} > -{eps}", eps = EPS_STAB)]
    UnstableEigenvalue { index: usize, re: f64 },
    #[error("transition {index} has modulus {modulus}, expected < 1")]
    UnstableTransition { index: usize, modulus: f64 },
    #[error("step length must be positive and finite, got {0}")]
    InvalidStep(f64),
    #[error("{what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("{0} contains a non-finite value")]
    NonFinite(&'static str),
    #[error("sequence length must be at least 1")]
    EmptySequence,
}

pub(crate) fn check_dim(what: &'static str, expected: usize, found: usize) -> Result<(), SsmError> {
    if expected == found {
        Ok(())
    } else {
        Err(SsmError::DimensionMismatch {
            what,
            expected,
            found,
        })
    }
}
