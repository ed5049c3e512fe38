//! Special functions and generic numerical routines.
//!
//! Everything here is a pure function of its arguments. The routines are
//! tuned for the parameter regimes the network models produce rather than
//! for full generality; see the individual functions for their domains.

mod beta;
mod chebyshev;
mod gamma;
mod gil_pelaez;
mod hypergeometric;
mod quadrature;
mod roots;

pub use beta::{ln_beta, reg_inc_beta};
pub use chebyshev::ChebyshevPanel;
pub use gamma::{gamma, gamma_pair, ln_gamma, ln_gamma_complex};
pub use gil_pelaez::{gil_pelaez, GilPelaezOptions, WynnEpsilon};
pub use hypergeometric::{diversity_gain, hyp2f1};
pub use quadrature::{
    adaptive_quad, gauss_legendre, integrate, integrate_to_infinity, QuadOptions, QuadResult,
    QuadValue,
};
pub use roots::brent_root;

use thiserror::Error;

/// Complex number type used for moments of non-integer (complex) order.
pub type ComplexValue = num_complex::Complex64;

/// Failure modes of the numerical routines.
///
/// Variants that arise from an iterative procedure carry the best value
/// obtained so far together with an error estimate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum NumericsError {
    #[error("adaptive quadrature stopped after {subdivisions} subdivisions (partial {partial}, error estimate {abs_err:e})")]
    MaxSubdivisions {
        partial: f64,
        abs_err: f64,
        subdivisions: usize,
    },
    #[error("{what} did not converge (partial {partial}, error estimate {abs_err:e})")]
    NoConvergence {
        what: &'static str,
        partial: f64,
        abs_err: f64,
    },
    #[error("no sign change on [{lo}, {hi}]: f(lo) = {f_lo}, f(hi) = {f_hi}")]
    NoSignChange {
        lo: f64,
        hi: f64,
        f_lo: f64,
        f_hi: f64,
    },
    #[error("moments m1 = {m1}, m2 = {m2} admit no beta distribution")]
    InfeasibleMoments { m1: f64, m2: f64 },
    #[error("argument out of domain: {0}")]
    Domain(String),
}

impl NumericsError {
    /// Best available value for errors that carry one.
    pub fn partial(&self) -> Option<f64> {
        match self {
            Self::MaxSubdivisions { partial, .. } | Self::NoConvergence { partial, .. } => {
                Some(*partial)
            }
            _ => None,
        }
    }

    /// True for errors that signal non-convergence of an iterative method.
    pub fn is_convergence_failure(&self) -> bool {
        matches!(
            self,
            Self::MaxSubdivisions { .. } | Self::NoConvergence { .. }
        )
    }
}
