//! Transdimensional Poisson point process (TPPP) models of vehicular
//! networks.
//!
//! Vehicles live on random streets (a Poisson line or stick process) and
//! transmit with slotted ALOHA over Rayleigh fading. The crate computes
//! moments and meta distributions of the conditional link success
//! probability, both analytically and by simulation, and solves for
//! transmit probabilities that meet reliability targets.
//!
//! Modules, bottom-up:
//!
//! - [`numerics`]: special functions, quadrature, root finding, inversion
//! - [`model`]: parameters and validation
//! - [`geometry`]: samplers and nearest-neighbour distributions
//! - [`analytic`]: moments and success probabilities
//! - [`montecarlo`]: the simulation oracle
//! - [`metadist`]: exact and beta-approximated meta distributions
//! - [`congestion`]: transmit-probability contours

pub mod analytic;
pub mod congestion;
pub mod exec;
pub mod geometry;
pub mod metadist;
pub mod model;
pub mod montecarlo;
pub mod numerics;

pub use exec::Execution;
pub use model::{HalfLengthDist, Model, NetworkParams, StreetModel};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error(transparent)]
    Params(#[from] model::ParamError),
    #[error(transparent)]
    Numerics(#[from] numerics::NumericsError),
    #[error("model {model} does not support {what}")]
    Unsupported { model: Model, what: &'static str },
    #[error("invalid configuration: {0}")]
    Config(String),
}

impl Error {
    /// True when a numerical method ran out of budget; such errors carry a
    /// partial result.
    pub fn is_convergence_failure(&self) -> bool {
        matches!(self, Error::Numerics(e) if e.is_convergence_failure())
    }

    pub fn partial_value(&self) -> Option<f64> {
        match self {
            Error::Numerics(e) => e.partial(),
            _ => None,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
