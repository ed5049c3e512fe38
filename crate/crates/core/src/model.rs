//! Network parameters, street-length distributions and derived quantities.

use std::f64::consts::PI;
use std::fmt;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numerics::{integrate_to_infinity, QuadOptions, QuadResult};

/// Half-length distribution of the sticks of a Poisson stick process.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HalfLengthDist {
    /// Density `2ch·exp(-ch²)`.
    Rayleigh { c: f64 },
    /// Every stick has half-length `h`.
    Deterministic { h: f64 },
}

impl HalfLengthDist {
    pub fn density(&self, h: f64) -> f64 {
        match *self {
            Self::Rayleigh { c } if h >= 0.0 => 2.0 * c * h * (-c * h * h).exp(),
            Self::Rayleigh { .. } => 0.0,
            // point mass; no density
            Self::Deterministic { .. } => f64::NAN,
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            Self::Rayleigh { c } => (PI / (4.0 * c)).sqrt(),
            Self::Deterministic { h } => h,
        }
    }

    pub fn second_moment(&self) -> f64 {
        match *self {
            Self::Rayleigh { c } => 1.0 / c,
            Self::Deterministic { h } => h * h,
        }
    }

    /// Mean of the length-biased law `h f_H(h) / E[H]`.
    pub fn length_biased_mean(&self) -> f64 {
        self.second_moment() / self.mean()
    }

    /// Quantile of level `1 - 1e-6`, the truncation point for sampling.
    pub fn cutoff(&self) -> f64 {
        match *self {
            Self::Rayleigh { c } => (1e6f64.ln() / c).sqrt(),
            Self::Deterministic { h } => h,
        }
    }

    /// E[g(H)] by quadrature against `f_H`; exact for the deterministic law.
    pub fn expect<F: FnMut(f64) -> f64>(&self, mut g: F, opts: &QuadOptions) -> QuadResult<f64> {
        match *self {
            Self::Rayleigh { c } => {
                let dist = *self;
                integrate_to_infinity(|h| g(h) * dist.density(h), 0.0, 1.0 / c.sqrt(), opts)
            }
            Self::Deterministic { h } => QuadResult {
                value: g(h),
                abs_err: 0.0,
                evaluations: 1,
                converged: true,
            },
        }
    }

    /// E[g(H̃)] under the length-biased law `h f_H(h) / E[H]`.
    pub fn expect_length_biased<F: FnMut(f64) -> f64>(
        &self,
        mut g: F,
        opts: &QuadOptions,
    ) -> QuadResult<f64> {
        let mean = self.mean();
        let mut r = self.expect(|h| h * g(h), opts);
        r.value /= mean;
        r.abs_err /= mean;
        r
    }

    /// Draw from `f_H`, truncated at [`HalfLengthDist::cutoff`].
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Self::Rayleigh { c } => {
                let cut = self.cutoff();
                loop {
                    let u: f64 = rng.random();
                    let h = (-(1.0 - u).ln() / c).sqrt();
                    if h <= cut {
                        return h;
                    }
                }
            }
            Self::Deterministic { h } => h,
        }
    }

    /// Draw from the length-biased density `h f_H(h) / E[H]`.
    pub fn sample_length_biased<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Self::Rayleigh { c } => {
                // density ∝ h² exp(-c h²): norm of a 3D Gaussian vector
                let sd = (0.5 / c).sqrt();
                let v: [f64; 3] = std::array::from_fn(|_| rng.sample::<f64, _>(StandardNormal) * sd);
                (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
            }
            Self::Deterministic { h } => h,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StreetModel {
    /// Poisson line process: streets of unbounded length.
    Plp,
    /// Poisson stick process with random half-lengths.
    Psp(HalfLengthDist),
}

/// The point-process models of the vehicle locations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Model {
    /// Vehicles on the typical street(s) only: a 1D PPP of intensity mλ/2.
    Ppp1d,
    /// A 2D PPP of intensity λ₂.
    Ppp2d,
    PlpPpp,
    PspPpp,
    /// Typical street(s) plus a 2D PPP of intensity λμ.
    TpppPlp,
    /// Typical stick(s) plus a 2D PPP of intensity 2λμE[H].
    TpppPsp,
}

impl Model {
    pub const ALL: [Model; 6] = [
        Model::Ppp1d,
        Model::Ppp2d,
        Model::PlpPpp,
        Model::PspPpp,
        Model::TpppPlp,
        Model::TpppPsp,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Model::Ppp1d => "ppp1d",
            Model::Ppp2d => "ppp2d",
            Model::PlpPpp => "plp_ppp",
            Model::PspPpp => "psp_ppp",
            Model::TpppPlp => "tppp_plp",
            Model::TpppPsp => "tppp_psp",
        }
    }

    pub fn needs_sticks(self) -> bool {
        matches!(self, Model::PspPpp | Model::TpppPsp)
    }
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Model {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Model::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| format!("unknown model {s:?}"))
    }
}

/// Scalar parameters of a vehicular network.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams", into = "RawParams")]
pub struct NetworkParams {
    /// Vehicle intensity per unit street length.
    pub lambda: f64,
    /// Street intensity.
    pub mu: f64,
    /// ALOHA transmit probability.
    pub p: f64,
    /// SIR threshold, linear scale.
    pub theta: f64,
    /// Link distance D.
    pub d_link: f64,
    /// Path-loss exponent.
    pub alpha: f64,
    /// Order of the typical vehicle: 2 (one street) or 4 (intersection).
    pub m: u32,
    pub street_model: StreetModel,
    /// Standard deviation of the mean-one shadowing; 0 disables shadowing.
    pub shadow_sigma: f64,
}

impl Default for NetworkParams {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            mu: 1.0,
            p: 0.3,
            theta: 1.0,
            d_link: 0.25,
            alpha: 4.0,
            m: 2,
            street_model: StreetModel::Plp,
            shadow_sigma: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivedParams {
    /// δ = 2/α.
    pub delta: f64,
    /// s = θ·D^α.
    pub s: f64,
    /// Mean street length per unit area.
    pub tau: f64,
    /// Intensity of the 2D part of the TPPP.
    pub lambda2: f64,
}

/// One violated parameter constraint.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParamViolation {
    #[error("alpha = {0} must exceed 2")]
    AlphaOutOfRange(f64),
    #[error("{name} = {value} must lie in {range}")]
    ProbOutOfRange {
        name: &'static str,
        value: f64,
        range: &'static str,
    },
    #[error("{name} = {value} must be positive")]
    NonPositiveParam { name: &'static str, value: f64 },
    #[error("{name} = {value} must be non-negative")]
    NegativeParam { name: &'static str, value: f64 },
    #[error("order m = {0} must be 2 or 4")]
    InvalidOrder(u32),
    #[error("{0}")]
    Other(String),
}

/// Every constraint violated by a parameter set.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("invalid parameters: {}", .violations.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
pub struct ParamError {
    pub violations: Vec<ParamViolation>,
}

impl From<ParamViolation> for ParamError {
    fn from(v: ParamViolation) -> Self {
        Self { violations: vec![v] }
    }
}

/// Checks every invariant and computes the derived quantities.
pub fn validate(params: &NetworkParams) -> Result<DerivedParams, ParamError> {
    let mut violations = Vec::new();
    let mut positive = |name, value: f64| {
        if !(value > 0.0 && value.is_finite()) {
            violations.push(ParamViolation::NonPositiveParam { name, value });
        }
    };
    positive("theta", params.theta);
    positive("d_link", params.d_link);
    match params.street_model {
        StreetModel::Psp(HalfLengthDist::Rayleigh { c }) => positive("half_length_param", c),
        StreetModel::Psp(HalfLengthDist::Deterministic { h }) => positive("half_length_param", h),
        StreetModel::Plp => {}
    }
    for (name, value) in [
        ("lambda", params.lambda),
        ("mu", params.mu),
        ("shadow_sigma", params.shadow_sigma),
    ] {
        if !(value >= 0.0 && value.is_finite()) {
            violations.push(ParamViolation::NegativeParam { name, value });
        }
    }
    if !(params.alpha > 2.0 && params.alpha.is_finite()) {
        violations.push(ParamViolation::AlphaOutOfRange(params.alpha));
    }
    if !(params.p > 0.0 && params.p <= 1.0) {
        violations.push(ParamViolation::ProbOutOfRange {
            name: "p",
            value: params.p,
            range: "(0, 1]",
        });
    }
    if params.m != 2 && params.m != 4 {
        violations.push(ParamViolation::InvalidOrder(params.m));
    }
    if !violations.is_empty() {
        return Err(ParamError { violations });
    }
    let tau = match params.street_model {
        StreetModel::Plp => params.mu,
        StreetModel::Psp(dist) => 2.0 * params.mu * dist.mean(),
    };
    Ok(DerivedParams {
        delta: 2.0 / params.alpha,
        s: params.theta * params.d_link.powf(params.alpha),
        tau,
        lambda2: params.lambda * tau,
    })
}

impl NetworkParams {
    /// Validated derived quantities; see [`validate`].
    pub fn derived(&self) -> Result<DerivedParams, ParamError> {
        validate(self)
    }

    /// Number of typical streets through the receiver.
    pub fn typical_streets(&self) -> usize {
        (self.m / 2) as usize
    }

    pub fn half_length(&self) -> Option<HalfLengthDist> {
        match self.street_model {
            StreetModel::Psp(d) => Some(d),
            StreetModel::Plp => None,
        }
    }

    pub fn with_theta(self, theta: f64) -> Self {
        Self { theta, ..self }
    }

    pub fn with_p(self, p: f64) -> Self {
        Self { p, ..self }
    }

    pub fn with_lambda(self, lambda: f64) -> Self {
        Self { lambda, ..self }
    }
}

/// Mean-one lognormal shadowing with variance σ².
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Shadowing {
    /// Mean of ln ν.
    pub mu_ln: f64,
    /// Standard deviation of ln ν.
    pub sigma_ln: f64,
}

impl Shadowing {
    pub fn new(sigma: f64) -> Self {
        let var_ln = (sigma * sigma).ln_1p();
        Self {
            mu_ln: -0.5 * var_ln,
            sigma_ln: var_ln.sqrt(),
        }
    }

    pub fn is_trivial(&self) -> bool {
        self.sigma_ln == 0.0
    }

    /// E[ν^q].
    pub fn moment(&self, q: f64) -> f64 {
        (q * self.mu_ln + 0.5 * q * q * self.sigma_ln * self.sigma_ln).exp()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if self.is_trivial() {
            return 1.0;
        }
        let z: f64 = rng.sample(StandardNormal);
        (self.mu_ln + self.sigma_ln * z).exp()
    }
}

/// 10·log₁₀ θ.
pub fn to_db(linear: f64) -> f64 {
    10.0 * linear.log10()
}

pub fn from_db(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Flat JSON layout of [`NetworkParams`].
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawParams {
    pub lambda: f64,
    pub mu: f64,
    pub p: f64,
    pub theta: f64,
    pub d_link: f64,
    pub alpha: f64,
    #[serde(default = "default_order")]
    pub m: u32,
    #[serde(default = "default_street_model")]
    pub street_model: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub half_length_dist: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub half_length_param: Option<f64>,
    #[serde(default)]
    pub shadow_sigma: f64,
}

fn default_order() -> u32 {
    2
}

fn default_street_model() -> String {
    "plp".into()
}

impl TryFrom<RawParams> for NetworkParams {
    type Error = ParamError;

    fn try_from(raw: RawParams) -> Result<Self, Self::Error> {
        let street_model = match raw.street_model.as_str() {
            "plp" => StreetModel::Plp,
            "psp" => {
                let value = raw.half_length_param.ok_or_else(|| {
                    ParamViolation::Other("psp street model needs half_length_param".into())
                })?;
                let dist = match raw.half_length_dist.as_deref().unwrap_or("rayleigh") {
                    "rayleigh" => HalfLengthDist::Rayleigh { c: value },
                    "deterministic" => HalfLengthDist::Deterministic { h: value },
                    other => {
                        return Err(ParamViolation::Other(format!(
                            "unknown half_length_dist {other:?}"
                        ))
                        .into())
                    }
                };
                StreetModel::Psp(dist)
            }
            other => {
                return Err(ParamViolation::Other(format!("unknown street_model {other:?}")).into())
            }
        };
        let params = NetworkParams {
            lambda: raw.lambda,
            mu: raw.mu,
            p: raw.p,
            theta: raw.theta,
            d_link: raw.d_link,
            alpha: raw.alpha,
            m: raw.m,
            street_model,
            shadow_sigma: raw.shadow_sigma,
        };
        validate(&params)?;
        Ok(params)
    }
}

impl From<NetworkParams> for RawParams {
    fn from(p: NetworkParams) -> Self {
        let (street_model, half_length_dist, half_length_param) = match p.street_model {
            StreetModel::Plp => ("plp", None, None),
            StreetModel::Psp(HalfLengthDist::Rayleigh { c }) => {
                ("psp", Some("rayleigh".to_string()), Some(c))
            }
            StreetModel::Psp(HalfLengthDist::Deterministic { h }) => {
                ("psp", Some("deterministic".to_string()), Some(h))
            }
        };
        RawParams {
            lambda: p.lambda,
            mu: p.mu,
            p: p.p,
            theta: p.theta,
            d_link: p.d_link,
            alpha: p.alpha,
            m: p.m,
            street_model: street_model.into(),
            half_length_dist,
            half_length_param,
            shadow_sigma: p.shadow_sigma,
        }
    }
}
