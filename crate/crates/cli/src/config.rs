//! JSON run configurations, one document per run.

use serde::{Deserialize, Serialize};
use tppp::analytic::log_grid;
use tppp::metadist::MdMethod;
use tppp::{Model, NetworkParams};

use crate::CliError;

/// Explicit list of values, or `num` points from `start` to `stop`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Grid {
    List(Vec<f64>),
    Range {
        start: f64,
        stop: f64,
        num: usize,
        #[serde(default)]
        log: bool,
    },
}

impl Grid {
    pub fn values(&self) -> Result<Vec<f64>, CliError> {
        match *self {
            Grid::List(ref v) => Ok(v.clone()),
            Grid::Range { start, stop, num, log } => {
                if num == 0 {
                    return Err(CliError::Config("grid needs num >= 1".into()));
                }
                if log {
                    if !(start > 0.0 && stop > 0.0) {
                        return Err(CliError::Config("log grid bounds must be positive".into()));
                    }
                    return Ok(log_grid(start, stop, num));
                }
                if num == 1 {
                    return Ok(vec![start]);
                }
                Ok((0..num)
                    .map(|i| start + (stop - start) * i as f64 / (num - 1) as f64)
                    .collect())
            }
        }
    }
}

/// A model curve, or one of the closed-form limits in θ.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Curve {
    Model(Model),
    Limit(Limit),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Limit {
    /// 1 minus the small-θ outage of the PLP-PPP.
    LimitLowTheta,
    /// Large-θ success probability of the PLP-PPP.
    LimitHighTheta,
}

impl Curve {
    pub fn name(self) -> &'static str {
        match self {
            Curve::Model(m) => m.name(),
            Curve::Limit(Limit::LimitLowTheta) => "limit_low_theta",
            Curve::Limit(Limit::LimitHighTheta) => "limit_high_theta",
        }
    }
}

fn default_tol() -> f64 {
    1e-6
}

fn default_md_tol() -> f64 {
    1e-4
}

fn default_realizations() -> usize {
    10_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuccessConfig {
    pub params: NetworkParams,
    pub models: Vec<Curve>,
    pub theta_db: Grid,
    #[serde(default = "default_tol")]
    pub tol: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InverseSweep {
    pub x: f64,
    pub target: f64,
    pub lo_db: f64,
    pub hi_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetadistConfig {
    pub params: NetworkParams,
    pub models: Vec<Model>,
    pub methods: Vec<MdMethod>,
    pub theta_db: Grid,
    pub x: Grid,
    #[serde(default = "default_md_tol")]
    pub tol: f64,
    #[serde(default = "default_realizations")]
    pub n_realizations: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inverse: Option<InverseSweep>,
}

/// One parameter set, or several to be simulated side by side.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamSets {
    One(NetworkParams),
    Many(Vec<NetworkParams>),
}

impl ParamSets {
    pub fn as_slice(&self) -> &[NetworkParams] {
        match self {
            ParamSets::One(p) => std::slice::from_ref(p),
            ParamSets::Many(v) => v,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimOutput {
    Md,
    Success,
    Raw,
    Nnd,
    /// Interferer locations of the first realization.
    Points,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub params: ParamSets,
    /// Overrides θ of every parameter set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta_db: Option<f64>,
    pub models: Vec<Model>,
    #[serde(default = "default_realizations")]
    pub n_realizations: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window_radius: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_grid: Option<Grid>,
    pub outputs: Vec<SimOutput>,
    #[serde(default = "default_n_max")]
    pub n_max: usize,
}

fn default_n_max() -> usize {
    40
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValidationMethod {
    Exact,
    Empirical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidationConfig {
    pub method: ValidationMethod,
    /// Validate at most this many evenly spread feasible points.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_points: Option<usize>,
    #[serde(default = "default_validation_tol")]
    pub tol: f64,
    #[serde(default = "default_realizations")]
    pub n_realizations: usize,
}

fn default_validation_tol() -> f64 {
    1e-3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContourConfig {
    pub params: NetworkParams,
    /// Overrides `params.theta`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta_db: Option<f64>,
    pub target_q: f64,
    #[serde(default)]
    pub reliability_x: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_grid: Option<Grid>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inv_lambda_grid: Option<Grid>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub validate: Option<ValidationConfig>,
}

impl ContourConfig {
    /// Increasing λ values from whichever grid is given.
    pub fn lambdas(&self) -> Result<Vec<f64>, CliError> {
        let mut v = match (&self.lambda_grid, &self.inv_lambda_grid) {
            (Some(g), None) => g.values()?,
            (None, Some(g)) => g.values()?.into_iter().map(|v| 1.0 / v).collect(),
            _ => {
                return Err(CliError::Config(
                    "give exactly one of lambda_grid and inv_lambda_grid".into(),
                ))
            }
        };
        v.sort_by(f64::total_cmp);
        Ok(v)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaxgapConfig {
    pub mu: f64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_order")]
    pub m: u32,
    pub lambda_p: Grid,
    pub d2_theta_delta: Grid,
    #[serde(default = "default_gap_tol")]
    pub tol: f64,
}

fn default_alpha() -> f64 {
    4.0
}

fn default_order() -> u32 {
    2
}

fn default_gap_tol() -> f64 {
    1e-8
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grids() {
        let g: Grid = serde_json::from_str(r#"{"start": 0, "stop": 1, "num": 3}"#).unwrap();
        assert_eq!(g.values().unwrap(), vec![0.0, 0.5, 1.0]);
        let g: Grid = serde_json::from_str(r#"[1, 2]"#).unwrap();
        assert_eq!(g.values().unwrap(), vec![1.0, 2.0]);
        let g: Grid = serde_json::from_str(r#"{"start": 1, "stop": 100, "num": 3, "log": true}"#).unwrap();
        let v = g.values().unwrap();
        assert!((v[1] - 10.0).abs() < 1e-12);
    }

    #[test]
    fn curves_parse() {
        let c: Vec<Curve> = serde_json::from_str(r#"["plp_ppp", "limit_high_theta"]"#).unwrap();
        assert_eq!(c[0], Curve::Model(Model::PlpPpp));
        assert_eq!(c[1].name(), "limit_high_theta");
        assert!(serde_json::from_str::<Vec<Curve>>(r#"["nope"]"#).is_err());
    }
}
