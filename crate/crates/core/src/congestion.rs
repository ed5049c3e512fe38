//! Transmit-probability control: for each vehicle density, the ALOHA
//! probability that meets a reliability target in the TPPP.

use serde::{Deserialize, Serialize};

use crate::analytic::{success_prob_tppp_plp, tppp_exponent_per_lambda_p};
use crate::exec::{map_slice, Execution};
use crate::metadist::{md_exact, BetaMd, MdOptions};
use crate::model::{Model, NetworkParams, StreetModel};
use crate::montecarlo::{estimate_md, SimConfig};
use crate::numerics::brent_root;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContourRequest {
    /// Target success probability, or target fraction of links meeting
    /// `reliability_x`.
    pub target_q: f64,
    /// Reliability threshold; `None` targets the success probability.
    pub reliability_x: Option<f64>,
    pub lambda_grid: Vec<f64>,
    /// Everything else; `lambda` and `p` are overwritten per point.
    pub params: NetworkParams,
}

impl ContourRequest {
    pub fn validate(&self) -> Result<()> {
        if !(self.target_q > 0.0 && self.target_q <= 1.0) {
            return Err(Error::Config(format!("target_q {} outside (0, 1]", self.target_q)));
        }
        if let Some(x) = self.reliability_x {
            if !(x > 0.0 && x < 1.0) {
                return Err(Error::Config(format!("reliability_x {x} outside (0, 1)")));
            }
        }
        if self.lambda_grid.iter().any(|&l| !(l > 0.0 && l.is_finite())) {
            return Err(Error::Config("lambda_grid values must be positive".into()));
        }
        if self.lambda_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("lambda_grid must be strictly increasing".into()));
        }
        if self.params.street_model != StreetModel::Plp {
            return Err(Error::Unsupported {
                model: Model::TpppPsp,
                what: "contours (closed-form moments are needed)",
            });
        }
        self.params.derived()?;
        Ok(())
    }

    fn at(&self, lambda: f64, p: f64) -> NetworkParams {
        NetworkParams {
            lambda,
            p,
            ..self.params
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ContourPoint {
    pub lambda: f64,
    pub inv_lambda: f64,
    pub p: f64,
    /// Value of the targeted metric at (λ, p).
    pub achieved_metric: f64,
    /// False when no p ∈ (0, 1] hits the target; `p` is then 1 and
    /// `achieved_metric` the value there.
    pub feasible: bool,
}

impl ContourPoint {
    fn new(lambda: f64, p: f64, achieved_metric: f64, feasible: bool) -> Self {
        Self {
            lambda,
            inv_lambda: 1.0 / lambda,
            p,
            achieved_metric,
            feasible,
        }
    }
}

/// Success-probability contour in closed form: λp = −ln q / K.
pub fn contour_success(req: &ContourRequest) -> Result<Vec<ContourPoint>> {
    req.validate()?;
    let k = tppp_exponent_per_lambda_p(&req.params, &req.params.derived()?);
    let c = -req.target_q.ln() / k;
    req.lambda_grid
        .iter()
        .map(|&lambda| {
            let p = c / lambda;
            if p > 1.0 {
                let best = success_prob_tppp_plp(&req.at(lambda, 1.0))?;
                Ok(ContourPoint::new(lambda, 1.0, best, false))
            } else {
                let achieved = if p == 0.0 { 1.0 } else { success_prob_tppp_plp(&req.at(lambda, p))? };
                Ok(ContourPoint::new(lambda, p, achieved, true))
            }
        })
        .collect()
}

/// Success-probability contour by root finding on the success probability,
/// an independent route to [`contour_success`].
pub fn contour_success_by_root(req: &ContourRequest) -> Result<Vec<ContourPoint>> {
    req.validate()?;
    let metric = |params: &NetworkParams| success_prob_tppp_plp(params);
    req.lambda_grid
        .iter()
        .map(|&lambda| solve_p(req, lambda, &metric))
        .collect()
}

/// Finds p with metric(λ, p) = q, assuming the metric decreases from 1 as
/// p grows from 0.
fn solve_p<F>(req: &ContourRequest, lambda: f64, metric: &F) -> Result<ContourPoint>
where
    F: Fn(&NetworkParams) -> Result<f64>,
{
    let q = req.target_q;
    let at_one = metric(&req.at(lambda, 1.0))?;
    if at_one >= q {
        let feasible = at_one == q;
        return Ok(ContourPoint::new(lambda, 1.0, at_one, feasible));
    }
    if q >= 1.0 {
        return Ok(ContourPoint::new(lambda, 0.0, 1.0, true));
    }
    let mut hi = 1.0;
    let mut lo = 0.5;
    while metric(&req.at(lambda, lo))? < q {
        hi = lo;
        lo *= 0.5;
        if lo < 1e-300 {
            return Ok(ContourPoint::new(lambda, 1.0, at_one, false));
        }
    }
    let mut failure = None;
    let p = brent_root(
        |p| match metric(&req.at(lambda, p)) {
            Ok(v) => v - q,
            Err(e) => {
                failure.get_or_insert(e);
                f64::NAN
            }
        },
        lo,
        hi,
        1e-15 * hi,
    );
    if let Some(e) = failure {
        return Err(e);
    }
    let p = p?;
    Ok(ContourPoint::new(lambda, p, metric(&req.at(lambda, p))?, true))
}

/// Contour of the beta-approximated TPPP meta distribution at reliability x.
pub fn contour_md(req: &ContourRequest, exec: Execution) -> Result<Vec<ContourPoint>> {
    req.validate()?;
    let Some(x) = req.reliability_x else {
        return Err(Error::Config("contour_md needs reliability_x".into()));
    };
    let metric = |params: &NetworkParams| Ok(BetaMd::for_model(Model::TpppPlp, params, 0.0)?.survival(x));
    map_slice(exec, &req.lambda_grid, |&lambda| solve_p(req, lambda, &metric))
        .into_iter()
        .collect()
}

/// How to evaluate the PLP-PPP meta distribution during validation.
#[derive(Debug, Clone, PartialEq)]
pub enum Reference {
    Exact(MdOptions),
    Empirical(SimConfig),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ValidationRow {
    pub lambda: f64,
    pub p: f64,
    pub plp_md: f64,
    /// Standard error of `plp_md`; zero for the exact route.
    pub plp_std_err: f64,
    pub tppp_md: f64,
    pub deviation: f64,
    pub tppp_deviation: f64,
}

/// PLP-PPP meta distribution at each contour point and its deviation from
/// the target.
pub fn validate_against_exact(
    points: &[ContourPoint],
    params: &NetworkParams,
    x: f64,
    target_q: f64,
    reference: &Reference,
) -> Result<Vec<ValidationRow>> {
    points
        .iter()
        .map(|pt| {
            let at = NetworkParams {
                lambda: pt.lambda,
                p: pt.p,
                ..*params
            };
            let (plp_md, plp_std_err) = match reference {
                Reference::Exact(opts) => (md_exact(Model::PlpPpp, &at, x, opts)?, 0.0),
                Reference::Empirical(sim) => {
                    let md = estimate_md(Model::PlpPpp, &at, &sim.clone().with_x_grid(vec![x]))?;
                    (md.survival[0], md.std_err[0])
                }
            };
            let tppp_opts = match reference {
                Reference::Exact(opts) => *opts,
                Reference::Empirical(_) => MdOptions::default(),
            };
            let tppp_md = md_exact(Model::TpppPlp, &at, x, &tppp_opts)?;
            Ok(ValidationRow {
                lambda: pt.lambda,
                p: pt.p,
                plp_md,
                plp_std_err,
                tppp_md,
                deviation: plp_md - target_q,
                tppp_deviation: tppp_md - target_q,
            })
        })
        .collect()
}

/// Range of TPPP success probabilities along the request's contour.
pub fn success_range_along_md_contour(req: &ContourRequest, exec: Execution) -> Result<(f64, f64)> {
    let points = match req.reliability_x {
        Some(_) => contour_md(req, exec)?,
        None => contour_success(req)?,
    };
    let values = points
        .iter()
        .filter(|pt| pt.feasible)
        .map(|pt| success_prob_tppp_plp(&req.at(pt.lambda, pt.p)))
        .collect::<Result<Vec<_>>>()?;
    if values.is_empty() {
        return Err(Error::Config("no feasible point on the contour".into()));
    }
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok((lo, hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::log_grid;

    fn request(q: f64, x: Option<f64>) -> ContourRequest {
        ContourRequest {
            target_q: q,
            reliability_x: x,
            lambda_grid: log_grid(0.5, 20.0, 9),
            params: NetworkParams::default(),
        }
    }

    #[test]
    fn unit_target_needs_silence() {
        for pt in contour_success(&request(1.0, None)).unwrap() {
            assert_eq!(pt.p, 0.0);
            assert!(pt.feasible);
        }
    }

    #[test]
    fn success_contour_closed_form() {
        let req = request(0.9, None);
        let pts = contour_success(&req).unwrap();
        for pt in pts.iter().filter(|p| p.feasible) {
            assert!((pt.achieved_metric - 0.9).abs() < 1e-10);
        }
        let lp: Vec<f64> = pts.iter().filter(|p| p.feasible).map(|p| p.lambda * p.p).collect();
        assert!(lp.windows(2).all(|w| (w[0] - w[1]).abs() < 1e-12 * w[0]));
    }

    #[test]
    fn doubling_lambda_halves_p() {
        let mut req = request(0.8, None);
        req.lambda_grid = vec![1.0, 2.0];
        let pts = contour_success(&req).unwrap();
        assert!((pts[0].p - 2.0 * pts[1].p).abs() < 1e-14);
    }

    #[test]
    fn infeasible_points_are_flagged() {
        let mut req = request(0.99, None);
        // so sparse that even p = 1 overshoots the target
        req.lambda_grid = vec![0.01, 1000.0];
        let pts = contour_success(&req).unwrap();
        assert!(!pts[0].feasible);
        assert_eq!(pts[0].p, 1.0);
        assert!(pts[0].achieved_metric > 0.99);
        assert!(pts[1].feasible);
    }

    #[test]
    fn two_routes_agree() {
        let req = request(0.9, None);
        let a = contour_success(&req).unwrap();
        let b = contour_success_by_root(&req).unwrap();
        for (u, v) in a.iter().zip(&b) {
            assert_eq!(u.feasible, v.feasible);
            assert!((u.p - v.p).abs() < 1e-8, "{} vs {}", u.p, v.p);
        }
    }

    #[test]
    fn md_contour_residual() {
        let req = request(0.9, Some(0.5));
        for pt in contour_md(&req, Execution::Sequential).unwrap() {
            if pt.feasible {
                assert!((pt.achieved_metric - 0.9).abs() < 1e-8);
                assert!(pt.p > 0.0 && pt.p <= 1.0);
            }
        }
    }

    #[test]
    fn success_range_collapses_in_success_mode() {
        let (lo, hi) = success_range_along_md_contour(&request(0.9, None), Execution::Sequential).unwrap();
        assert!((lo - 0.9).abs() < 1e-10 && (hi - 0.9).abs() < 1e-10);
    }

    #[test]
    fn empty_pairs_validate_to_empty_table() {
        let rows = validate_against_exact(
            &[],
            &NetworkParams::default(),
            0.5,
            0.9,
            &Reference::Exact(MdOptions::default()),
        )
        .unwrap();
        assert!(rows.is_empty());
    }

    #[test]
    fn rejects_bad_requests() {
        assert!(contour_success(&request(0.0, None)).is_err());
        assert!(contour_md(&request(0.9, None), Execution::Sequential).is_err());
        let mut req = request(0.9, None);
        req.lambda_grid = vec![2.0, 1.0];
        assert!(contour_success(&req).is_err());
    }
}
