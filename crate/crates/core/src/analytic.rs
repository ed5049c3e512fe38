//! Moments of the conditional success probability and success
//! probabilities for all models, plus their limits in θ.
//!
//! Lengths are rescaled by `ρ = s^{1/α}` wherever possible, so that the
//! kernel `s / (s + |z|^α)` becomes `1 / (1 + |z̃|^α)`.

use std::f64::consts::PI;

use crate::exec::{map_indexed, Execution};
use crate::model::{DerivedParams, Model, NetworkParams};
use crate::numerics::{
    diversity_gain, gamma_pair, integrate, integrate_to_infinity, ComplexValue, NumericsError,
    QuadOptions, QuadResult, QuadValue,
};
use crate::{Error, Result};

fn cplx(re: f64) -> ComplexValue {
    ComplexValue::new(re, 0.0)
}

fn checked<T: QuadValue>(res: QuadResult<T>, partial: impl Fn(T) -> f64) -> Result<T> {
    if res.converged {
        Ok(res.value)
    } else {
        Err(NumericsError::MaxSubdivisions {
            partial: partial(res.value),
            abs_err: res.abs_err,
            subdivisions: res.evaluations / 42,
        }
        .into())
    }
}

fn opts(tol: f64) -> QuadOptions {
    QuadOptions {
        abs_tol: tol,
        rel_tol: tol,
        max_subdivisions: 4_000,
    }
}

/// ln M_b of a d-dimensional PPP of the given intensity around a link of
/// length D.
pub fn dppp_log_moment(
    b: ComplexValue,
    d: u32,
    intensity: f64,
    params: &NetworkParams,
) -> Result<ComplexValue> {
    if d != 1 && d != 2 {
        return Err(Error::Config(format!("dimension {d} is not 1 or 2")));
    }
    params.derived()?;
    if intensity == 0.0 || b.norm() == 0.0 {
        return Ok(cplx(0.0));
    }
    let q = d as f64 / params.alpha;
    let unit_ball = if d == 1 { 2.0 } else { PI };
    let scale = intensity
        * unit_ball
        * params.d_link.powi(d as i32)
        * params.theta.powf(q)
        * gamma_pair(q);
    Ok(-scale * diversity_gain(b, params.p, q)?)
}

/// M_b of a d-dimensional PPP (d ∈ {1, 2}) of the given intensity.
pub fn moment_dppp(b: ComplexValue, d: u32, intensity: f64, params: &NetworkParams) -> Result<ComplexValue> {
    Ok(dppp_log_moment(b, d, intensity, params)?.exp())
}

/// M_b of the TPPP built from a PLP: typical street(s) plus a 2D PPP of
/// intensity λμ.
pub fn moment_tppp_plp(b: ComplexValue, params: &NetworkParams) -> Result<ComplexValue> {
    Ok(tppp_plp_log_moment(b, params)?.exp())
}

fn tppp_plp_log_moment(b: ComplexValue, params: &NetworkParams) -> Result<ComplexValue> {
    let m = params.m as f64;
    Ok(dppp_log_moment(b, 1, m * params.lambda / 2.0, params)?
        + dppp_log_moment(b, 2, params.lambda * params.mu, params)?)
}

/// Closed-form TPPP success probability (constant time).
pub fn success_prob_tppp_plp(params: &NetworkParams) -> Result<f64> {
    let d = params.derived()?;
    Ok((-params.lambda * params.p * tppp_exponent_per_lambda_p(params, &d)).exp())
}

/// K such that the TPPP success probability is exp(-λpK).
pub fn tppp_exponent_per_lambda_p(params: &NetworkParams, d: &DerivedParams) -> f64 {
    let half = d.delta / 2.0;
    params.m as f64 * params.d_link * params.theta.powf(half) * gamma_pair(half)
        + params.mu * PI * params.d_link.powi(2) * params.theta.powf(d.delta) * gamma_pair(d.delta)
}

fn rho(d: &DerivedParams, alpha: f64) -> f64 {
    d.s.powf(1.0 / alpha)
}

/// ln(1 - p/(1 + r²^{α/2})).
fn ln_keep(p: f64, r2: f64, alpha: f64) -> f64 {
    (-p / (1.0 + r2.powf(0.5 * alpha))).ln_1p()
}

/// Oscillation radius (in units of ρ) inside which (1 - p/(1+r^α))^b turns
/// over many times for large |b|.
fn oscillation_radius(b: ComplexValue, p: f64, alpha: f64) -> f64 {
    (b.norm() * p).max(1.0).powf(1.0 / alpha)
}

/// ∫_0^∞ [1 - (1 - p/(1 + (t̃² + u²)^{α/2}))^b] du for one line at scaled
/// distance `t_scaled`.
fn line_integral(b: ComplexValue, t_scaled: f64, p: f64, alpha: f64, q: &QuadOptions) -> QuadResult<ComplexValue> {
    let t2 = t_scaled * t_scaled;
    let f = |u: f64| {
        let l = ln_keep(p, t2 + u * u, alpha);
        cplx(1.0) - (b * l).exp()
    };
    let r_osc = oscillation_radius(b, p, alpha);
    let split = (r_osc * r_osc - t2).max(0.0).sqrt() + 1.0;
    let head = integrate(f, 0.0, split, q);
    let tail = integrate_to_infinity(f, split, split.max(t_scaled), q);
    QuadResult {
        value: head.value + tail.value,
        abs_err: head.abs_err + tail.abs_err,
        evaluations: head.evaluations + tail.evaluations,
        converged: head.converged && tail.converged,
    }
}

/// G_b(t): the b-th moment factor contributed by the vehicles on one line
/// at distance `t` from the receiver.
pub fn plp_line_factor(b: ComplexValue, t: f64, params: &NetworkParams, tol: f64) -> Result<ComplexValue> {
    let d = params.derived()?;
    let rho = rho(&d, params.alpha);
    let res = line_integral(b, t / rho, params.p, params.alpha, &opts(tol));
    let f = checked(res, |v| v.re)?;
    Ok((-2.0 * params.lambda * rho * f).exp())
}

/// ln M_b of the PLP-PPP by nested quadrature.
pub fn plp_ppp_log_moment(b: ComplexValue, params: &NetworkParams, tol: f64) -> Result<ComplexValue> {
    let d = params.derived()?;
    let m = params.m as f64;
    let street = dppp_log_moment(b, 1, m * params.lambda / 2.0, params)?;
    if params.mu == 0.0 || params.lambda == 0.0 || b.norm() == 0.0 {
        return Ok(street);
    }
    let rho = rho(&d, params.alpha);
    let (p, alpha, lambda) = (params.p, params.alpha, params.lambda);
    let outer = opts(tol);
    let inner = outer.tightened(0.1);
    let mut inner_failure: Option<NumericsError> = None;
    let mut one_minus_g = |t: f64| {
        let res = line_integral(b, t, p, alpha, &inner);
        if !res.converged && inner_failure.is_none() {
            inner_failure = Some(NumericsError::MaxSubdivisions {
                partial: res.value.re,
                abs_err: res.abs_err,
                subdivisions: inner.max_subdivisions,
            });
        }
        -(-2.0 * lambda * rho * res.value).exp() + 1.0
    };
    let split = oscillation_radius(b, p, alpha) + 1.0;
    let head = integrate(&mut one_minus_g, 0.0, split, &outer);
    let tail = integrate_to_infinity(&mut one_minus_g, split, split, &outer);
    let lines = head.value + tail.value;
    let value = street - 2.0 * params.mu * rho * lines;
    if let Some(e) = inner_failure {
        return Err(e.into());
    }
    if !(head.converged && tail.converged) {
        return Err(NumericsError::MaxSubdivisions {
            partial: value.exp().re,
            abs_err: head.abs_err + tail.abs_err,
            subdivisions: outer.max_subdivisions,
        }
        .into());
    }
    Ok(value)
}

/// M_b of the PLP-PPP.
pub fn moment_plp_ppp(b: ComplexValue, params: &NetworkParams, tol: f64) -> Result<ComplexValue> {
    Ok(plp_ppp_log_moment(b, params, tol)?.exp())
}

/// ln M_b for the models with analytic moments of arbitrary order.
pub fn log_moment(model: Model, b: ComplexValue, params: &NetworkParams, tol: f64) -> Result<ComplexValue> {
    let d = params.derived()?;
    match model {
        Model::Ppp1d => dppp_log_moment(b, 1, params.m as f64 * params.lambda / 2.0, params),
        Model::Ppp2d => dppp_log_moment(b, 2, d.lambda2, params),
        Model::TpppPlp => tppp_plp_log_moment(b, params),
        Model::PlpPpp => plp_ppp_log_moment(b, params, tol),
        Model::PspPpp | Model::TpppPsp => Err(Error::Unsupported {
            model,
            what: "analytic moments of order other than one",
        }),
    }
}

/// M_b; for the stick models only b = 1 is available.
pub fn moment(model: Model, b: ComplexValue, params: &NetworkParams, tol: f64) -> Result<ComplexValue> {
    if model.needs_sticks() && b == cplx(1.0) {
        return success_prob(model, params, tol).map(cplx);
    }
    Ok(log_moment(model, b, params, tol)?.exp())
}

/// PLP-PPP success probability by the first-moment integral over the
/// distance of each line from the receiver.
pub fn success_prob_plp_ppp(params: &NetworkParams, tol: f64) -> Result<f64> {
    let d = params.derived()?;
    let (lambda, p, m) = (params.lambda, params.p, params.m as f64);
    let half = d.delta / 2.0;
    let street = m * lambda * p * params.d_link * params.theta.powf(half) * gamma_pair(half);
    if params.mu == 0.0 || lambda == 0.0 {
        return Ok((-street).exp());
    }
    let s_half = d.s.powf(half);
    let s_delta = d.s.powf(d.delta);
    let inv_delta = 1.0 / d.delta;
    let outer = opts(tol);
    let inner = outer.tightened(0.1);
    let mut failed = false;
    let mut laplace = |t: f64| {
        let u_t = t * t / s_delta;
        let r = integrate_to_infinity(
            |y: f64| 2.0 / (1.0 + (u_t + y * y).powf(inv_delta)),
            0.0,
            1.0 + u_t.sqrt(),
            &inner,
        );
        failed |= !r.converged;
        (-lambda * p * s_half * r.value).exp()
    };
    let res = integrate_to_infinity(|t: f64| 1.0 - laplace(t), 0.0, s_half, &outer);
    let value = (-street - 2.0 * params.mu * res.value).exp();
    if failed || !res.converged {
        return Err(NumericsError::MaxSubdivisions {
            partial: value,
            abs_err: res.abs_err,
            subdivisions: outer.max_subdivisions,
        }
        .into());
    }
    Ok(value)
}

/// Small-θ outage of the PLP-PPP: mλpDθ^{δ/2}Γ(1+δ/2)Γ(1-δ/2).
pub fn asymptote_theta0(params: &NetworkParams, theta: f64) -> f64 {
    let half = 1.0 / params.alpha;
    params.m as f64 * params.lambda * params.p * params.d_link * theta.powf(half) * gamma_pair(half)
}

/// Large-θ success probability of the PLP-PPP: that of the 2D PPP of
/// intensity λμ.
pub fn asymptote_theta_inf(params: &NetworkParams, theta: f64) -> f64 {
    let delta = 2.0 / params.alpha;
    (-PI * params.lambda * params.p * params.mu * params.d_link.powi(2) * theta.powf(delta) * gamma_pair(delta))
        .exp()
}

/// ∫_0^x dv / (1 + v^α).
fn street_kernel_integral(x: f64, alpha: f64, q: &QuadOptions) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let f = |v: f64| 1.0 / (1.0 + v.powf(alpha));
    if x <= 8.0 {
        integrate(f, 0.0, x, q).value
    } else {
        let full = gamma_pair(1.0 / alpha);
        full - integrate_to_infinity(f, x, x, q).value
    }
}

fn require_sticks(model: Model, params: &NetworkParams) -> Result<crate::model::HalfLengthDist> {
    params.half_length().ok_or(Error::Unsupported {
        model,
        what: "a line street model (a stick half-length law is required)",
    })
}

/// First moment contributed by the typical stick(s) of the PSP-PPP.
pub fn psp_typical_street_moment(params: &NetworkParams, tol: f64) -> Result<f64> {
    let dist = require_sticks(Model::PspPpp, params)?;
    let d = params.derived()?;
    let lp = params.lambda * params.p;
    if lp == 0.0 {
        return Ok(1.0);
    }
    let rho = rho(&d, params.alpha);
    let alpha = params.alpha;
    let outer = opts(tol);
    let mid = outer.tightened(0.1);
    let inner = outer.tightened(0.01);
    let per_h = |h: f64| {
        if h <= 0.0 {
            return 1.0;
        }
        let avg = integrate(
            |w: f64| {
                let a = street_kernel_integral((h - w) / rho, alpha, &inner)
                    + street_kernel_integral((h + w) / rho, alpha, &inner);
                (-lp * rho * a).exp()
            },
            0.0,
            h,
            &mid,
        );
        avg.value / h
    };
    let res = dist.expect_length_biased(per_h, &outer);
    let v = checked(res, |v| v)?;
    Ok(v.powf(params.m as f64 / 2.0))
}

/// ∫_a^b dv / (1 + (v² + d²)^{α/2}).
#[cfg(test)]
fn offset_kernel_integral(d2: f64, a: f64, b: f64, alpha: f64, q: &QuadOptions) -> f64 {
    let f = |v: f64| 1.0 / (1.0 + (v * v + d2).powf(0.5 * alpha));
    integrate(f, a, b, q).value
}

/// v ↦ ∫_0^v dx / (1 + (x² + y²)^{α/2}) for one perpendicular offset y,
/// odd in v.
struct OffsetKernel {
    y2: f64,
    alpha: f64,
    total: f64,
    near: f64,
    quad: QuadOptions,
}

impl OffsetKernel {
    fn new(y: f64, alpha: f64, quad: QuadOptions) -> Self {
        let y2 = y * y;
        let near = 2.0 * y.max(1.0);
        let f = |v: f64| 1.0 / (1.0 + (v * v + y2).powf(0.5 * alpha));
        let total = integrate(f, 0.0, near, &quad).value + integrate_to_infinity(f, near, near, &quad).value;
        Self {
            y2,
            alpha,
            total,
            near,
            quad,
        }
    }

    fn density(&self, v: f64) -> f64 {
        1.0 / (1.0 + (v * v + self.y2).powf(0.5 * self.alpha))
    }

    fn tail(&self, v: f64) -> f64 {
        integrate_to_infinity(|x| self.density(x), v, v, &self.quad).value
    }

    fn over(&self, a: f64, b: f64) -> f64 {
        debug_assert!(a <= b);
        if a >= self.near {
            self.tail(a) - self.tail(b)
        } else if b <= -self.near {
            self.tail(-b) - self.tail(-a)
        } else if a <= -self.near && b >= self.near {
            self.total * 2.0 - self.tail(-a) - self.tail(b)
        } else {
            integrate(|x| self.density(x), a, b, &self.quad).value
        }
    }
}

/// ∫ E_H[1 − L] over all stick midpoints, in units of ρ², with the stick
/// along the x axis and the receiver at offset (x, y) from its midpoint.
fn psp_other_sticks_area(params: &NetworkParams, tol: f64) -> Result<f64> {
    let dist = require_sticks(Model::PspPpp, params)?;
    let d = params.derived()?;
    let lp = params.lambda * params.p;
    let rho = rho(&d, params.alpha);
    let alpha = params.alpha;
    let outer = opts(tol);
    let q_y = outer.tightened(0.1);
    let q_x = outer.tightened(0.01);
    let q_v = outer.tightened(0.001);
    let per_h = |h: f64| {
        let hs = h / rho;
        let over_y = |y: f64| {
            let kernel = OffsetKernel::new(y, alpha, q_v);
            let one_minus_l = |x: f64| -(-lp * rho * kernel.over(x - hs, x + hs)).exp_m1();
            let edge = y.max(1.0);
            let lo = (hs - edge).max(0.0);
            let hi = hs + edge;
            let mut total = integrate(one_minus_l, lo, hi, &q_x).value;
            if lo > 0.0 {
                total += integrate(one_minus_l, 0.0, lo, &q_x).value;
            }
            total + integrate_to_infinity(one_minus_l, hi, hi, &q_x).value
        };
        let scale = 1.0 + hs.sqrt();
        // quadrant symmetry in x and y
        4.0 * (integrate(over_y, 0.0, scale, &q_y).value + integrate_to_infinity(over_y, scale, scale, &q_y).value)
    };
    checked(dist.expect(per_h, &outer), |v| v)
}

/// Same area in polar coordinates (γ, ψ) of the midpoint seen from the
/// receiver. Slow for long sticks.
#[cfg(test)]
fn psp_other_sticks_area_polar(params: &NetworkParams, tol: f64) -> Result<f64> {
    let dist = require_sticks(Model::PspPpp, params)?;
    let d = params.derived()?;
    let lp = params.lambda * params.p;
    let rho = rho(&d, params.alpha);
    let alpha = params.alpha;
    let outer = opts(tol);
    let q_psi = outer.tightened(0.1);
    let q_gamma = outer.tightened(0.01);
    let q_u = outer.tightened(0.001);
    let per_h = |h: f64| {
        let hs = h / rho;
        let over_psi = integrate(
            |psi: f64| {
                let (sin, cos) = psi.sin_cos();
                let one_minus_l = |g: f64| {
                    let d2 = (g * sin).powi(2);
                    let shift = g * cos;
                    let k = offset_kernel_integral(d2, shift - hs, shift + hs, alpha, &q_u);
                    -(-lp * rho * k).exp_m1() * g
                };
                let scale = hs.max(1.0);
                integrate(one_minus_l, 0.0, scale, &q_gamma).value
                    + integrate_to_infinity(one_minus_l, scale, scale, &q_gamma).value
            },
            0.0,
            PI / 2.0,
            &q_psi,
        );
        // ψ over [0, π] twice: the half-plane doubled, and [π/2, π] mirrors [0, π/2]
        4.0 * over_psi.value
    };
    checked(dist.expect(per_h, &outer), |v| v)
}

/// PSP-PPP success probability: typical stick(s) times the Laplace
/// functional of the vehicles on all other sticks. Four nested quadratures;
/// from well under a second for short sticks to tens of seconds when the
/// mean stick is a hundred link lengths long.
pub fn success_prob_psp_ppp(params: &NetworkParams, tol: f64) -> Result<f64> {
    let typical = psp_typical_street_moment(params, tol)?;
    if params.mu == 0.0 {
        return Ok(typical);
    }
    let d = params.derived()?;
    let area = psp_other_sticks_area(params, tol)? * rho(&d, params.alpha).powi(2);
    Ok(typical * (-params.mu * area).exp())
}

/// TPPP success probability for sticks: typical stick(s) plus a 2D PPP of
/// intensity 2λμE[H].
pub fn success_prob_tppp_psp(params: &NetworkParams, tol: f64) -> Result<f64> {
    let dist = require_sticks(Model::TpppPsp, params)?;
    let typical = psp_typical_street_moment(params, tol)?;
    let delta = 2.0 / params.alpha;
    let exponent = 2.0
        * params.lambda
        * params.p
        * params.mu
        * PI
        * dist.mean()
        * params.d_link.powi(2)
        * params.theta.powf(delta)
        * gamma_pair(delta);
    Ok(typical * (-exponent).exp())
}

/// Success probability p_m = E[P_m(θ)] of any model.
pub fn success_prob(model: Model, params: &NetworkParams, tol: f64) -> Result<f64> {
    let d = params.derived()?;
    match model {
        Model::Ppp1d => Ok(moment_dppp(cplx(1.0), 1, params.m as f64 * params.lambda / 2.0, params)?.re),
        Model::Ppp2d => Ok(moment_dppp(cplx(1.0), 2, d.lambda2, params)?.re),
        Model::TpppPlp => success_prob_tppp_plp(params),
        Model::PlpPpp => success_prob_plp_ppp(params, tol),
        Model::PspPpp => success_prob_psp_ppp(params, tol),
        Model::TpppPsp => success_prob_tppp_psp(params, tol),
    }
}

/// Variance M₂ − M₁² of the conditional success probability.
pub fn variance_cond_success(model: Model, params: &NetworkParams, tol: f64) -> Result<f64> {
    if !matches!(model, Model::PlpPpp | Model::TpppPlp | Model::Ppp1d | Model::Ppp2d) {
        return Err(Error::Unsupported {
            model,
            what: "analytic second moments",
        });
    }
    let m1 = moment(model, cplx(1.0), params, tol)?.re;
    let m2 = moment(model, cplx(2.0), params, tol)?.re;
    Ok(m2 - m1 * m1)
}

/// Success-probability gap between the PLP-PPP and its TPPP at one point.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct GapPoint {
    pub lambda_p: f64,
    pub d2_theta_delta: f64,
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct GapScan {
    pub mu: f64,
    pub alpha: f64,
    /// Row-major over `lambda_p` (outer) and `d2_theta_delta` (inner).
    pub grid: Vec<GapPoint>,
    /// Largest gap on the grid, refined locally.
    pub best: GapPoint,
}

/// p_PLP − p_TPPP at (λp, D²θ^δ). Both depend on the parameters only
/// through these two combinations.
pub fn success_gap(mu: f64, alpha: f64, m: u32, lambda_p: f64, d2_theta_delta: f64, tol: f64) -> Result<f64> {
    let delta = 2.0 / alpha;
    let params = NetworkParams {
        lambda: lambda_p,
        mu,
        p: 1.0,
        theta: d2_theta_delta.powf(1.0 / delta),
        d_link: 1.0,
        alpha,
        m,
        ..Default::default()
    };
    Ok(success_prob_plp_ppp(&params, tol)? - success_prob_tppp_plp(&params)?)
}

/// Scans the gap over a grid and refines around the largest value.
pub fn max_success_gap(
    mu: f64,
    alpha: f64,
    m: u32,
    lambda_p_grid: &[f64],
    d2_grid: &[f64],
    tol: f64,
    exec: Execution,
) -> Result<GapScan> {
    if lambda_p_grid.is_empty() || d2_grid.is_empty() {
        return Err(Error::Config("gap scan needs non-empty grids".into()));
    }
    let nx = d2_grid.len();
    let eval = |lp: f64, d2: f64| success_gap(mu, alpha, m, lp, d2, tol).map(|gap| GapPoint {
        lambda_p: lp,
        d2_theta_delta: d2,
        gap,
    });
    let grid = map_indexed(exec, lambda_p_grid.len() * nx, |i| eval(lambda_p_grid[i / nx], d2_grid[i % nx]))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let mut best = *grid
        .iter()
        .max_by(|a, b| a.gap.total_cmp(&b.gap))
        .expect("non-empty grid");
    // local refinement in log coordinates around the best cell
    let step = |g: &[f64]| {
        if g.len() > 1 {
            (g[g.len() - 1] / g[0]).ln().abs() / (g.len() - 1) as f64
        } else {
            0.0
        }
    };
    let (mut sx, mut sy) = (step(lambda_p_grid), step(d2_grid));
    for _ in 0..3 {
        if sx == 0.0 && sy == 0.0 {
            break;
        }
        let centre = best;
        let pts: Vec<(f64, f64)> = (-2..=2)
            .flat_map(|i| (-2..=2).map(move |j| (i, j)))
            .map(|(i, j)| {
                (
                    centre.lambda_p * (0.5 * sx * i as f64).exp(),
                    centre.d2_theta_delta * (0.5 * sy * j as f64).exp(),
                )
            })
            .collect();
        let local = map_indexed(exec, pts.len(), |k| eval(pts[k].0, pts[k].1))
            .into_iter()
            .collect::<Result<Vec<_>>>()?;
        for g in local {
            if g.gap > best.gap {
                best = g;
            }
        }
        sx *= 0.5;
        sy *= 0.5;
    }
    Ok(GapScan { mu, alpha, grid, best })
}

/// `n` log-spaced points from `lo` to `hi`.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
        .collect()
}
