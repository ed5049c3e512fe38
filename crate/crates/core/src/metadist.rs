//! Meta distribution of the conditional success probability: exact values
//! by Gil-Pelaez inversion and the beta approximation.

use serde::Serialize;

use crate::analytic::{log_moment, moment, success_prob};
use crate::exec::{map_indexed, map_slice, Execution};
use crate::model::{from_db, Model, NetworkParams};
use crate::montecarlo::{estimate_moments, SimConfig};
use crate::numerics::{
    brent_root, gil_pelaez, reg_inc_beta, ChebyshevPanel, ComplexValue, GilPelaezOptions, NumericsError,
};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MdOptions {
    /// Absolute accuracy of each meta distribution value.
    pub tol: f64,
    /// Quadrature tolerance of each moment evaluation.
    pub moment_tol: f64,
    /// Chebyshev nodes per panel of the moment table.
    pub nodes: usize,
    /// Upper limit of the moment table.
    pub t_cap: f64,
    pub exec: Execution,
}

impl Default for MdOptions {
    fn default() -> Self {
        Self {
            tol: 1e-4,
            moment_tol: 1e-8,
            nodes: 16,
            t_cap: 1e5,
            exec: Execution::default(),
        }
    }
}

impl MdOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self {
            tol,
            moment_tol: (tol * 1e-2).min(1e-6),
            ..Default::default()
        }
    }
}

/// Piecewise Chebyshev interpolant of t ↦ ln M_{jt} on [0, t_end].
///
/// The table ends once |M_{jt}|/t is small enough for the inversion
/// integral beyond it to be negligible at the requested accuracy.
#[derive(Debug, Clone)]
pub struct MomentTable {
    panels: Vec<ChebyshevPanel>,
    t_end: f64,
    evaluations: usize,
}

impl MomentTable {
    pub fn build<F>(log_moment: F, opts: &MdOptions) -> Result<Self>
    where
        F: Fn(f64) -> Result<ComplexValue> + Sync + Send,
    {
        let abs_tol = 1e-2 * opts.tol;
        let decay_tol = 3e-3 * opts.tol;
        let mut panels = Vec::new();
        let mut evaluations = 0;
        let (mut a, mut width) = (0.0f64, 1.0f64);
        loop {
            let b = (a + width).min(opts.t_cap);
            let nodes = ChebyshevPanel::nodes(a, b, opts.nodes);
            let values = map_slice(opts.exec, &nodes, |&t| log_moment(t))
                .into_iter()
                .collect::<Result<Vec<_>>>()?;
            evaluations += values.len();
            let panel = ChebyshevPanel::from_values(a, b, &values);
            let peak = values.iter().map(|v| v.re).fold(f64::NEG_INFINITY, f64::max).exp();
            let allowed = (abs_tol / peak).min(1e-2);
            let tail = panel.tail_magnitude();
            // tail ∝ width^n for an analytic function; aim a little under the bound
            let factor = (0.8 * (allowed / tail).powf(1.0 / opts.nodes as f64)).clamp(0.25, 2.0);
            if tail <= allowed {
                let end = panel.eval(b);
                panels.push(panel);
                a = b;
                if end.re.exp() / b < decay_tol || b >= opts.t_cap {
                    break;
                }
                width *= factor.max(1.0);
            } else {
                width = (b - a) * factor.min(0.8);
                if width < 1e-6 {
                    return Err(NumericsError::NoConvergence {
                        what: "moment table",
                        partial: a,
                        abs_err: panel.tail_magnitude(),
                    }
                    .into());
                }
            }
        }
        Ok(Self {
            panels,
            t_end: a,
            evaluations,
        })
    }

    /// Table of the model's analytic moments.
    pub fn for_model(model: Model, params: &NetworkParams, opts: &MdOptions) -> Result<Self> {
        let moment_tol = opts.moment_tol;
        Self::build(
            |t| log_moment(model, ComplexValue::new(0.0, t), params, moment_tol),
            opts,
        )
    }

    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    pub fn panel_count(&self) -> usize {
        self.panels.len()
    }

    /// Number of moment evaluations spent building the table.
    pub fn evaluations(&self) -> usize {
        self.evaluations
    }

    pub fn log_moment(&self, t: f64) -> ComplexValue {
        let i = self
            .panels
            .partition_point(|p| p.interval().1 < t)
            .min(self.panels.len() - 1);
        self.panels[i].eval(t)
    }

    /// M_{jt}, zero beyond the end of the table.
    pub fn moment(&self, t: f64) -> ComplexValue {
        if t > self.t_end {
            return ComplexValue::new(0.0, 0.0);
        }
        self.log_moment(t).exp()
    }

    /// P(P_m > x) by Gil-Pelaez inversion of the tabulated moments.
    pub fn survival(&self, x: f64, tol: f64) -> Result<f64> {
        let opts = GilPelaezOptions {
            tol,
            t_max: self.t_end,
            ..Default::default()
        };
        Ok(gil_pelaez(|t| self.moment(t), x, &opts)?)
    }
}

fn require_analytic_moments(model: Model) -> Result<()> {
    if model.needs_sticks() {
        return Err(Error::Unsupported {
            model,
            what: "an exact meta distribution",
        });
    }
    Ok(())
}

/// Exact meta distribution on a grid of reliabilities. The moment table is
/// built once and shared across `xs`.
pub fn md_exact_curve(model: Model, params: &NetworkParams, xs: &[f64], opts: &MdOptions) -> Result<Vec<f64>> {
    require_analytic_moments(model)?;
    params.derived()?;
    if let Some(&bad) = xs.iter().find(|&&x| !(x > 0.0 && x < 1.0)) {
        return Err(NumericsError::Domain(format!("reliability {bad} outside (0, 1)")).into());
    }
    if success_prob(model, params, opts.moment_tol)? >= 1.0 {
        return Ok(vec![1.0; xs.len()]);
    }
    let table = MomentTable::for_model(model, params, opts)?;
    map_slice(opts.exec, xs, |&x| table.survival(x, opts.tol))
        .into_iter()
        .collect()
}

pub fn md_exact(model: Model, params: &NetworkParams, x: f64, opts: &MdOptions) -> Result<f64> {
    Ok(md_exact_curve(model, params, &[x], opts)?[0])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BetaParams {
    pub alpha_shape: f64,
    pub beta_shape: f64,
}

impl BetaParams {
    pub fn mean(&self) -> f64 {
        self.alpha_shape / (self.alpha_shape + self.beta_shape)
    }

    pub fn second_moment(&self) -> f64 {
        let (a, b) = (self.alpha_shape, self.beta_shape);
        a * (a + 1.0) / ((a + b) * (a + b + 1.0))
    }

    /// 1 − I_x(α, β).
    pub fn survival(&self, x: f64) -> f64 {
        1.0 - reg_inc_beta(x.clamp(0.0, 1.0), self.alpha_shape, self.beta_shape)
    }
}

/// Beta law with the given first two moments.
pub fn beta_from_moments(m1: f64, m2: f64) -> Result<BetaParams, NumericsError> {
    let var = m2 - m1 * m1;
    if !(m1 > 0.0 && m1 < 1.0 && var > 0.0 && m2 < m1) {
        return Err(NumericsError::InfeasibleMoments { m1, m2 });
    }
    let alpha_shape = m1 * (m1 - m2) / var;
    Ok(BetaParams {
        alpha_shape,
        beta_shape: alpha_shape * (1.0 - m1) / m1,
    })
}

/// Beta approximation built from two moments, degenerate at M₁ when the
/// moments admit no beta law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BetaMd {
    pub m1: f64,
    pub m2: f64,
    pub fit: Option<BetaParams>,
}

impl BetaMd {
    pub fn new(m1: f64, m2: f64) -> Self {
        Self {
            m1,
            m2,
            fit: beta_from_moments(m1, m2).ok(),
        }
    }

    pub fn for_model(model: Model, params: &NetworkParams, tol: f64) -> Result<Self> {
        let one = ComplexValue::new(1.0, 0.0);
        let two = ComplexValue::new(2.0, 0.0);
        let m1 = moment(model, one, params, tol)?.re;
        let m2 = moment(model, two, params, tol)?.re;
        Ok(Self::new(m1, m2))
    }

    pub fn survival(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 1.0;
        }
        if x >= 1.0 {
            return 0.0;
        }
        match self.fit {
            Some(b) => b.survival(x),
            None if x < self.m1 => 1.0,
            None => 0.0,
        }
    }
}

/// Beta-approximated meta distribution at reliability `x ∈ [0, 1]`.
pub fn md_beta(model: Model, params: &NetworkParams, x: f64, tol: f64) -> Result<f64> {
    Ok(BetaMd::for_model(model, params, tol)?.survival(x))
}

/// Beta approximation for stick models: analytic first moment, simulated
/// second moment.
pub fn psp_beta(model: Model, params: &NetworkParams, sim: &SimConfig, tol: f64) -> Result<BetaMd> {
    let m1 = success_prob(model, params, tol)?;
    let m2 = estimate_moments(model, params, sim)?.second_moment;
    Ok(BetaMd::new(m1, m2))
}

/// Which meta distribution route to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MdMethod {
    Exact,
    Beta,
    Empirical,
}

/// θ in dB at which the exact meta distribution at `x` equals `target`,
/// searched on `[lo_db, hi_db]`.
///
/// The beta approximation locates the root first, so the exact inversion is
/// only evaluated close to it and never deep in the near-degenerate tails.
pub fn theta_db_for_md(
    model: Model,
    params: &NetworkParams,
    x: f64,
    target: f64,
    (lo_db, hi_db): (f64, f64),
    opts: &MdOptions,
) -> Result<f64> {
    if !(lo_db < hi_db) {
        return Err(Error::Config(format!("empty θ bracket [{lo_db}, {hi_db}]")));
    }
    let mut failure = None;
    let beta_guess = brent_root(
        |db| match md_beta(model, &params.with_theta(from_db(db)), x, opts.moment_tol) {
            Ok(v) => v - target,
            Err(e) => {
                failure.get_or_insert(e);
                f64::NAN
            }
        },
        lo_db,
        hi_db,
        1e-3,
    );
    if let Some(e) = failure.take() {
        return Err(e);
    }
    let exact = |db: f64| md_exact(model, &params.with_theta(from_db(db)), x, opts).map(|v| v - target);
    let (mut a, mut b) = match beta_guess {
        Ok(g) => ((g - 1.0).max(lo_db), (g + 1.0).min(hi_db)),
        Err(_) => (lo_db, hi_db),
    };
    let mut width = b - a;
    let (mut fa, mut fb) = (exact(a)?, exact(b)?);
    while fa * fb > 0.0 && (a > lo_db || b < hi_db) {
        width *= 2.0;
        // the meta distribution decreases in θ
        if fa > 0.0 {
            a = b;
            fa = fb;
            b = (b + width).min(hi_db);
            fb = exact(b)?;
        } else {
            b = a;
            fb = fa;
            a = (a - width).max(lo_db);
            fa = exact(a)?;
        }
    }
    let root = brent_root(
        |db| match exact(db) {
            Ok(v) => v,
            Err(e) => {
                failure.get_or_insert(e);
                f64::NAN
            }
        },
        a,
        b,
        1e-4,
    );
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(root?)
}

/// Exact meta distribution at `x` for each θ in `thetas` (linear).
pub fn md_exact_theta_sweep(
    model: Model,
    params: &NetworkParams,
    x: f64,
    thetas: &[f64],
    opts: &MdOptions,
) -> Result<Vec<f64>> {
    let inner = MdOptions {
        exec: Execution::Sequential,
        ..*opts
    };
    map_indexed(opts.exec, thetas.len(), |i| {
        md_exact(model, &params.with_theta(thetas[i]), x, &inner)
    })
    .into_iter()
    .collect()
}
