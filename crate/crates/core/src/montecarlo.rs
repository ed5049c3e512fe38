//! Simulation estimates of conditional success probabilities and their
//! distribution.
//!
//! Fading and ALOHA are averaged in closed form for each realization, so a
//! realization contributes one exact value of P_m(θ).

use serde::Serialize;

use crate::exec::{map_indexed, Execution};
use crate::geometry::{default_window_radius, replicate_rng, sample_pattern_with, PointPattern};
use crate::model::{Model, NetworkParams, Shadowing};
use crate::{Error, Result};

/// P_m(θ) given the interferer locations and shadowing marks.
pub fn cond_success_prob(pattern: &PointPattern, params: &NetworkParams) -> f64 {
    let s = params.theta * params.d_link.powf(params.alpha) / pattern.link_mark;
    let half_alpha = 0.5 * params.alpha;
    let p = params.p;
    pattern
        .points
        .iter()
        .map(|v| {
            let gain = s * v.shadow_mark;
            1.0 - p * gain / (gain + v.position.norm_sq().powf(half_alpha))
        })
        .product()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub n_realizations: usize,
    pub seed: u64,
    /// Radius of the simulation disc; `None` picks [`default_window_radius`].
    pub window_radius: Option<f64>,
    pub x_grid: Vec<f64>,
    pub record_raw: bool,
    pub exec: Execution,
}

impl SimConfig {
    pub fn new(n_realizations: usize, seed: u64) -> Self {
        Self {
            n_realizations,
            seed,
            window_radius: None,
            x_grid: uniform_x_grid(19),
            record_raw: false,
            exec: Execution::default(),
        }
    }

    pub fn with_x_grid(mut self, x_grid: Vec<f64>) -> Self {
        self.x_grid = x_grid;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_realizations == 0 {
            return Err(Error::Config("n_realizations must be positive".into()));
        }
        if let Some(r) = self.window_radius {
            if !(r > 0.0 && r.is_finite()) {
                return Err(Error::Config(format!("window_radius {r} must be positive")));
            }
        }
        if self.x_grid.iter().any(|&x| !(x > 0.0 && x < 1.0)) {
            return Err(Error::Config("x_grid values must lie in (0, 1)".into()));
        }
        if self.x_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("x_grid must be strictly increasing".into()));
        }
        Ok(())
    }

    fn window(&self, params: &NetworkParams) -> f64 {
        self.window_radius.unwrap_or_else(|| default_window_radius(params))
    }
}

/// `n` evenly spaced points strictly inside (0, 1).
pub fn uniform_x_grid(n: usize) -> Vec<f64> {
    (1..=n).map(|i| i as f64 / (n + 1) as f64).collect()
}

/// Empirical meta distribution on a grid of reliabilities.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmpiricalMd {
    pub x_grid: Vec<f64>,
    /// Fraction of realizations with P_m(θ) > x.
    pub survival: Vec<f64>,
    /// Binomial standard errors of `survival`.
    pub std_err: Vec<f64>,
    pub n_realizations: usize,
    pub window_radius: f64,
    /// Sample mean of P_m(θ) and its standard error.
    pub mean: f64,
    pub mean_std_err: f64,
    /// Unbiased sample variance of P_m(θ).
    pub variance: f64,
    /// Per-realization values in replicate order, when requested.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub raw: Option<Vec<f64>>,
}

impl EmpiricalMd {
    pub fn from_samples(samples: Vec<f64>, x_grid: &[f64], window_radius: f64, keep_raw: bool) -> Self {
        let n = samples.len();
        let nf = n as f64;
        let mut sorted = samples.clone();
        sorted.sort_by(f64::total_cmp);
        let survival: Vec<f64> = x_grid
            .iter()
            .map(|&x| (n - sorted.partition_point(|&v| v <= x)) as f64 / nf)
            .collect();
        let std_err = survival.iter().map(|&f| (f * (1.0 - f) / nf).sqrt()).collect();
        let stats = SampleStats::of(&samples);
        Self {
            x_grid: x_grid.to_vec(),
            survival,
            std_err,
            n_realizations: n,
            window_radius,
            mean: stats.mean,
            mean_std_err: stats.std_err,
            variance: stats.variance,
            raw: keep_raw.then_some(samples),
        }
    }

    /// Largest |difference| between two curves on the same grid, with the
    /// combined standard error at that point.
    pub fn sup_gap(&self, other: &EmpiricalMd) -> (f64, f64) {
        self.survival
            .iter()
            .zip(&other.survival)
            .zip(self.std_err.iter().zip(&other.std_err))
            .map(|((a, b), (sa, sb))| ((a - b).abs(), sa.hypot(*sb)))
            .fold((0.0, 0.0), |best, cur| if cur.0 > best.0 { cur } else { best })
    }

    /// Largest |difference| to reference values on the same grid.
    pub fn sup_gap_to(&self, reference: &[f64]) -> f64 {
        self.survival
            .iter()
            .zip(reference)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SampleStats {
    pub mean: f64,
    pub std_err: f64,
    pub variance: f64,
    /// Mean of the squared values and its standard error.
    pub second_moment: f64,
    pub second_moment_std_err: f64,
}

impl SampleStats {
    pub fn of(xs: &[f64]) -> Self {
        let n = xs.len() as f64;
        let (m1, e1) = mean_se(xs.iter().copied(), n);
        let (m2, e2) = mean_se(xs.iter().map(|x| x * x), n);
        let variance = xs.iter().map(|x| (x - m1).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
        Self {
            mean: m1,
            std_err: e1,
            variance,
            second_moment: m2,
            second_moment_std_err: e2,
        }
    }
}

fn mean_se(xs: impl Iterator<Item = f64> + Clone, n: f64) -> (f64, f64) {
    let mean = xs.clone().sum::<f64>() / n;
    let var = xs.map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    (mean, (var / n).sqrt())
}

/// P_m(θ) for each replicate, in replicate order.
pub fn simulate_cond_success(model: Model, params: &NetworkParams, sim: &SimConfig) -> Result<Vec<f64>> {
    sim.validate()?;
    params.derived()?;
    let window = sim.window(params);
    map_indexed(sim.exec, sim.n_realizations, |i| {
        let mut rng = replicate_rng(sim.seed, i as u64);
        sample_pattern_with(model, params, window, &mut rng).map(|p| cond_success_prob(&p, params))
    })
    .into_iter()
    .collect()
}

pub fn estimate_md(model: Model, params: &NetworkParams, sim: &SimConfig) -> Result<EmpiricalMd> {
    let samples = simulate_cond_success(model, params, sim)?;
    Ok(EmpiricalMd::from_samples(samples, &sim.x_grid, sim.window(params), sim.record_raw))
}

/// Sample mean of P_m(θ) and its standard error.
pub fn estimate_success_prob(model: Model, params: &NetworkParams, sim: &SimConfig) -> Result<(f64, f64)> {
    let s = estimate_moments(model, params, sim)?;
    Ok((s.mean, s.std_err))
}

pub fn estimate_moments(model: Model, params: &NetworkParams, sim: &SimConfig) -> Result<SampleStats> {
    Ok(SampleStats::of(&simulate_cond_success(model, params, sim)?))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShadowingGapRow {
    pub sigma: f64,
    /// E[ν^δ].
    pub density_scaling: f64,
    /// Vehicle intensity after scaling.
    pub lambda: f64,
    pub sup_gap: f64,
    pub gap_std_err: f64,
}

/// Sup-gap between the PLP-PPP and TPPP empirical MDs as the shadowing
/// spread grows, with `params.lambda` read as λ′ and λ = λ′/E[ν^δ].
pub fn shadowing_gap_sweep(params: &NetworkParams, sigmas: &[f64], sim: &SimConfig) -> Result<Vec<ShadowingGapRow>> {
    if sigmas.iter().any(|s| !(*s >= 0.0)) || sigmas.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Config("sigmas must be non-negative and increasing".into()));
    }
    let delta = params.derived()?.delta;
    sigmas
        .iter()
        .map(|&sigma| {
            let scaling = Shadowing::new(sigma).moment(delta);
            let scaled = NetworkParams {
                lambda: params.lambda / scaling,
                shadow_sigma: sigma,
                ..*params
            };
            let plp = estimate_md(Model::PlpPpp, &scaled, sim)?;
            let tppp = estimate_md(Model::TpppPlp, &scaled, sim)?;
            let (gap, se) = plp.sup_gap(&tppp);
            Ok(ShadowingGapRow {
                sigma,
                density_scaling: scaling,
                lambda: scaled.lambda,
                sup_gap: gap,
                gap_std_err: se,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Point, Vehicle};

    fn at(x: f64, y: f64) -> Vehicle {
        Vehicle {
            position: Point::new(x, y),
            shadow_mark: 1.0,
            on_typical_street: false,
        }
    }

    #[test]
    fn empty_pattern_always_succeeds() {
        let p = NetworkParams::default();
        let pat = PointPattern {
            points: vec![],
            link_mark: 1.0,
        };
        assert_eq!(cond_success_prob(&pat, &p), 1.0);
    }

    #[test]
    fn interferer_at_link_distance() {
        for &alpha in &[2.5, 4.0, 6.0] {
            let p = NetworkParams { alpha, ..Default::default() };
            let pat = PointPattern {
                points: vec![at(0.0, p.d_link)],
                link_mark: 1.0,
            };
            assert!((cond_success_prob(&pat, &p) - (1.0 - p.p / 2.0)).abs() < 1e-15);
        }
    }

    #[test]
    fn shadowing_marks_scale_the_kernel() {
        let p = NetworkParams::default();
        // doubling both marks leaves the SIR unchanged
        let mut a = PointPattern {
            points: vec![at(0.3, 0.1), at(-1.0, 0.2)],
            link_mark: 1.0,
        };
        let base = cond_success_prob(&a, &p);
        a.link_mark = 2.0;
        for v in &mut a.points {
            v.shadow_mark = 2.0;
        }
        assert!((cond_success_prob(&a, &p) - base).abs() < 1e-15);
    }

    #[test]
    fn empty_network_md() {
        let p = NetworkParams {
            lambda: 0.0,
            mu: 0.0,
            ..Default::default()
        };
        let sim = SimConfig::new(50, 3);
        let md = estimate_md(Model::PlpPpp, &p, &sim).unwrap();
        assert!(md.survival.iter().all(|&v| v == 1.0));
        assert_eq!(estimate_success_prob(Model::TpppPlp, &p, &sim).unwrap(), (1.0, 0.0));
    }

    #[test]
    fn empirical_md_counts() {
        let md = EmpiricalMd::from_samples(vec![0.1, 0.5, 0.5, 0.9], &[0.05, 0.5, 0.95], 1.0, true);
        assert_eq!(md.survival, vec![1.0, 0.25, 0.0]);
        assert_eq!(md.mean, 0.5);
        assert_eq!(md.raw.as_deref(), Some(&[0.1, 0.5, 0.5, 0.9][..]));
    }

    #[test]
    fn config_validation() {
        assert!(SimConfig::new(0, 1).validate().is_err());
        assert!(SimConfig::new(1, 1).with_x_grid(vec![0.5, 0.2]).validate().is_err());
        assert!(SimConfig::new(1, 1).with_x_grid(vec![0.0]).validate().is_err());
        assert!(SimConfig::new(1, 1).validate().is_ok());
    }

    #[test]
    fn trivial_shadowing_has_unit_scaling() {
        let p = NetworkParams::default();
        let rows = shadowing_gap_sweep(&p, &[0.0], &SimConfig::new(20, 1)).unwrap();
        assert_eq!(rows[0].density_scaling, 1.0);
        assert_eq!(rows[0].lambda, p.lambda);
    }
}
