//! Street systems and vehicle patterns seen from a typical vehicle at the
//! origin, and their nearest-neighbour statistics.

use std::f64::consts::PI;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use rand_distr::{Distribution, Poisson};

use crate::exec::{map_indexed, Execution};
use crate::model::{HalfLengthDist, Model, NetworkParams, Shadowing};
use crate::numerics::{integrate, QuadOptions};
use crate::{Error, Result};

/// Bound on the mean success-probability bias caused by dropping
/// interferers outside the simulation window.
pub const TRUNCATION_BIAS: f64 = 1e-4;
const MAX_DEFAULT_WINDOW: f64 = 100.0;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn norm_sq(self) -> f64 {
        self.x * self.x + self.y * self.y
    }

    pub fn norm(self) -> f64 {
        self.norm_sq().sqrt()
    }
}

/// The line `x cos φ + y sin φ = t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Line {
    pub t: f64,
    pub phi: f64,
}

impl Line {
    pub fn contains(&self, p: Point, eps: f64) -> bool {
        (p.x * self.phi.cos() + p.y * self.phi.sin() - self.t).abs() <= eps
    }

    /// Foot of the perpendicular from the origin.
    pub fn foot(&self) -> Point {
        Point::new(self.t * self.phi.cos(), self.t * self.phi.sin())
    }

    /// Unit direction along the line.
    pub fn direction(&self) -> Point {
        Point::new(-self.phi.sin(), self.phi.cos())
    }
}

/// Segment `midpoint + s·(cos o, sin o)` for `s ∈ [-h, h]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stick {
    pub midpoint: Point,
    pub orientation: f64,
    pub half_length: f64,
}

impl Stick {
    pub fn endpoints(&self) -> (Point, Point) {
        let (s, c) = self.orientation.sin_cos();
        let h = self.half_length;
        (
            Point::new(self.midpoint.x - h * c, self.midpoint.y - h * s),
            Point::new(self.midpoint.x + h * c, self.midpoint.y + h * s),
        )
    }

    pub fn length(&self) -> f64 {
        2.0 * self.half_length
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Street {
    Line(Line),
    Stick(Stick),
}

#[derive(Debug, Clone, PartialEq)]
pub struct StreetSystem {
    /// The m/2 streets through the origin.
    pub typical_streets: Vec<Street>,
    pub other_streets: Vec<Street>,
    pub window_radius: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Vehicle {
    pub position: Point,
    /// Shadowing coefficient of the link from this vehicle; 1 without shadowing.
    pub shadow_mark: f64,
    pub on_typical_street: bool,
}

/// Interferer locations relative to the receiver at the origin.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PointPattern {
    pub points: Vec<Vehicle>,
    /// Shadowing coefficient of the desired link.
    pub link_mark: f64,
}

impl PointPattern {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Squared distances of the `n` nearest points, ascending.
    pub fn nearest_sq_distances(&self, n: usize) -> Vec<f64> {
        let mut d: Vec<f64> = self.points.iter().map(|v| v.position.norm_sq()).collect();
        if d.len() > n {
            d.select_nth_unstable_by(n - 1, f64::total_cmp);
            d.truncate(n);
        }
        d.sort_by(f64::total_cmp);
        d
    }
}

/// Independent generator for replicate `index` of a run seeded with `seed`.
pub fn replicate_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Window radius at which dropping far interferers biases the success
/// probability by less than [`TRUNCATION_BIAS`], capped at 100.
pub fn default_window_radius(params: &NetworkParams) -> f64 {
    let Ok(derived) = params.derived() else {
        return 1.0;
    };
    let a = params.alpha;
    // E[1/ν] enlarges the effective s under shadowing
    let s = derived.s * (1.0 + params.shadow_sigma * params.shadow_sigma);
    let lp = params.lambda * params.p;
    let bias = |r: f64| {
        s * lp
            * (2.0 * PI * derived.tau * r.powf(2.0 - a) / (a - 2.0)
                + params.m as f64 * r.powf(1.0 - a) / (a - 1.0))
    };
    let floor = (4.0 * params.d_link).max(1.0);
    if bias(floor) <= TRUNCATION_BIAS {
        return floor;
    }
    let (mut lo, mut hi) = (floor, floor);
    while bias(hi) > TRUNCATION_BIAS && hi < MAX_DEFAULT_WINDOW {
        lo = hi;
        hi *= 2.0;
    }
    if hi >= MAX_DEFAULT_WINDOW {
        return MAX_DEFAULT_WINDOW;
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if bias(mid) > TRUNCATION_BIAS {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

/// Window large enough that the `n_max`-th neighbour lies inside it with
/// overwhelming probability.
pub fn nn_window_radius(params: &NetworkParams, n_max: usize) -> f64 {
    let n = n_max as f64 + 5.0 * (n_max as f64).sqrt() + 10.0;
    let area_intensity = params.lambda * params.derived().map(|d| d.tau).unwrap_or(0.0);
    let r2d = if area_intensity > 0.0 {
        (n / (PI * area_intensity)).sqrt()
    } else {
        f64::INFINITY
    };
    let r1d = n / (params.m as f64 * params.lambda.max(1e-12));
    3.0 * r2d.min(r1d)
}

fn poisson<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    Poisson::new(mean).map(|d| d.sample(rng) as u64).unwrap_or(0)
}

struct Marks {
    shadowing: Shadowing,
}

impl Marks {
    fn vehicle<R: Rng + ?Sized>(&self, position: Point, typical: bool, rng: &mut R) -> Vehicle {
        Vehicle {
            position,
            shadow_mark: self.shadowing.sample(rng),
            on_typical_street: typical,
        }
    }
}

/// 1D PPP of intensity λ on `origin + s·dir`, `s ∈ [lo, hi]`.
fn vehicles_on_segment<R: Rng + ?Sized>(
    out: &mut Vec<Vehicle>,
    marks: &Marks,
    origin: Point,
    dir: Point,
    (lo, hi): (f64, f64),
    lambda: f64,
    typical: bool,
    window: f64,
    rng: &mut R,
) {
    if hi <= lo {
        return;
    }
    let n = poisson(lambda * (hi - lo), rng);
    for _ in 0..n {
        let s = lo + (hi - lo) * rng.random::<f64>();
        let pos = Point::new(origin.x + s * dir.x, origin.y + s * dir.y);
        if pos.norm_sq() <= window * window {
            out.push(marks.vehicle(pos, typical, rng));
        }
    }
}

fn typical_lines(params: &NetworkParams) -> Vec<Line> {
    // fixed along the axes by isotropy
    (0..params.typical_streets())
        .map(|k| Line {
            t: 0.0,
            phi: PI / 2.0 + k as f64 * PI / 2.0,
        })
        .collect()
}

fn sample_typical_line_vehicles<R: Rng + ?Sized>(
    out: &mut Vec<Vehicle>,
    marks: &Marks,
    lines: &[Line],
    params: &NetworkParams,
    window: f64,
    rng: &mut R,
) {
    for line in lines {
        vehicles_on_segment(
            out,
            marks,
            line.foot(),
            line.direction(),
            (-window, window),
            params.lambda,
            true,
            window,
            rng,
        );
    }
}

fn sample_typical_sticks<R: Rng + ?Sized>(
    out: &mut Vec<Vehicle>,
    marks: &Marks,
    dist: HalfLengthDist,
    params: &NetworkParams,
    window: f64,
    rng: &mut R,
) -> Vec<Stick> {
    (0..params.typical_streets())
        .map(|k| {
            let orientation = k as f64 * PI / 2.0;
            let h = dist.sample_length_biased(rng);
            // signed position of the origin relative to the midpoint
            let w = h * (2.0 * rng.random::<f64>() - 1.0);
            let dir = Point::new(orientation.cos(), orientation.sin());
            let midpoint = Point::new(-w * dir.x, -w * dir.y);
            vehicles_on_segment(out, marks, midpoint, dir, (-h, h), params.lambda, true, window, rng);
            Stick {
                midpoint,
                orientation,
                half_length: h,
            }
        })
        .collect()
}

fn sample_disc_ppp<R: Rng + ?Sized>(
    out: &mut Vec<Vehicle>,
    marks: &Marks,
    intensity: f64,
    window: f64,
    rng: &mut R,
) {
    let n = poisson(intensity * PI * window * window, rng);
    for _ in 0..n {
        let r = window * rng.random::<f64>().sqrt();
        let a = 2.0 * PI * rng.random::<f64>();
        out.push(marks.vehicle(Point::new(r * a.cos(), r * a.sin()), false, rng));
    }
}

fn marks_for(params: &NetworkParams) -> Marks {
    Marks {
        shadowing: Shadowing::new(params.shadow_sigma),
    }
}

fn require_sticks(model: Model, params: &NetworkParams) -> Result<HalfLengthDist> {
    params.half_length().ok_or(Error::Unsupported {
        model,
        what: "a line street model (a stick half-length law is required)",
    })
}

/// PLP-PPP realization in `b(o, window)` drawn from `rng`.
pub fn sample_plp_ppp_with<R: Rng + ?Sized>(
    params: &NetworkParams,
    window: f64,
    rng: &mut R,
) -> (StreetSystem, PointPattern) {
    let marks = marks_for(params);
    let link_mark = marks.shadowing.sample(rng);
    let mut points = Vec::new();
    let typical = typical_lines(params);
    sample_typical_line_vehicles(&mut points, &marks, &typical, params, window, rng);
    let n_lines = poisson(2.0 * params.mu * window, rng);
    let mut others = Vec::with_capacity(n_lines as usize);
    for _ in 0..n_lines {
        let line = Line {
            t: window * (2.0 * rng.random::<f64>() - 1.0),
            phi: PI * rng.random::<f64>(),
        };
        let half_chord = (window * window - line.t * line.t).max(0.0).sqrt();
        vehicles_on_segment(
            &mut points,
            &marks,
            line.foot(),
            line.direction(),
            (-half_chord, half_chord),
            params.lambda,
            false,
            window,
            rng,
        );
        others.push(Street::Line(line));
    }
    (
        StreetSystem {
            typical_streets: typical.into_iter().map(Street::Line).collect(),
            other_streets: others,
            window_radius: window,
        },
        PointPattern { points, link_mark },
    )
}

/// PSP-PPP realization in `b(o, window)` drawn from `rng`.
pub fn sample_psp_ppp_with<R: Rng + ?Sized>(
    params: &NetworkParams,
    dist: HalfLengthDist,
    window: f64,
    rng: &mut R,
) -> (StreetSystem, PointPattern) {
    let marks = marks_for(params);
    let link_mark = marks.shadowing.sample(rng);
    let mut points = Vec::new();
    let typical = sample_typical_sticks(&mut points, &marks, dist, params, window, rng);
    let reach = window + dist.cutoff();
    let n_sticks = poisson(params.mu * PI * reach * reach, rng);
    let mut others = Vec::with_capacity(n_sticks as usize);
    for _ in 0..n_sticks {
        let r = reach * rng.random::<f64>().sqrt();
        let a = 2.0 * PI * rng.random::<f64>();
        let stick = Stick {
            midpoint: Point::new(r * a.cos(), r * a.sin()),
            orientation: PI * rng.random::<f64>(),
            half_length: dist.sample(rng),
        };
        let dir = Point::new(stick.orientation.cos(), stick.orientation.sin());
        let h = stick.half_length;
        vehicles_on_segment(&mut points, &marks, stick.midpoint, dir, (-h, h), params.lambda, false, window, rng);
        others.push(Street::Stick(stick));
    }
    (
        StreetSystem {
            typical_streets: typical.into_iter().map(Street::Stick).collect(),
            other_streets: others,
            window_radius: window,
        },
        PointPattern { points, link_mark },
    )
}

/// Pattern of any model drawn from `rng`.
pub fn sample_pattern_with<R: Rng + ?Sized>(
    model: Model,
    params: &NetworkParams,
    window: f64,
    rng: &mut R,
) -> Result<PointPattern> {
    let derived = params.derived()?;
    let marks = marks_for(params);
    Ok(match model {
        Model::PlpPpp => sample_plp_ppp_with(params, window, rng).1,
        Model::PspPpp => {
            let dist = require_sticks(model, params)?;
            sample_psp_ppp_with(params, dist, window, rng).1
        }
        Model::Ppp1d | Model::TpppPlp => {
            let link_mark = marks.shadowing.sample(rng);
            let mut points = Vec::new();
            sample_typical_line_vehicles(&mut points, &marks, &typical_lines(params), params, window, rng);
            if model == Model::TpppPlp {
                sample_disc_ppp(&mut points, &marks, params.lambda * params.mu, window, rng);
            }
            PointPattern { points, link_mark }
        }
        Model::TpppPsp => {
            let dist = require_sticks(model, params)?;
            let link_mark = marks.shadowing.sample(rng);
            let mut points = Vec::new();
            sample_typical_sticks(&mut points, &marks, dist, params, window, rng);
            sample_disc_ppp(&mut points, &marks, derived.lambda2, window, rng);
            PointPattern { points, link_mark }
        }
        Model::Ppp2d => {
            let link_mark = marks.shadowing.sample(rng);
            let mut points = Vec::new();
            sample_disc_ppp(&mut points, &marks, derived.lambda2, window, rng);
            PointPattern { points, link_mark }
        }
    })
}

pub fn sample_plp_ppp(params: &NetworkParams, window_radius: f64, rng_seed: u64) -> (StreetSystem, PointPattern) {
    sample_plp_ppp_with(params, window_radius, &mut ChaCha8Rng::seed_from_u64(rng_seed))
}

pub fn sample_psp_ppp(
    params: &NetworkParams,
    window_radius: f64,
    rng_seed: u64,
) -> Result<(StreetSystem, PointPattern)> {
    let dist = require_sticks(Model::PspPpp, params)?;
    Ok(sample_psp_ppp_with(params, dist, window_radius, &mut ChaCha8Rng::seed_from_u64(rng_seed)))
}

/// TPPP realization matching the street model of `params`.
pub fn sample_tppp(params: &NetworkParams, window_radius: f64, rng_seed: u64) -> Result<PointPattern> {
    let model = if params.half_length().is_some() {
        Model::TpppPsp
    } else {
        Model::TpppPlp
    };
    sample_pattern_with(model, params, window_radius, &mut ChaCha8Rng::seed_from_u64(rng_seed))
}

/// Length of the part of a stick with half-length `h` inside `b(o, r)` when
/// its midpoint lies at distance `gamma` and `cos_psi` is the cosine of the
/// angle between the midpoint direction and the stick.
pub fn stick_chord(r: f64, gamma: f64, cos_psi: f64, h: f64) -> f64 {
    let disc = r * r - gamma * gamma * (1.0 - cos_psi * cos_psi).max(0.0);
    if disc < 0.0 {
        return 0.0;
    }
    let root = disc.sqrt();
    // roots of |y + s e| = r in the stick coordinate s
    let u1 = (-gamma * cos_psi + root).abs();
    let u2 = (-gamma * cos_psi - root).abs();
    if gamma <= r {
        u1.min(h) + u2.min(h)
    } else {
        (u1.min(h) - u2.min(h)).abs()
    }
}

/// Nearest-neighbour distance CDF of the interferer pattern.
pub fn nnd_cdf(model: Model, params: &NetworkParams, r: f64) -> Result<f64> {
    let derived = params.derived()?;
    if r <= 0.0 {
        return Ok(0.0);
    }
    let m = params.m as f64;
    let lambda = params.lambda;
    let quad = QuadOptions::with_tol(1e-10);
    let exponent = match model {
        Model::Ppp1d => lambda * m * r,
        Model::Ppp2d => derived.lambda2 * PI * r * r,
        Model::TpppPlp => lambda * m * r + lambda * params.mu * PI * r * r,
        Model::PlpPpp => {
            let lines = integrate(
                |u: f64| -(-2.0 * lambda * (r * r - u * u).max(0.0).sqrt()).exp_m1(),
                0.0,
                r,
                &quad,
            );
            lambda * m * r + 2.0 * params.mu * lines.value
        }
        Model::PspPpp | Model::TpppPsp => {
            let dist = require_sticks(model, params)?;
            let typical = psp_typical_void(dist, lambda, r, &quad);
            let rest = if model == Model::PspPpp {
                psp_other_sticks_hit(dist, lambda, params.mu, r, &quad)
            } else {
                derived.lambda2 * PI * r * r
            };
            return Ok(1.0 - typical.powf(m / 2.0) * (-rest).exp());
        }
    };
    Ok(-(-exponent).exp_m1())
}

/// Probability that the typical stick holds no vehicle within `r`.
fn psp_typical_void(dist: HalfLengthDist, lambda: f64, r: f64, quad: &QuadOptions) -> f64 {
    let inner = quad.tightened(0.1);
    dist.expect_length_biased(
        |h| {
            if h <= 0.0 {
                return 1.0;
            }
            let avg = integrate(
                |g: f64| (-lambda * stick_chord(r, g, 1.0, h)).exp(),
                0.0,
                h,
                &inner,
            );
            avg.value / h
        },
        quad,
    )
    .value
}

/// Mean number of non-typical sticks carrying a vehicle within `r`.
fn psp_other_sticks_hit(dist: HalfLengthDist, lambda: f64, mu: f64, r: f64, quad: &QuadOptions) -> f64 {
    let inner = quad.tightened(0.1);
    let inner2 = quad.tightened(0.01);
    let per_h = |h: f64| {
        // ψ ∈ [0, π/2] by symmetry, doubled
        let over_psi = integrate(
            |psi: f64| {
                let c = psi.cos();
                integrate(
                    |g: f64| -(-lambda * stick_chord(r, g, c, h)).exp_m1() * g,
                    0.0,
                    r + h,
                    &inner2,
                )
                .value
            },
            0.0,
            PI / 2.0,
            &inner,
        );
        2.0 * over_psi.value
    };
    2.0 * mu * dist.expect(per_h, quad).value
}

/// Pair correlation function of the PLP-PPP.
pub fn pcf_plp_ppp(mu: f64, r: f64) -> f64 {
    1.0 + 1.0 / (mu * r)
}

/// Empirical E[r_n²]/n with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NnMoment {
    pub n: usize,
    pub mean: f64,
    pub std_err: f64,
}

/// Normalized mean squared distances to the n-th nearest interferer,
/// n = 1..=n_max.
pub fn nn_distance_moments(
    model: Model,
    params: &NetworkParams,
    n_max: usize,
    n_realizations: usize,
    rng_seed: u64,
    exec: Execution,
) -> Result<Vec<NnMoment>> {
    if n_max == 0 {
        return Err(Error::Config("n_max must be at least 1".into()));
    }
    params.derived()?;
    let window = nn_window_radius(params, n_max);
    let rows = map_indexed(exec, n_realizations, |i| {
        let mut rng = replicate_rng(rng_seed, i as u64);
        sample_pattern_with(model, params, window, &mut rng).map(|p| p.nearest_sq_distances(n_max))
    });
    let mut sum = vec![0.0; n_max];
    let mut sum_sq = vec![0.0; n_max];
    for row in rows {
        let row = row?;
        if row.len() < n_max {
            return Err(Error::Config(format!(
                "window of radius {window} held only {} points; fewer than n_max = {n_max}",
                row.len()
            )));
        }
        for (k, d) in row.iter().enumerate() {
            let v = d / (k + 1) as f64;
            sum[k] += v;
            sum_sq[k] += v * v;
        }
    }
    let n = n_realizations as f64;
    Ok((0..n_max)
        .map(|k| {
            let mean = sum[k] / n;
            let var = (sum_sq[k] / n - mean * mean).max(0.0) * n / (n - 1.0).max(1.0);
            NnMoment {
                n: k + 1,
                mean,
                std_err: (var / n).sqrt(),
            }
        })
        .collect())
}
