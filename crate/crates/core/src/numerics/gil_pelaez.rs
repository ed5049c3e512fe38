//! Distribution inversion from imaginary-order moments.
//!
//! For a random variable `P ∈ (0, 1]` with `M(t) = E[P^{jt}]`,
//! `P(P > x) = 1/2 + (1/π) ∫_0^∞ Im(e^{-jt ln x} M(t)) / t dt`.

use std::collections::VecDeque;
use std::f64::consts::PI;

use super::quadrature::{integrate, QuadOptions};
use super::{ComplexValue, NumericsError};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GilPelaezOptions {
    /// Target absolute accuracy of the returned probability.
    pub tol: f64,
    /// Cap on the number of full oscillation periods of `t·ln x`.
    pub max_periods: usize,
    /// Beyond this point the moment function is taken to vanish; used when
    /// it is only known on a finite range (e.g. a tabulated interpolant).
    pub t_max: f64,
}

impl Default for GilPelaezOptions {
    fn default() -> Self {
        Self {
            tol: 1e-4,
            max_periods: 10_000,
            t_max: f64::INFINITY,
        }
    }
}

/// Wynn's epsilon algorithm over a sliding window of partial sums.
#[derive(Debug, Clone, Default)]
pub struct WynnEpsilon {
    sums: VecDeque<f64>,
}

const WYNN_WINDOW: usize = 40;

impl WynnEpsilon {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds the next partial sum and returns the current extrapolated limit.
    pub fn push(&mut self, partial_sum: f64) -> f64 {
        if self.sums.len() == WYNN_WINDOW {
            self.sums.pop_front();
        }
        self.sums.push_back(partial_sum);
        self.estimate()
    }

    /// Deepest even column of the epsilon table built from the window.
    pub fn estimate(&self) -> f64 {
        let n = self.sums.len();
        let Some(&last) = self.sums.back() else {
            return 0.0;
        };
        let mut prev: Vec<f64> = vec![0.0; n + 1];
        let mut cur: Vec<f64> = self.sums.iter().copied().collect();
        let mut best = last;
        let mut col = 0;
        while cur.len() > 1 {
            let mut next = Vec::with_capacity(cur.len() - 1);
            for i in 0..cur.len() - 1 {
                let diff = cur[i + 1] - cur[i];
                if diff == 0.0 || !diff.is_finite() {
                    // the sequence has converged to working precision
                    return if col % 2 == 0 { cur[i + 1] } else { best };
                }
                next.push(prev[i + 1] + 1.0 / diff);
            }
            prev = cur;
            cur = next;
            col += 1;
            if col % 2 == 0 {
                let v = *cur.last().expect("non-empty column");
                if !v.is_finite() {
                    break;
                }
                best = v;
            }
        }
        best
    }
}

/// P(X > x) for a variable on (0, 1] with imaginary-order moments
/// `moment_fn(t) = E[X^{jt}]`, clamped to `[0, 1]`.
///
/// The integral is split at multiples of the half-period `π/|ln x|` and the
/// partial sums are accelerated with [`WynnEpsilon`].
pub fn gil_pelaez<F>(mut moment_fn: F, x: f64, opts: &GilPelaezOptions) -> Result<f64, NumericsError>
where
    F: FnMut(f64) -> ComplexValue,
{
    if !(x > 0.0 && x <= 1.0) {
        return Err(NumericsError::Domain(format!("gil_pelaez: x = {x} outside (0, 1]")));
    }
    let t_max = opts.t_max;
    let log_x = x.ln();
    let mut integrand = |t: f64| {
        if t > t_max {
            return 0.0;
        }
        let phase = ComplexValue::new(0.0, -t * log_x).exp();
        (phase * moment_fn(t)).im / t
    };
    let quad = QuadOptions {
        abs_tol: opts.tol * 1e-4,
        rel_tol: 1e-9,
        max_subdivisions: 500,
    };
    let half_period = if log_x == 0.0 {
        // no phase oscillation: march in fixed steps
        PI
    } else {
        PI / log_x.abs()
    };
    let max_steps = 2 * opts.max_periods;

    let mut wynn = WynnEpsilon::new();
    let mut sum = 0.0;
    let mut quad_err = 0.0;
    let mut recent: VecDeque<f64> = VecDeque::with_capacity(4);
    let mut estimate = 0.5;
    for k in 0..max_steps {
        let a = k as f64 * half_period;
        if a >= t_max {
            return Ok(finish(sum));
        }
        let b = ((k + 1) as f64 * half_period).min(t_max);
        let piece = integrate(&mut integrand, a, b, &quad);
        sum += piece.value;
        quad_err += piece.abs_err;
        estimate = wynn.push(sum);
        if recent.len() == 4 {
            recent.pop_front();
        }
        recent.push_back(estimate);

        // size of the next half-period's contribution if |M| stayed flat
        let amplitude = if b >= t_max { 0.0 } else { moment_fn_norm(&mut integrand, b, log_x) };
        let proxy = amplitude * 2.0 * half_period / (PI * b);
        if proxy / PI < 0.1 * opts.tol {
            let spread = spread(&recent);
            let value = if k >= 8 && spread < 0.1 * opts.tol { estimate } else { sum };
            return Ok(finish(value));
        }
        if k >= 8 && recent.len() == 4 && spread(&recent) < 0.1 * opts.tol / PI {
            return Ok(finish(estimate));
        }
    }
    let abs_err = (spread(&recent).max(quad_err)) / PI;
    Err(NumericsError::NoConvergence {
        what: "Gil-Pelaez inversion",
        partial: finish(estimate),
        abs_err,
    })
}

/// |M(t)| recovered from the integrand at `t` and a quarter-period later.
fn moment_fn_norm<G: FnMut(f64) -> f64>(integrand: &mut G, t: f64, log_x: f64) -> f64 {
    if log_x == 0.0 {
        return (integrand(t) * t).abs();
    }
    // Im(e^{-j(t+τ)ln x} M) with τ a quarter period gives the other component
    let quarter = 0.5 * PI / log_x.abs();
    let s1 = integrand(t) * t;
    let s2 = integrand(t + quarter) * (t + quarter);
    s1.hypot(s2)
}

fn spread(values: &VecDeque<f64>) -> f64 {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    hi - lo
}

fn finish(integral: f64) -> f64 {
    (0.5 + integral / PI).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn point_mass(x0: f64) -> impl FnMut(f64) -> ComplexValue {
        move |t: f64| ComplexValue::new(0.0, t * x0.ln()).exp()
    }

    #[test]
    fn wynn_accelerates_alternating_series() {
        // ln 2 = 1 - 1/2 + 1/3 - ...
        let mut w = WynnEpsilon::new();
        let mut s = 0.0;
        let mut est = 0.0;
        for k in 1..=20 {
            s += if k % 2 == 1 { 1.0 } else { -1.0 } / k as f64;
            est = w.push(s);
        }
        assert!((s - 2f64.ln()).abs() > 1e-2);
        assert!((est - 2f64.ln()).abs() < 1e-10, "{est}");
    }

    #[test]
    fn degenerate_distribution() {
        let opts = GilPelaezOptions::default();
        let above = gil_pelaez(point_mass(0.6), 0.3, &opts).unwrap();
        assert!((above - 1.0).abs() < 1e-3, "{above}");
        let below = gil_pelaez(point_mass(0.6), 0.9, &opts).unwrap();
        assert!(below.abs() < 1e-3, "{below}");
    }

    #[test]
    fn uniform_distribution() {
        // P uniform on (0,1): E[P^{jt}] = 1/(1 + jt), survival 1 - x
        let opts = GilPelaezOptions::default();
        for &x in &[0.05, 0.3, 0.5, 0.8, 0.95] {
            let v = gil_pelaez(|t| 1.0 / ComplexValue::new(1.0, t), x, &opts).unwrap();
            assert!((v - (1.0 - x)).abs() < 1e-4, "x={x}: {v}");
        }
    }

    #[test]
    fn beta_two_one() {
        // density 2x: E[P^{jt}] = 2/(2 + jt), survival 1 - x²
        let opts = GilPelaezOptions {
            tol: 1e-6,
            ..Default::default()
        };
        for &x in &[0.1, 0.5, 0.9] {
            let v = gil_pelaez(|t| 2.0 / ComplexValue::new(2.0, t), x, &opts).unwrap();
            assert!((v - (1.0 - x * x)).abs() < 1e-5, "x={x}: {v}");
        }
    }

    #[test]
    fn truncated_moment_range() {
        // P = exp(-Y) with Y ~ Gamma(2, 1): M(t) = (1 + jt)^{-2}
        let m = |t: f64| 1.0 / ComplexValue::new(1.0, t).powi(2);
        let opts = GilPelaezOptions {
            t_max: 1e4,
            ..Default::default()
        };
        for &x in &[0.05f64, 0.4, 0.97] {
            let y = -x.ln();
            let want = 1.0 - (-y).exp() * (1.0 + y);
            let v = gil_pelaez(m, x, &opts).unwrap();
            assert!((v - want).abs() < 1e-4, "x={x}: {v} vs {want}");
        }
    }

    #[test]
    fn rejects_bad_x() {
        assert!(gil_pelaez(point_mass(0.5), 0.0, &GilPelaezOptions::default()).is_err());
        assert!(gil_pelaez(point_mass(0.5), 1.5, &GilPelaezOptions::default()).is_err());
    }
}
