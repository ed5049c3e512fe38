use std::f64::consts::PI;

use super::ComplexValue;

/// Chebyshev interpolant of a complex function on one interval `[a, b]`,
/// built from values at the first-kind Chebyshev points.
#[derive(Debug, Clone, PartialEq)]
pub struct ChebyshevPanel {
    a: f64,
    b: f64,
    coeffs: Vec<ComplexValue>,
}

impl ChebyshevPanel {
    /// The `n` interpolation nodes mapped to `[a, b]`, in decreasing order.
    pub fn nodes(a: f64, b: f64, n: usize) -> Vec<f64> {
        (0..n)
            .map(|k| {
                let x = (PI * (k as f64 + 0.5) / n as f64).cos();
                0.5 * (a + b) + 0.5 * (b - a) * x
            })
            .collect()
    }

    /// Builds the interpolant from samples taken at [`ChebyshevPanel::nodes`].
    pub fn from_values(a: f64, b: f64, values: &[ComplexValue]) -> Self {
        let n = values.len();
        assert!(n > 0, "a Chebyshev panel needs at least one node");
        let coeffs = (0..n)
            .map(|j| {
                let s = values
                    .iter()
                    .enumerate()
                    .fold(ComplexValue::new(0.0, 0.0), |acc, (k, v)| {
                        acc + v * (PI * j as f64 * (k as f64 + 0.5) / n as f64).cos()
                    });
                let w = if j == 0 { 1.0 } else { 2.0 };
                s * (w / n as f64)
            })
            .collect();
        Self { a, b, coeffs }
    }

    /// Fits `f` directly.
    pub fn fit<F: FnMut(f64) -> ComplexValue>(a: f64, b: f64, n: usize, f: F) -> Self {
        let values: Vec<_> = Self::nodes(a, b, n).into_iter().map(f).collect();
        Self::from_values(a, b, &values)
    }

    pub fn interval(&self) -> (f64, f64) {
        (self.a, self.b)
    }

    pub fn coefficients(&self) -> &[ComplexValue] {
        &self.coeffs
    }

    /// Size of the two highest-order coefficients, an estimate of the
    /// interpolation error.
    pub fn tail_magnitude(&self) -> f64 {
        self.coeffs.iter().rev().take(2).map(|c| c.norm()).sum()
    }

    /// Clenshaw evaluation; `t` outside the interval is extrapolated.
    pub fn eval(&self, t: f64) -> ComplexValue {
        let x = (2.0 * t - self.a - self.b) / (self.b - self.a);
        let zero = ComplexValue::new(0.0, 0.0);
        let (mut b1, mut b2) = (zero, zero);
        for c in self.coeffs.iter().skip(1).rev() {
            let b0 = c + b1 * (2.0 * x) - b2;
            b2 = b1;
            b1 = b0;
        }
        self.coeffs[0] + b1 * x - b2
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reproduces_polynomials_exactly() {
        let f = |t: f64| ComplexValue::new(3.0 * t * t - t + 2.0, t.powi(3));
        let p = ChebyshevPanel::fit(-2.0, 5.0, 6, f);
        for i in 0..=20 {
            let t = -2.0 + 7.0 * i as f64 / 20.0;
            assert!((p.eval(t) - f(t)).norm() < 1e-11);
        }
        assert!(p.tail_magnitude() < 1e-12);
    }

    #[test]
    fn smooth_oscillation_converges() {
        let f = |t: f64| ComplexValue::new(0.0, t).exp() * (-0.1 * t).exp();
        let p = ChebyshevPanel::fit(0.0, 6.0, 24, f);
        for i in 0..=50 {
            let t = 6.0 * i as f64 / 50.0;
            assert!((p.eval(t) - f(t)).norm() < 1e-10);
        }
        let coarse = ChebyshevPanel::fit(0.0, 60.0, 8, f);
        assert!(coarse.tail_magnitude() > 1e-3);
    }
}
