use std::f64::consts::PI;

use super::ComplexValue;

const LANCZOS_G: f64 = 7.0;
const LANCZOS_COEFFS: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

/// ln Γ(z) for complex z (principal branch up to a multiple of 2πi in the
/// imaginary part; only meaningful after exponentiation or differencing).
pub fn ln_gamma_complex(z: ComplexValue) -> ComplexValue {
    if z.re < 0.5 {
        if z.re > 0.0 {
            // shift right instead of reflecting; avoids sin(πz) for large |Im z|
            return ln_gamma_complex(z + 1.0) - z.ln();
        }
        // Γ(z) Γ(1 - z) = π / sin(πz)
        return ComplexValue::new(PI.ln(), 0.0) - ln_sin_pi(z) - ln_gamma_complex(1.0 - z);
    }
    let z = z - 1.0;
    let mut acc = ComplexValue::new(LANCZOS_COEFFS[0], 0.0);
    for (i, &c) in LANCZOS_COEFFS.iter().enumerate().skip(1) {
        acc += c / (z + i as f64);
    }
    let t = z + LANCZOS_G + 0.5;
    0.5 * (2.0 * PI).ln() + (z + 0.5) * t.ln() - t + acc.ln()
}

/// ln sin(πz) without overflow for large |Im z|.
fn ln_sin_pi(z: ComplexValue) -> ComplexValue {
    let i = ComplexValue::i();
    if z.im >= 0.0 {
        // sin(πz) = e^{-iπz} (e^{2iπz} - 1) / (2i)
        -i * PI * z + ((2.0 * i * PI * z).exp() - 1.0).ln() - (2.0 * i).ln()
    } else {
        // sin(πz) = e^{iπz} (1 - e^{-2iπz}) / (2i)
        i * PI * z + (1.0 - (-2.0 * i * PI * z).exp()).ln() - (2.0 * i).ln()
    }
}

/// ln |Γ(x)| for real x that is not a non-positive integer.
pub fn ln_gamma(x: f64) -> f64 {
    ln_gamma_complex(ComplexValue::new(x, 0.0)).re
}

/// Γ(x) for real x.
pub fn gamma(x: f64) -> f64 {
    if x < 0.5 {
        return PI / ((PI * x).sin() * gamma(1.0 - x));
    }
    ln_gamma(x).exp()
}

/// Γ(1 + q) Γ(1 - q) = πq / sin(πq), continuous at q = 0.
pub fn gamma_pair(q: f64) -> f64 {
    if q.abs() < 1e-8 {
        // πq/sin(πq) = 1 + (πq)²/6 + O(q⁴)
        return 1.0 + (PI * q).powi(2) / 6.0;
    }
    PI * q / (PI * q).sin()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn gamma_at_integers_and_half() {
        assert_relative_eq!(gamma(1.0), 1.0, epsilon = 1e-14);
        assert_relative_eq!(gamma(5.0), 24.0, max_relative = 1e-13);
        assert_relative_eq!(gamma(0.5), PI.sqrt(), max_relative = 1e-14);
        assert_relative_eq!(gamma(1.5), PI.sqrt() / 2.0, max_relative = 1e-14);
        assert_relative_eq!(gamma(-0.5), -2.0 * PI.sqrt(), max_relative = 1e-13);
    }

    #[test]
    fn gamma_pair_values() {
        assert_relative_eq!(gamma_pair(0.5), PI / 2.0, max_relative = 1e-15);
        assert_relative_eq!(gamma_pair(1e-12), 1.0, epsilon = 1e-15);
        assert_relative_eq!(gamma_pair(1e-6), 1.0, epsilon = 1e-11);
        // against the direct product of gamma values
        for &q in &[0.1, 0.25, 0.4, 0.75] {
            assert_relative_eq!(
                gamma_pair(q),
                gamma(1.0 + q) * gamma(1.0 - q),
                max_relative = 1e-13
            );
        }
    }

    #[test]
    fn complex_ln_gamma_recurrence_and_large_imaginary() {
        // Γ(z + 1) = z Γ(z)
        for &(re, im) in &[(0.3, 2.0), (1.2, -7.5), (0.05, 300.0), (2.5, 1500.0)] {
            let z = ComplexValue::new(re, im);
            let lhs = ln_gamma_complex(z + 1.0);
            let rhs = ln_gamma_complex(z) + z.ln();
            let d = (lhs - rhs).exp();
            assert_relative_eq!(d.re, 1.0, epsilon = 1e-10);
            assert!(d.im.abs() < 1e-10, "{z}: {d}");
        }
        // |Γ(iy)|² = π / (y sinh πy)
        let y: f64 = 3.0;
        let lg = ln_gamma_complex(ComplexValue::new(0.0, y));
        assert_relative_eq!(
            2.0 * lg.re,
            (PI / (y * (PI * y).sinh())).ln(),
            max_relative = 1e-12
        );
    }
}
