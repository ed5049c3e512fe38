//! Gauss hypergeometric function in the regime needed by the moment
//! formulas: complex `a`, real `b`, `c`, and `z ∈ [0, 1]`.

use super::gamma::ln_gamma_complex;
use super::quadrature::{integrate, QuadOptions, QuadResult};
use super::{ComplexValue, NumericsError};

const SERIES_TOL: f64 = 1e-12;
const MAX_TERMS: usize = 20_000;
/// Largest tolerated ratio of the biggest series term to the sum before the
/// series is considered too cancellation-prone.
const CANCELLATION_LIMIT: f64 = 1e3;
/// Terms beyond this leave no headroom before overflow.
const MAX_TERM: f64 = 1e200;
/// Smallest `|Im a|` for which the rotated Euler path is used.
const CONTOUR_MIN_IM: f64 = 4.0;
/// Decay exponent `|Im a|·S` beyond which the far side of the rotated path
/// is dropped.
const CONTOUR_DECAY: f64 = 40.0;

/// ₂F₁(a, b2; c; z) for complex `a`, real `b2`, `c`, and `0 ≤ z ≤ 1`.
///
/// The Gauss series is used where it is well conditioned. At `z = 1` the
/// Gauss summation theorem is used instead (requires `Re(c - a - b2) > 0`).
/// When the series suffers from cancellation (large `|a|·z`, as happens for
/// moments of large imaginary order) the Euler integral representation is
/// evaluated by quadrature, which requires `c > b2 > 0`. For large `|Im a|`
/// that integral is taken along a rotated path on which it decays instead
/// of oscillating.
pub fn hyp2f1(a: ComplexValue, b2: f64, c: f64, z: f64) -> Result<ComplexValue, NumericsError> {
    if !(0.0..=1.0).contains(&z) {
        return Err(NumericsError::Domain(format!("hyp2f1: z = {z} outside [0, 1]")));
    }
    if c <= 0.0 && c.fract() == 0.0 {
        return Err(NumericsError::Domain(format!(
            "hyp2f1: c = {c} is a non-positive integer"
        )));
    }
    if z == 0.0 || a.norm() == 0.0 || b2 == 0.0 {
        return Ok(ComplexValue::new(1.0, 0.0));
    }
    if z == 1.0 {
        return gauss_summation(a, b2, c);
    }
    match series(a, b2, c, z) {
        Ok(v) => Ok(v),
        Err(e) if c > b2 && b2 > 0.0 && a.im.abs() >= CONTOUR_MIN_IM => euler_contour(a, b2, c, z).or(Err(e)),
        Err(e) if c > b2 && b2 > 0.0 => euler_integral(a, b2, c, z).or(Err(e)),
        Err(e) => Err(e),
    }
}

fn series(a: ComplexValue, b2: f64, c: f64, z: f64) -> Result<ComplexValue, NumericsError> {
    let mut term = ComplexValue::new(1.0, 0.0);
    let mut sum = term;
    let mut largest = 1.0_f64;
    let peak = (a.norm() + b2.abs()) * z;
    for k in 0..MAX_TERMS {
        let kf = k as f64;
        term *= (a + kf) * ((b2 + kf) * z / ((c + kf) * (kf + 1.0)));
        if term.norm() == 0.0 {
            // terminating series (a or b2 a non-positive integer)
            return Ok(sum);
        }
        sum += term;
        largest = largest.max(term.norm());
        let cancelled = largest > CANCELLATION_LIMIT * sum.norm();
        if !sum.re.is_finite() || !sum.im.is_finite() || largest > MAX_TERM || (cancelled && largest > 1e8) {
            break;
        }
        if term.norm() <= SERIES_TOL * sum.norm() && kf > peak {
            if cancelled {
                break;
            }
            return Ok(sum);
        }
    }
    Err(NumericsError::NoConvergence {
        what: "hypergeometric series",
        partial: sum.re,
        abs_err: largest * f64::EPSILON,
    })
}

fn gauss_summation(a: ComplexValue, b2: f64, c: f64) -> Result<ComplexValue, NumericsError> {
    let s = c - a - b2;
    if s.re <= 0.0 {
        return Err(NumericsError::Domain(format!(
            "hyp2f1 at z = 1 needs Re(c - a - b) > 0, got {s}"
        )));
    }
    let cc = ComplexValue::new(c, 0.0);
    let ln = ln_gamma_complex(cc) + ln_gamma_complex(s)
        - ln_gamma_complex(cc - a)
        - ln_gamma_complex(ComplexValue::new(c - b2, 0.0));
    Ok(ln.exp())
}

/// Γ(c)/(Γ(b2)Γ(c-b2)) ∫_0^1 u^{b2-1} (1-u)^{c-b2-1} (1-zu)^{-a} du with the
/// substitution u = y^{1/b2}, which removes the singularity at u = 0.
fn euler_integral(a: ComplexValue, b2: f64, c: f64, z: f64) -> Result<ComplexValue, NumericsError> {
    let inv_b2 = 1.0 / b2;
    let opts = QuadOptions {
        abs_tol: 1e-13,
        rel_tol: 1e-11,
        max_subdivisions: 20_000,
    };
    let res = integrate(
        |y: f64| {
            let u = y.powf(inv_b2);
            let log_base = (-z * u).ln_1p();
            ((1.0 - u).powf(c - b2 - 1.0) * inv_b2) * (-a * log_base).exp()
        },
        0.0,
        1.0,
        &opts,
    );
    if !res.converged {
        return Err(NumericsError::NoConvergence {
            what: "hypergeometric Euler integral",
            partial: res.value.re,
            abs_err: res.abs_err,
        });
    }
    Ok(res.value * euler_norm(b2, c))
}

fn euler_norm(b2: f64, c: f64) -> ComplexValue {
    (ln_gamma_complex(ComplexValue::new(c, 0.0))
        - ln_gamma_complex(ComplexValue::new(b2, 0.0))
        - ln_gamma_complex(ComplexValue::new(c - b2, 0.0)))
    .exp()
}

/// The Euler integral in `w = ln(1 - zu)`, where `(1 - zu)^{-a} = e^{-aw}`.
/// The real segment `[ln(1 - z), 0]` is replaced by the two vertical rays
/// through its ends, joined at height `S`; along them `e^{-aw}` decays like
/// `e^{-|Im a| s}`. Between the rays `u` stays in the lower half plane, so
/// principal branches remain continuous.
fn euler_contour(a: ComplexValue, b2: f64, c: f64, z: f64) -> Result<ComplexValue, NumericsError> {
    if a.im > 0.0 {
        return euler_contour(a.conj(), b2, c, z).map(|v| v.conj());
    }
    let j = ComplexValue::new(0.0, 1.0);
    let e1 = c - b2 - 1.0;
    let w1 = (-z).ln_1p();
    let tau = -a.im;
    let height = (std::f64::consts::FRAC_PI_2).min(CONTOUR_DECAY / tau);
    let opts = QuadOptions {
        abs_tol: 1e-15,
        rel_tol: 1e-11,
        max_subdivisions: 20_000,
    };
    // u^{b2-1} (1-u)^{e1} e^{-aw} du/dw, with du/dw = -e^w / z
    let body = |u: ComplexValue, one_minus_u: ComplexValue, w: ComplexValue| {
        u.powf(b2 - 1.0) * one_minus_u.powf(e1) * (-a * w).exp() * (-w.exp() / z)
    };
    let fail = |what, res: &QuadResult<ComplexValue>| NumericsError::NoConvergence {
        what,
        partial: res.value.re,
        abs_err: res.abs_err,
    };
    // 1 - e^{js} = -2j sin(s/2) e^{js/2}, kept as a ratio to s near 0
    let chord = |s: f64| -> ComplexValue {
        let half = 0.5 * s;
        let sinc = if half == 0.0 { 1.0 } else { half.sin() / half };
        -j * sinc * (j * half).exp()
    };

    // from w = 0 upward, with s = S y^{1/b2} absorbing u^{b2-1} ~ s^{b2-1}
    let start = integrate(
        |y: f64| {
            let s = height * y.powf(1.0 / b2);
            let w = j * s;
            let u_over_s = chord(s) / z;
            let one_minus_u = 1.0 - u_over_s * s;
            u_over_s.powf(b2 - 1.0) * one_minus_u.powf(e1) * (-a * w).exp() * (-w.exp() / z) * j
        },
        0.0,
        1.0,
        &opts,
    );
    if !start.converged {
        return Err(fail("hypergeometric contour integral", &start));
    }
    let start = start.value * height.powf(b2) / b2;

    // from w = ln(1 - z) upward, with s = S y^{1/(e1+1)} absorbing (1-u)^{e1}
    let end = integrate(
        |y: f64| {
            let s = height * y.powf(1.0 / (e1 + 1.0));
            let w = w1 + j * s;
            // 1 - u = (1 - z)(e^{js} - 1) / z
            let omu_over_s = -(1.0 - z) * chord(s) / z;
            let u = 1.0 - omu_over_s * s;
            u.powf(b2 - 1.0) * omu_over_s.powf(e1) * (-a * w).exp() * (-w.exp() / z) * j
        },
        0.0,
        1.0,
        &opts,
    );
    if !end.converged {
        return Err(fail("hypergeometric contour integral", &end));
    }
    let end = end.value * height.powf(e1 + 1.0) / (e1 + 1.0);

    let mut total = start - end;
    if tau * height < CONTOUR_DECAY {
        let top = integrate(
            |x: f64| {
                let w = x + j * height;
                let u = (1.0 - w.exp()) / z;
                body(u, 1.0 - u, w)
            },
            w1,
            0.0,
            &opts,
        );
        if !top.converged {
            return Err(fail("hypergeometric contour integral", &top));
        }
        total -= top.value;
    }
    Ok(total * euler_norm(b2, c))
}

/// 𝔇_b(p, q) = p·b·₂F₁(1 − b, 1 − q; 2; p), the coefficient that turns the
/// first-moment exponent of a Poisson field into the exponent of the b-th
/// moment.
pub fn diversity_gain(b: ComplexValue, p: f64, q: f64) -> Result<ComplexValue, NumericsError> {
    if !(p > 0.0 && p <= 1.0) {
        if p == 0.0 {
            return Ok(ComplexValue::new(0.0, 0.0));
        }
        return Err(NumericsError::Domain(format!("diversity_gain: p = {p} outside (0, 1]")));
    }
    if !(q > 0.0 && q < 1.0) {
        return Err(NumericsError::Domain(format!("diversity_gain: q = {q} outside (0, 1)")));
    }
    if b.norm() == 0.0 {
        return Ok(b);
    }
    let f = hyp2f1(1.0 - b, 1.0 - q, 2.0, p)?;
    Ok(p * b * f)
}
