use super::NumericsError;

const MAX_ITER: usize = 200;

/// Brent's method on a sign-changing bracket `[lo, hi]`.
///
/// Stops when `|f(x)| < tol` or the bracket is narrower than `tol`.
pub fn brent_root<F>(mut f: F, lo: f64, hi: f64, tol: f64) -> Result<f64, NumericsError>
where
    F: FnMut(f64) -> f64,
{
    let (mut a, mut b) = (lo, hi);
    let (mut fa, mut fb) = (f(a), f(b));
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa * fb > 0.0 || fa.is_nan() || fb.is_nan() {
        return Err(NumericsError::NoSignChange {
            lo,
            hi,
            f_lo: fa,
            f_hi: fb,
        });
    }
    let (mut c, mut fc) = (a, fa);
    let mut d = b - a;
    let mut e = d;
    for _ in 0..MAX_ITER {
        if fb * fc > 0.0 {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol1 = 2.0 * f64::EPSILON * b.abs() + 0.5 * tol;
        let xm = 0.5 * (c - b);
        if xm.abs() <= tol1 || fb.abs() < tol {
            return Ok(b);
        }
        if e.abs() >= tol1 && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * xm * s;
                q = 1.0 - s;
            } else {
                let qq = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * xm * qq * (qq - r) - (b - a) * (r - 1.0));
                q = (qq - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            }
            p = p.abs();
            let min1 = 3.0 * xm * q - (tol1 * q).abs();
            let min2 = (e * q).abs();
            if 2.0 * p < min1.min(min2) {
                e = d;
                d = p / q;
            } else {
                d = xm;
                e = d;
            }
        } else {
            d = xm;
            e = d;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol1 { d } else { tol1.copysign(xm) };
        fb = f(b);
    }
    Err(NumericsError::NoConvergence {
        what: "Brent root search",
        partial: b,
        abs_err: (c - b).abs(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_and_quadratic() {
        let r = brent_root(|x| x - 0.5, 0.0, 1.0, 1e-14).unwrap();
        assert!((r - 0.5).abs() < 1e-14);
        let r = brent_root(|x| x * x - 2.0, 1.0, 2.0, 1e-14).unwrap();
        assert!((r - 2f64.sqrt()).abs() < 1e-13);
    }

    #[test]
    fn reversed_bracket_and_steep_function() {
        let r = brent_root(|x: f64| (x - 0.3).powi(3), 1.0, 0.0, 1e-12).unwrap();
        assert!((r - 0.3).abs() < 1e-4);
        let r = brent_root(|x: f64| (50.0 * (x - 0.7)).tanh(), 0.0, 1.0, 1e-13).unwrap();
        assert!((r - 0.7).abs() < 1e-12);
    }

    #[test]
    fn no_sign_change() {
        let e = brent_root(|x| x * x + 1.0, -1.0, 1.0, 1e-10).unwrap_err();
        assert!(matches!(e, NumericsError::NoSignChange { .. }));
    }
}
