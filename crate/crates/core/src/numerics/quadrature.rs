//! Globally adaptive Gauss–Kronrod (10/21) quadrature for real- and
//! complex-valued integrands, with a tangent-like map for semi-infinite
//! ranges.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::ops::{Add, Mul, Sub};

use super::{ComplexValue, NumericsError};

const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];
const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_600_768_685_316,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

/// Values that can be integrated: real numbers and complex numbers.
pub trait QuadValue:
    Copy + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self>
{
    fn zero() -> Self;
    fn modulus(self) -> f64;
    fn is_finite_value(self) -> bool;
}

impl QuadValue for f64 {
    fn zero() -> Self {
        0.0
    }
    fn modulus(self) -> f64 {
        self.abs()
    }
    fn is_finite_value(self) -> bool {
        self.is_finite()
    }
}

impl QuadValue for ComplexValue {
    fn zero() -> Self {
        ComplexValue::new(0.0, 0.0)
    }
    fn modulus(self) -> f64 {
        self.norm()
    }
    fn is_finite_value(self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }
}

/// Stopping rule: the integral is accepted once the summed error estimate
/// drops below `max(abs_tol, rel_tol * |I|)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_subdivisions: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        Self {
            abs_tol: 1e-10,
            rel_tol: 1e-10,
            max_subdivisions: 2_000,
        }
    }
}

impl QuadOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self {
            abs_tol: tol,
            rel_tol: tol,
            ..Self::default()
        }
    }

    /// Same options with both tolerances scaled; used for inner integrals of
    /// nested quadratures.
    pub fn tightened(self, factor: f64) -> Self {
        Self {
            abs_tol: self.abs_tol * factor,
            rel_tol: self.rel_tol * factor,
            ..self
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult<T> {
    pub value: T,
    pub abs_err: f64,
    pub evaluations: usize,
    /// False when the subdivision budget ran out before the tolerance was met.
    pub converged: bool,
}

struct Segment<T> {
    a: f64,
    b: f64,
    value: T,
    err: f64,
}

impl<T> PartialEq for Segment<T> {
    fn eq(&self, other: &Self) -> bool {
        self.err == other.err
    }
}
impl<T> Eq for Segment<T> {}
impl<T> PartialOrd for Segment<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<T> Ord for Segment<T> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.err.total_cmp(&other.err)
    }
}

fn kronrod21<T: QuadValue, F: FnMut(f64) -> T>(f: &mut F, a: f64, b: f64) -> (T, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut gauss = T::zero();
    let mut kronrod = fc * WGK[10];
    for j in 0..10 {
        let dx = half * XGK[j];
        let pair = f(center - dx) + f(center + dx);
        kronrod = kronrod + pair * WGK[j];
        if j % 2 == 1 {
            gauss = gauss + pair * WG[j / 2];
        }
    }
    let value = kronrod * half;
    let mut err = ((kronrod - gauss) * half).modulus();
    if !value.is_finite_value() {
        err = f64::INFINITY;
    }
    (value, err)
}

/// Integrates `f` over the finite interval `[a, b]`.
///
/// Never returns an error: when the subdivision budget is exhausted the best
/// estimate is returned with `converged == false`. Use [`adaptive_quad`] for
/// the checked variant.
pub fn integrate<T, F>(mut f: F, a: f64, b: f64, opts: &QuadOptions) -> QuadResult<T>
where
    T: QuadValue,
    F: FnMut(f64) -> T,
{
    if a == b {
        return QuadResult {
            value: T::zero(),
            abs_err: 0.0,
            evaluations: 0,
            converged: true,
        };
    }
    let (value, err) = kronrod21(&mut f, a, b);
    let mut evaluations = 21;
    let mut total = value;
    let mut total_err = err;
    let mut heap = BinaryHeap::new();
    heap.push(Segment { a, b, value, err });
    let mut subdivisions = 1;
    loop {
        let target = opts.abs_tol.max(opts.rel_tol * total.modulus());
        if total_err <= target {
            break;
        }
        if subdivisions >= opts.max_subdivisions {
            return QuadResult {
                value: total,
                abs_err: total_err,
                evaluations,
                converged: false,
            };
        }
        let worst = heap.pop().expect("heap holds at least one segment");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // interval can no longer be split in floating point
            heap.push(worst);
            let total_err = heap.iter().map(|s| s.err).sum::<f64>();
            return QuadResult {
                value: total,
                abs_err: total_err,
                evaluations,
                converged: total_err <= target,
            };
        }
        let (lv, le) = kronrod21(&mut f, worst.a, mid);
        let (rv, re) = kronrod21(&mut f, mid, worst.b);
        evaluations += 42;
        total = total - worst.value + lv + rv;
        total_err = total_err - worst.err + le + re;
        heap.push(Segment {
            a: worst.a,
            b: mid,
            value: lv,
            err: le,
        });
        heap.push(Segment {
            a: mid,
            b: worst.b,
            value: rv,
            err: re,
        });
        subdivisions += 1;
        if subdivisions % 64 == 0 {
            // resum to keep cancellation in the running totals in check
            total = heap.iter().fold(T::zero(), |acc, s| acc + s.value);
            total_err = heap.iter().map(|s| s.err).sum();
        }
    }
    QuadResult {
        value: total,
        abs_err: total_err,
        evaluations,
        converged: true,
    }
}

/// Integrates `f` over `[a, ∞)` via `x = a + scale · u / (1 - u)`, `u ∈ [0, 1)`.
///
/// `scale` should be the length scale on which `f` varies; it only affects
/// efficiency.
pub fn integrate_to_infinity<T, F>(mut f: F, a: f64, scale: f64, opts: &QuadOptions) -> QuadResult<T>
where
    T: QuadValue,
    F: FnMut(f64) -> T,
{
    integrate(
        |u: f64| {
            let one_minus = 1.0 - u;
            let x = a + scale * u / one_minus;
            let jac = scale / (one_minus * one_minus);
            let v = f(x);
            if jac.is_finite() {
                v * jac
            } else {
                T::zero()
            }
        },
        0.0,
        1.0,
        opts,
    )
}

/// Checked real integral over `[a, b]` where `b` may be `f64::INFINITY`.
pub fn adaptive_quad<F>(f: F, a: f64, b: f64, tol: f64) -> Result<f64, NumericsError>
where
    F: FnMut(f64) -> f64,
{
    let opts = QuadOptions::with_tol(tol);
    let res = if b == f64::INFINITY {
        integrate_to_infinity(f, a, 1.0, &opts)
    } else {
        integrate(f, a, b, &opts)
    };
    if res.converged {
        Ok(res.value)
    } else {
        Err(NumericsError::MaxSubdivisions {
            partial: res.value,
            abs_err: res.abs_err,
            subdivisions: opts.max_subdivisions,
        })
    }
}

/// Nodes and weights of the n-point Gauss–Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, 0.0);
            for j in 0..n {
                let p2 = p1;
                p1 = p0;
                p0 = ((2 * j + 1) as f64 * z * p1 - j as f64 * p2) / (j + 1) as f64;
            }
            dp = n as f64 * (z * p0 - p1) / (z * z - 1.0);
            let dz = p0 / dp;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = -z;
        nodes[n - 1 - i] = z;
        let w = 2.0 / ((1.0 - z * z) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn exponential_tail() {
        let v = adaptive_quad(|u| (-u).exp(), 0.0, f64::INFINITY, 1e-10).unwrap();
        assert_relative_eq!(v, 1.0, epsilon = 1e-10);
    }

    #[test]
    fn inverse_sqrt_endpoint_singularity() {
        let v = adaptive_quad(|u| 1.0 / u.sqrt(), 0.0, 1.0, 1e-9).unwrap();
        assert_relative_eq!(v, 2.0, epsilon = 1e-9);
    }

    #[test]
    fn complex_oscillatory() {
        // ∫_0^{2π} e^{i k x} dx = 0 and ∫_0^1 e^{ix} dx = -i (e^{i} - 1)
        let opts = QuadOptions::with_tol(1e-12);
        let r = integrate(
            |x: f64| ComplexValue::new(0.0, 37.0 * x).exp(),
            0.0,
            2.0 * std::f64::consts::PI,
            &opts,
        );
        assert!(r.value.norm() < 1e-11);
        let r = integrate(|x: f64| ComplexValue::new(0.0, x).exp(), 0.0, 1.0, &opts);
        let want = -ComplexValue::i() * (ComplexValue::i().exp() - 1.0);
        assert!((r.value - want).norm() < 1e-13);
    }

    #[test]
    fn budget_exhaustion_is_reported() {
        let opts = QuadOptions {
            abs_tol: 1e-15,
            rel_tol: 0.0,
            max_subdivisions: 3,
        };
        let r = integrate(|x: f64| (1.0 / x).sin(), 1e-6, 1.0, &opts);
        assert!(!r.converged);
        let e = adaptive_quad(|x| x.abs().sqrt() * (1.0 / x).sin(), -1.0, 1.0, 1e-16);
        assert!(matches!(e, Err(NumericsError::MaxSubdivisions { .. })));
    }

    #[test]
    fn gauss_legendre_exactness() {
        let (x, w) = gauss_legendre(8);
        let s: f64 = w.iter().sum();
        assert_relative_eq!(s, 2.0, epsilon = 1e-14);
        // exact for degree 15
        let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(14)).sum();
        assert_relative_eq!(q, 2.0 / 15.0, epsilon = 1e-14);
    }
}
