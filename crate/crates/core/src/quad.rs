//! Quadrature kernels shared by the integral modules: adaptive Gauss–Kronrod
//! (10/21 points) for complex integrands, semi-infinite range mapping, and
//! Gauss–Legendre rules for tensor-product simplex integration.

use num_complex::Complex64;
use std::collections::BinaryHeap;
use std::cmp::Ordering;

use crate::error::{Error, Result};

const XGK: [f64; 11] = [
    0.995_657_163_025_808_1,
    0.973_906_528_517_171_7,
    0.930_157_491_355_708_2,
    0.865_063_366_688_984_5,
    0.780_817_726_586_416_9,
    0.679_409_568_299_024_4,
    0.562_757_134_668_604_7,
    0.433_395_394_129_247_2,
    0.294_392_862_701_460_2,
    0.148_874_338_981_631_22,
    0.0,
];

const WGK: [f64; 11] = [
    0.011_694_638_867_371_874,
    0.032_558_162_307_964_725,
    0.054_755_896_574_351_995,
    0.075_039_674_810_919_96,
    0.093_125_454_583_697_6,
    0.109_387_158_802_297_64,
    0.123_491_976_262_065_84,
    0.134_709_217_311_473_34,
    0.142_775_938_577_060_09,
    0.147_739_104_901_338_49,
    0.149_445_554_002_916_9,
];

// Gauss weights for the odd-indexed Kronrod nodes XGK[1], XGK[3], ..., XGK[9].
const WG: [f64; 5] = [
    0.066_671_344_308_688_14,
    0.149_451_349_150_580_6,
    0.219_086_362_515_982_04,
    0.269_266_719_309_996_35,
    0.295_524_224_714_752_87,
];

/// Outcome of an adaptive integration.
#[derive(Debug, Clone, Copy)]
pub struct QuadResult {
    pub value: Complex64,
    pub error: f64,
    pub evaluations: usize,
}

/// Tolerances and subdivision limit for [`adaptive`].
#[derive(Debug, Clone, Copy)]
pub struct QuadOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_intervals: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        Self { abs_tol: 1e-14, rel_tol: 1e-12, max_intervals: 4000 }
    }
}

fn gk21<F: Fn(f64) -> Complex64 + ?Sized>(f: &F, a: f64, b: f64) -> (Complex64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[10];
    let mut gauss = Complex64::new(0.0, 0.0);
    for k in 0..10 {
        let dx = half * XGK[k];
        let pair = f(center - dx) + f(center + dx);
        kronrod += pair * WGK[k];
        if k % 2 == 1 {
            gauss += pair * WG[k / 2];
        }
    }
    let kronrod = kronrod * half;
    let gauss = gauss * half;
    (kronrod, (kronrod - gauss).norm())
}

struct Segment {
    a: f64,
    b: f64,
    value: Complex64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Globally adaptive Gauss–Kronrod integration of a complex integrand on
/// `[a, b]`, starting from the initial partition given by `breaks`
/// (points outside `(a, b)` are ignored).
pub fn adaptive<F>(f: &F, a: f64, b: f64, breaks: &[f64], opts: QuadOptions) -> QuadResult
where
    F: Fn(f64) -> Complex64 + ?Sized,
{
    if a == b {
        return QuadResult { value: Complex64::new(0.0, 0.0), error: 0.0, evaluations: 0 };
    }
    let (lo, hi, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };
    let mut pts: Vec<f64> = breaks.iter().copied().filter(|&x| x > lo && x < hi).collect();
    pts.push(lo);
    pts.push(hi);
    pts.sort_by(f64::total_cmp);
    pts.dedup();

    let mut heap = BinaryHeap::new();
    let mut total = Complex64::new(0.0, 0.0);
    let mut total_err = 0.0;
    let mut evals = 0;
    for w in pts.windows(2) {
        let (value, error) = gk21(f, w[0], w[1]);
        evals += 21;
        total += value;
        total_err += error;
        heap.push(Segment { a: w[0], b: w[1], value, error });
    }

    while total_err > opts.abs_tol.max(opts.rel_tol * total.norm()) && heap.len() < opts.max_intervals {
        let Some(worst) = heap.pop() else { break };
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            heap.push(worst);
            break;
        }
        let (v1, e1) = gk21(f, worst.a, mid);
        let (v2, e2) = gk21(f, mid, worst.b);
        evals += 42;
        total += v1 + v2 - worst.value;
        total_err += e1 + e2 - worst.error;
        heap.push(Segment { a: worst.a, b: mid, value: v1, error: e1 });
        heap.push(Segment { a: mid, b: worst.b, value: v2, error: e2 });
    }

    // re-sum to shed the drift of incremental updates
    let mut value = Complex64::new(0.0, 0.0);
    let mut error = 0.0;
    for s in heap.iter() {
        value += s.value;
        error += s.error;
    }
    QuadResult { value: value * sign, error, evaluations: evals }
}

// Far-tail evaluations of closed forms such as 1/cosh overflow to NaN.
fn finite_or_zero(w: Complex64) -> Complex64 {
    if w.is_finite() { w } else { Complex64::new(0.0, 0.0) }
}

/// Integral over `[a, +inf)` through the map `v = a + (1 - t) / t`.
pub fn upper_tail<F>(f: &F, a: f64, opts: QuadOptions) -> QuadResult
where
    F: Fn(f64) -> Complex64 + ?Sized,
{
    let mapped = |t: f64| {
        if t <= 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        let v = a + (1.0 - t) / t;
        finite_or_zero(f(v)) / (t * t)
    };
    adaptive(&mapped, 0.0, 1.0, &[], opts)
}

/// Integral over `(-inf, b]` through the map `v = b - (1 - t) / t`.
pub fn lower_tail<F>(f: &F, b: f64, opts: QuadOptions) -> QuadResult
where
    F: Fn(f64) -> Complex64 + ?Sized,
{
    let mapped = |t: f64| {
        if t <= 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        let v = b - (1.0 - t) / t;
        finite_or_zero(f(v)) / (t * t)
    };
    adaptive(&mapped, 0.0, 1.0, &[], opts)
}

/// Truncation rule for whole-line integrals: `tail(V)` bounds the integral
/// of `|f|` over `|v| > V`.
pub struct LineIntegral<'a> {
    pub tail: &'a dyn Fn(f64) -> f64,
    pub start: f64,
    pub cap: f64,
    pub tail_tol: f64,
}

/// Whole-line integral. The range is truncated at the first `V` (doubling
/// from `start`) whose tail bound is below `tail_tol`; if `cap` is reached
/// first the remaining tails are integrated through the semi-infinite map.
pub fn real_line<F>(f: &F, rule: &LineIntegral<'_>, breaks: &[f64], opts: QuadOptions) -> QuadResult
where
    F: Fn(f64) -> Complex64 + ?Sized,
{
    let mut v_max = rule.start.max(1.0);
    while (rule.tail)(v_max) >= rule.tail_tol && v_max < rule.cap {
        v_max *= 2.0;
    }
    let v_max = v_max.min(rule.cap);
    let mut pts: Vec<f64> = breaks.to_vec();
    pts.push(0.0);
    let mut res = adaptive(f, -v_max, v_max, &pts, opts);
    if (rule.tail)(v_max) >= rule.tail_tol {
        let up = upper_tail(f, v_max, opts);
        let lo = lower_tail(f, -v_max, opts);
        res.value += up.value + lo.value;
        res.error += up.error + lo.error;
        res.evaluations += up.evaluations + lo.evaluations;
    }
    res
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    // returns (P_n(x), P_{n-1}(x))
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    (p1, p0)
}

/// Gauss–Legendre nodes and weights on `[0, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "Gauss-Legendre order must be positive");
    if n == 1 {
        return (vec![0.5], vec![1.0]);
    }
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, q) = legendre(n, x);
            let dp = n as f64 * (x * p - q) / (x * x - 1.0);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (p, q) = legendre(n, x);
        let dp = n as f64 * (x * p - q) / (x * x - 1.0);
        let w = 1.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = 0.5 * (1.0 - x);
        nodes[n - 1 - i] = 0.5 * (1.0 + x);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// Polynomial (Neville) extrapolation of samples `(h_k, f(h_k))` to `h = 0`.
/// With halving steps this is the Richardson table.
pub fn extrapolate_to_zero(samples: &[(f64, Complex64)]) -> Complex64 {
    assert!(!samples.is_empty(), "need at least one sample");
    let h: Vec<f64> = samples.iter().map(|s| s.0).collect();
    let mut p: Vec<Complex64> = samples.iter().map(|s| s.1).collect();
    let n = p.len();
    for k in 1..n {
        for i in 0..n - k {
            p[i] = (p[i + 1] * h[i] - p[i] * h[i + k]) / (h[i] - h[i + k]);
        }
    }
    p[0]
}

pub(crate) fn check_tolerance(res: &QuadResult, tol: f64) -> Result<()> {
    if res.error.is_finite() && res.error <= tol.max(1e-11 * res.value.norm()) {
        Ok(())
    } else {
        Err(Error::ToleranceNotMet { tol, estimate: res.error })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        let (x, w) = gauss_legendre(7);
        // degree 13 is exact for 7 nodes
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(13)).sum();
        assert!((s - 1.0 / 14.0).abs() < 1e-15);
        let total: f64 = w.iter().sum();
        assert!((total - 1.0).abs() < 1e-15);
    }

    #[test]
    fn gauss_legendre_single_node_is_midpoint() {
        let (x, w) = gauss_legendre(1);
        assert_eq!(x, vec![0.5]);
        assert!((w[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn adaptive_handles_peaked_integrand() {
        // ∫_{-10}^{10} 1/(v - i eps) dv = 2i atan(10/eps)
        let eps = 1e-3;
        let f = |v: f64| Complex64::new(1.0, 0.0) / Complex64::new(v, -eps);
        let r = adaptive(&f, -10.0, 10.0, &[], QuadOptions::default());
        let exact = Complex64::new(0.0, 2.0 * (10.0 / eps).atan());
        assert!((r.value - exact).norm() < 1e-10, "{:?}", r);
    }

    #[test]
    fn tails_recover_cauchy_mass() {
        let f = |v: f64| Complex64::new(1.0 / (std::f64::consts::PI * (1.0 + v * v)), 0.0);
        let up = upper_tail(&f, 1.0, QuadOptions::default());
        assert!((up.value.re - 0.25).abs() < 1e-12);
        let lo = lower_tail(&f, -1.0, QuadOptions::default());
        assert!((lo.value.re - 0.25).abs() < 1e-12);
    }
}
