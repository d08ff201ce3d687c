//! One-point Cauchy-type integrals `I_n(g; z) = ∫ g(v) / (v - z)^{n+1} dv`
//! and their boundary values on the real axis.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::densities::{factorial, Derivative, StripFunction};
use crate::error::{Error, Result};
use crate::quad::{self, LineIntegral, QuadOptions};

/// Side of the real axis a boundary value is taken from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum HalfPlaneSign {
    #[serde(rename = "+")]
    Plus,
    #[serde(rename = "-")]
    Minus,
}

impl HalfPlaneSign {
    pub fn value(self) -> f64 {
        match self {
            HalfPlaneSign::Plus => 1.0,
            HalfPlaneSign::Minus => -1.0,
        }
    }

    pub fn flip(self) -> Self {
        match self {
            HalfPlaneSign::Plus => HalfPlaneSign::Minus,
            HalfPlaneSign::Minus => HalfPlaneSign::Plus,
        }
    }

    pub fn from_char(c: char) -> Option<Self> {
        match c {
            '+' => Some(HalfPlaneSign::Plus),
            '-' => Some(HalfPlaneSign::Minus),
            _ => None,
        }
    }
}

const PV_CANCELLATION: f64 = 1e-8;

pub(crate) fn quad_opts() -> QuadOptions {
    QuadOptions { abs_tol: 1e-15, rel_tol: 1e-13, max_intervals: 6000 }
}

/// Partition hints around a near-real pole at `z`.
pub(crate) fn pole_breaks(z: Complex64, width: f64, out: &mut Vec<f64>) {
    let eta = z.im.abs().max(1e-300);
    out.push(z.re);
    for k in [1.0, 4.0, 16.0] {
        out.push(z.re - k * eta);
        out.push(z.re + k * eta);
    }
    out.push(-width);
    out.push(width);
}

/// `∫ f^{(m)}(v) Π_k (v - z_k)^{-e_k} dv` by direct quadrature. Without
/// derivatives and with every pole in one half-plane, the contour is moved
/// to `Im v = ∓3r/4`, away from the poles; otherwise the real line is used.
pub(crate) fn pole_product_integral<F: StripFunction + ?Sized>(
    f: &F,
    m: usize,
    poles: &[(Complex64, i32)],
) -> Complex64 {
    if m == 0 && !poles.is_empty() {
        let above = poles.iter().all(|(z, _)| z.im > 0.0);
        let below = poles.iter().all(|(z, _)| z.im < 0.0);
        if above || below {
            let y = if above { -0.75 } else { 0.75 } * f.strip_radius();
            if f.line_tail_mass(y, f.width()).is_finite() {
                return shifted_pole_product(f, poles, y);
            }
        }
    }
    let zmax = poles.iter().map(|(z, _)| z.norm()).fold(0.0, f64::max);
    let eta = poles.iter().map(|(z, _)| z.im.abs()).fold(f64::INFINITY, f64::min);
    let total: i32 = poles.iter().map(|(_, e)| *e).sum();
    let weight = |v: f64| {
        let mut w = Complex64::new(1.0, 0.0);
        for &(z, e) in poles {
            w *= (Complex64::new(v, 0.0) - z).powi(-e);
        }
        w
    };
    let weight_sup = |cut: f64| {
        if cut > zmax {
            (cut - zmax).powi(-total).min(eta.powi(-total))
        } else {
            eta.powi(-total)
        }
    };
    let mut breaks = Vec::new();
    for &(z, _) in poles {
        pole_breaks(z, f.width(), &mut breaks);
    }
    f.integrate_against(m, &weight, &weight_sup, &breaks, quad_opts()).value
}

fn shifted_pole_product<F: StripFunction + ?Sized>(f: &F, poles: &[(Complex64, i32)], y: f64) -> Complex64 {
    let shift = Complex64::new(0.0, y);
    let moved: Vec<(Complex64, i32)> = poles.iter().map(|&(z, e)| (z - shift, e)).collect();
    let zmax = moved.iter().map(|(z, _)| z.norm()).fold(0.0, f64::max);
    let eta = moved.iter().map(|(z, _)| z.im.abs()).fold(f64::INFINITY, f64::min);
    let total: i32 = moved.iter().map(|(_, e)| *e).sum();
    let integrand = |x: f64| {
        let v = Complex64::new(x, 0.0);
        let w = moved.iter().fold(Complex64::new(1.0, 0.0), |acc, &(z, e)| acc * (v - z).powi(-e));
        f.value(v + shift) * w
    };
    let tail = |cut: f64| {
        let w = if cut > zmax { (cut - zmax).powi(-total).min(eta.powi(-total)) } else { eta.powi(-total) };
        f.line_tail_mass(y, cut) * w
    };
    let width = f.width();
    let mut breaks = Vec::new();
    for &(z, _) in &moved {
        pole_breaks(z, width, &mut breaks);
    }
    let rule = LineIntegral { tail: &tail, start: 4.0 * width, cap: 1024.0 * width.max(1.0), tail_tol: 1e-14 };
    quad::real_line(&integrand, &rule, &breaks, quad_opts()).value
}

/// `I_n(g; z)` by adaptive quadrature of `g(v) / (v - z)^{n+1}` along a
/// horizontal line on the far side of the real axis from `z`.
pub fn i_n<F: StripFunction + ?Sized>(g: &F, n: usize, z: Complex64) -> Result<Complex64> {
    if z.im == 0.0 {
        return Err(Error::RealAxisInput);
    }
    Ok(pole_product_integral(g, 0, &[(z, n as i32 + 1)]))
}

/// `I_n(g; z)` through the derivative identity `I_0(g^{(n)}; z) / n!`.
pub fn i_n_by_derivative<F: StripFunction + ?Sized>(g: &F, n: usize, z: Complex64) -> Result<Complex64> {
    if z.im == 0.0 {
        return Err(Error::RealAxisInput);
    }
    Ok(pole_product_integral(g, n, &[(z, 1)]) / factorial(n))
}

/// Principal-value part `∫_0^∞ (h(E+u) - h(E-u)) / u du` for `h = f^{(m)}`.
pub(crate) fn pv_real_part<F: StripFunction + ?Sized>(f: &F, m: usize, e: f64) -> f64 {
    let h = |x: f64| f.derivative(m, Complex64::new(x, 0.0)).re;
    let width = f.width();
    let opts = quad_opts();

    let probe = 1e-3 * width.min(1.0);
    let (hp, hm) = (h(e + probe), h(e - probe));
    let cancels = (hp - hm).abs() <= PV_CANCELLATION * (hp.abs() + hm.abs());

    let near = if cancels {
        // integrated-by-parts form on [0, 1]
        let d1 = |x: f64| f.derivative(m + 1, Complex64::new(x, 0.0)).re;
        let d2 = |x: f64| f.derivative(m + 2, Complex64::new(x, 0.0)).re;
        let boundary = d1(e + 1.0) + d1(e - 1.0);
        let integrand = |x: f64| {
            let kernel = if x > 0.0 { x - x * x.ln() } else { 0.0 };
            Complex64::new((d2(e + x) - d2(e - x)) * kernel, 0.0)
        };
        boundary - quad::adaptive(&integrand, 0.0, 1.0, &[0.5 * width.min(1.0)], opts).value.re
    } else {
        let slope = 2.0 * f.derivative(m + 1, Complex64::new(e, 0.0)).re;
        let integrand = |u: f64| {
            if u == 0.0 {
                Complex64::new(slope, 0.0)
            } else {
                Complex64::new((h(e + u) - h(e - u)) / u, 0.0)
            }
        };
        let breaks = [0.25 * width, width];
        quad::adaptive(&integrand, 0.0, 1.0, &breaks, opts).value.re
    };

    // [1, ∞): truncate where the tail mass beyond |v| > U - |E| is negligible
    let far_integrand = |u: f64| Complex64::new((h(e + u) - h(e - u)) / u, 0.0);
    let mut upper = (e.abs() + 4.0 * width).max(2.0);
    let cap = e.abs() + 1024.0 * width.max(1.0);
    while f.tail_mass(m, upper - e.abs()) >= 1e-14 && upper < cap {
        upper *= 2.0;
    }
    let upper = upper.min(cap);
    let mut breaks = vec![2.0, e.abs() + width];
    breaks.push(e.abs() + 1.0);
    let mut far = quad::adaptive(&far_integrand, 1.0, upper, &breaks, opts).value.re;
    if f.tail_mass(m, upper - e.abs()) >= 1e-14 {
        far += quad::upper_tail(&far_integrand, upper, opts).value.re;
    }
    near + far
}

/// Boundary value `lim_{ε↓0} I_0(g; E + iσε)`: the principal-value integral
/// plus `σ iπ g(E)`.
pub fn i0_boundary<F: StripFunction + ?Sized>(g: &F, sigma: HalfPlaneSign, e: f64) -> Complex64 {
    let re = pv_real_part(g, 0, e);
    Complex64::new(re, sigma.value() * PI * g.value(Complex64::new(e, 0.0)).re)
}

/// `((8/π + 2)/r² + 1/r + 1) ‖g‖_r`, a uniform bound on `|I_0(g; E ± i0)|`.
pub fn i0_bound<F: StripFunction + ?Sized>(g: &F) -> f64 {
    let r = g.strip_radius();
    ((8.0 / PI + 2.0) / (r * r) + 1.0 / r + 1.0) * g.norm_bound()
}

/// Boundary value of `I_n`, realised as `I_0(g^{(n)}; E ± i0) / n!`.
pub fn in_boundary<F: StripFunction + ?Sized>(g: &F, n: usize, sigma: HalfPlaneSign, e: f64) -> Complex64 {
    let d = Derivative { base: g, order: n };
    i0_boundary(&d, sigma, e) / factorial(n)
}
