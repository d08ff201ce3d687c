//! Single-site probability densities that continue analytically to a strip
//! `|Im z| < r` around the real axis.
//!
//! Besides evaluation and derivatives, each density carries its strip norm
//! `sup_{|w|<r} ∫ |g(v + iw)| dv`, which every bound in the expansion is
//! expressed through.

use std::f64::consts::{PI, SQRT_2};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::quad::{self, LineIntegral, QuadOptions};

const CIRCLE_START_NODES: usize = 64;
const CIRCLE_MAX_NODES: usize = 1 << 14;
const CIRCLE_TOL: f64 = 1e-12;
// Cramér's bound |He_n(x)| ≤ K sqrt(n!) exp(x²/4)
const CRAMER_K: f64 = 1.086_435;

pub(crate) fn factorial(n: usize) -> f64 {
    (1..=n).fold(1.0, |acc, k| acc * k as f64)
}

/// A function holomorphic on a strip around the real axis, as consumed by
/// the Cauchy-integral routines.
pub trait StripFunction: Send + Sync {
    /// Half-width of the strip of analyticity.
    fn strip_radius(&self) -> f64;

    /// Value at `z`; callers guarantee `|Im z| < strip_radius()`.
    fn value(&self, z: Complex64) -> Complex64;

    /// `n`-th derivative at `z`. The default goes through the Cauchy circle.
    fn derivative(&self, n: usize, z: Complex64) -> Complex64 {
        if n == 0 {
            return self.value(z);
        }
        let rho = 0.5 * (self.strip_radius() - z.im.abs());
        circle_derivative(|w| self.value(w), n, z, rho)
    }

    /// Upper bound on `∫_{|v|>cut} |f^{(m)}(v)| dv` over the real line.
    /// `f64::INFINITY` means "unknown"; integrators then map the tails.
    fn tail_mass(&self, m: usize, cut: f64) -> f64;

    /// Upper bound on `∫_{|x|>cut} |f(x + iy)| dx`; `f64::INFINITY` when
    /// no bound is known, which disables contour shifts.
    fn line_tail_mass(&self, _y: f64, _cut: f64) -> f64 {
        f64::INFINITY
    }

    /// Characteristic width, used to seed quadrature partitions.
    fn width(&self) -> f64;

    /// Upper bound on the strip norm over the full strip.
    fn norm_bound(&self) -> f64;

    /// Whole-line integral of `f^{(m)}(v) * weight(v)`, where `weight_sup(V)`
    /// bounds `|weight|` on `|v| > V`.
    fn integrate_against(
        &self,
        m: usize,
        weight: &dyn Fn(f64) -> Complex64,
        weight_sup: &dyn Fn(f64) -> f64,
        breaks: &[f64],
        opts: QuadOptions,
    ) -> quad::QuadResult {
        let f = |v: f64| {
            let w = weight(v);
            if w == Complex64::new(0.0, 0.0) {
                w
            } else {
                self.derivative(m, Complex64::new(v, 0.0)) * w
            }
        };
        let width = self.width();
        let tail = |cut: f64| self.tail_mass(m, cut) * weight_sup(cut);
        let rule = LineIntegral { tail: &tail, start: 4.0 * width, cap: 64.0 * width.max(1.0) * 16.0, tail_tol: 1e-13 };
        quad::real_line(&f, &rule, breaks, opts)
    }
}

/// `n`-th derivative through the trapezoidal rule on the circle of radius
/// `rho` centred at `z`. Node count starts at 64 and doubles until two
/// successive values agree to 1e-12.
pub fn circle_derivative<F: Fn(Complex64) -> Complex64>(f: F, n: usize, z: Complex64, rho: f64) -> Complex64 {
    let prefactor = factorial(n) / rho.powi(n as i32);
    let eval = |nodes: usize| {
        let mut acc = Complex64::new(0.0, 0.0);
        let mut fmax: f64 = 0.0;
        for k in 0..nodes {
            let theta = 2.0 * PI * k as f64 / nodes as f64;
            let e = Complex64::from_polar(1.0, theta);
            let fv = f(z + e * rho);
            fmax = fmax.max(fv.norm());
            acc += fv * Complex64::from_polar(1.0, -(n as f64) * theta);
        }
        (acc * prefactor / nodes as f64, fmax * prefactor)
    };
    let mut nodes = CIRCLE_START_NODES.max(2 * n + 2);
    let (mut prev, _) = eval(nodes);
    loop {
        nodes *= 2;
        let (next, scale) = eval(nodes);
        let diff = (next - prev).norm();
        if diff <= CIRCLE_TOL * next.norm().max(1e-4 * scale) || nodes >= CIRCLE_MAX_NODES {
            return next;
        }
        prev = next;
    }
}

/// Probabilists' Hermite polynomial `He_n` at a complex point.
pub fn hermite_he(n: usize, x: Complex64) -> Complex64 {
    let mut p0 = Complex64::new(1.0, 0.0);
    if n == 0 {
        return p0;
    }
    let mut p1 = x;
    for k in 1..n {
        let p2 = x * p1 - p0 * k as f64;
        p0 = p1;
        p1 = p2;
    }
    p1
}

/// User-supplied analytic density.
#[derive(Clone)]
pub struct CustomForm {
    pub name: String,
    pub f: Arc<dyn Fn(Complex64) -> Complex64 + Send + Sync>,
    pub width: f64,
}

impl fmt::Debug for CustomForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomForm").field("name", &self.name).field("width", &self.width).finish()
    }
}

#[derive(Debug, Clone)]
pub enum DensityKind {
    Gaussian { sigma2: f64 },
    Cauchy { scale: f64 },
    Custom(CustomForm),
}

/// A probability density analytic in the strip `|Im z| < r`.
#[derive(Debug, Clone)]
pub struct AnalyticDensity {
    kind: DensityKind,
    strip_radius: f64,
    norm_r: f64,
    second_moment: Option<f64>,
}

impl AnalyticDensity {
    /// Centred normal density with variance `sigma2`, declared on the strip of
    /// half-width `r`.
    pub fn gaussian(sigma2: f64, r: f64) -> Result<Self> {
        if !(sigma2 > 0.0 && sigma2.is_finite()) {
            return Err(Error::InvalidDensity(format!("gaussian variance must be positive, got {sigma2}")));
        }
        check_radius(r)?;
        Ok(Self {
            kind: DensityKind::Gaussian { sigma2 },
            strip_radius: r,
            norm_r: (r * r / (2.0 * sigma2)).exp(),
            second_moment: Some(sigma2),
        })
    }

    /// Cauchy density `a / (π (v² + a²))`; requires `r < a`.
    pub fn cauchy(scale: f64, r: f64) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::InvalidDensity(format!("cauchy scale must be positive, got {scale}")));
        }
        check_radius(r)?;
        if r >= scale {
            return Err(Error::InvalidDensity(format!("cauchy scale {scale} requires r < scale, got r = {r}")));
        }
        let mut d = Self { kind: DensityKind::Cauchy { scale }, strip_radius: r, norm_r: 1.0, second_moment: None };
        d.norm_r = d.numeric_strip_norm(r);
        Ok(d)
    }

    /// Density given by an analytic form. Positivity is checked on a 10⁴-point
    /// grid spanning ±20 widths. Without a supplied strip norm the numerical
    /// estimate is inflated by 1%.
    pub fn custom(
        form: CustomForm,
        r: f64,
        norm_r: Option<f64>,
        second_moment: Option<f64>,
    ) -> Result<Self> {
        check_radius(r)?;
        if !(form.width > 0.0) {
            return Err(Error::InvalidDensity("custom density width must be positive".into()));
        }
        let span = 20.0 * form.width;
        for k in 0..10_000 {
            let v = -span + 2.0 * span * k as f64 / 9_999.0;
            let g = (form.f)(Complex64::new(v, 0.0));
            if !(g.re >= 0.0) || g.im.abs() > 1e-12 * g.re.abs().max(1e-300) {
                return Err(Error::InvalidDensity(format!("{} is not a nonnegative real density at v = {v}", form.name)));
            }
        }
        let mut d = Self { kind: DensityKind::Custom(form), strip_radius: r, norm_r: 1.0, second_moment };
        d.norm_r = match norm_r {
            Some(n) if n >= 1.0 => n,
            Some(n) => return Err(Error::InvalidDensity(format!("strip norm of a probability density is ≥ 1, got {n}"))),
            None => 1.01 * d.numeric_strip_norm(r),
        };
        Ok(d)
    }

    pub fn kind(&self) -> &DensityKind {
        &self.kind
    }

    pub fn strip_radius(&self) -> f64 {
        self.strip_radius
    }

    /// Cached strip norm `‖g‖_r`.
    pub fn norm(&self) -> f64 {
        self.norm_r
    }

    /// Second moment `M_g`; `None` when it is infinite.
    pub fn second_moment(&self) -> Option<f64> {
        self.second_moment
    }

    fn check_strip(&self, im: f64) -> Result<()> {
        if im.abs() >= self.strip_radius {
            Err(Error::StripViolation { im, radius: self.strip_radius })
        } else {
            Ok(())
        }
    }

    /// Analytic continuation of `g` at `z`.
    pub fn eval(&self, z: Complex64) -> Result<Complex64> {
        self.check_strip(z.im)?;
        Ok(self.value(z))
    }

    /// `g^{(n)}(z)`; `rho` is the Cauchy-circle radius and must keep the
    /// circle inside the strip even when a closed form is used.
    pub fn deriv(&self, n: usize, z: Complex64, rho: f64) -> Result<Complex64> {
        if !(rho > 0.0) {
            return Err(Error::InvalidArgument(format!("circle radius must be positive, got {rho}")));
        }
        if z.im.abs() + rho >= self.strip_radius {
            return Err(Error::StripViolation { im: z.im.abs() + rho, radius: self.strip_radius });
        }
        Ok(self.derivative(n, z))
    }

    /// Derivative through circle quadrature only, bypassing closed forms.
    pub fn deriv_circle(&self, n: usize, z: Complex64, rho: f64) -> Result<Complex64> {
        if z.im.abs() + rho >= self.strip_radius || !(rho > 0.0) {
            return Err(Error::StripViolation { im: z.im.abs() + rho, radius: self.strip_radius });
        }
        Ok(circle_derivative(|w| self.value(w), n, z, rho))
    }

    /// `sup_{|w| < r'} ∫ |g(v + iw)| dv` for `0 < r' ≤ r`.
    pub fn norm_r(&self, r_prime: f64) -> Result<f64> {
        if !(r_prime > 0.0) || r_prime > self.strip_radius {
            return Err(Error::StripViolation { im: r_prime, radius: self.strip_radius });
        }
        Ok(match self.kind {
            DensityKind::Gaussian { sigma2 } => (r_prime * r_prime / (2.0 * sigma2)).exp(),
            _ => self.numeric_strip_norm(r_prime),
        })
    }

    /// `n! ‖g‖_r / ρⁿ`, the sup bound on `g^{(n)}` over the strip of
    /// half-width `r - ρ`.
    pub fn deriv_sup_bound(&self, n: usize, rho: f64) -> Result<f64> {
        if !(rho > 0.0 && rho < self.strip_radius) {
            return Err(Error::InvalidArgument(format!("need 0 < rho < r, got rho = {rho}")));
        }
        Ok(factorial(n) * self.norm_r / rho.powi(n as i32))
    }

    /// Line integral `∫ |g(v + iw)| dv`.
    pub fn line_l1(&self, w: f64) -> f64 {
        let width = self.width();
        let f = |v: f64| Complex64::new(self.value(Complex64::new(v, w)).norm(), 0.0);
        let tail = |cut: f64| match self.kind {
            DensityKind::Gaussian { sigma2 } => {
                let s = sigma2.sqrt();
                (w * w / (2.0 * sigma2)).exp() * libm::erfc(cut / (s * SQRT_2))
            }
            DensityKind::Cauchy { scale } => 2.0 * scale / (PI * cut),
            DensityKind::Custom(_) => f64::INFINITY,
        };
        let rule = LineIntegral { tail: &tail, start: 4.0 * width, cap: 256.0 * width, tail_tol: 1e-13 };
        let breaks = [-width, width];
        quad::real_line(&f, &rule, &breaks, QuadOptions { abs_tol: 1e-13, rel_tol: 1e-11, max_intervals: 4000 })
            .value
            .re
    }

    /// Sup of the line integral over `|w| ≤ r'`: a 17-point grid on `[0, r']`
    /// followed by golden-section refinement around the best node. Densities
    /// real on the real axis have an even line integral, so `w ≥ 0` suffices.
    fn numeric_strip_norm(&self, r_prime: f64) -> f64 {
        let grid = 16;
        let values: Vec<f64> = (0..=grid).map(|k| self.line_l1(r_prime * k as f64 / grid as f64)).collect();
        let (best, &best_val) = values
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .expect("grid is non-empty");
        if best == grid {
            return best_val;
        }
        let h = r_prime / grid as f64;
        let (mut a, mut b) = ((best as f64 - 1.0).max(0.0) * h, (best as f64 + 1.0) * h);
        let phi = 0.5 * (5f64.sqrt() - 1.0);
        let mut c = b - phi * (b - a);
        let mut d = a + phi * (b - a);
        let (mut fc, mut fd) = (self.line_l1(c), self.line_l1(d));
        for _ in 0..40 {
            if fc > fd {
                b = d;
                d = c;
                fd = fc;
                c = b - phi * (b - a);
                fc = self.line_l1(c);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + phi * (b - a);
                fd = self.line_l1(d);
            }
        }
        best_val.max(fc).max(fd)
    }
}

fn check_radius(r: f64) -> Result<()> {
    if r > 0.0 && r.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidDensity(format!("strip radius must be positive and finite, got {r}")))
    }
}

impl StripFunction for AnalyticDensity {
    fn strip_radius(&self) -> f64 {
        self.strip_radius
    }

    fn value(&self, z: Complex64) -> Complex64 {
        match &self.kind {
            DensityKind::Gaussian { sigma2 } => {
                (-(z * z) / (2.0 * sigma2)).exp() / (2.0 * PI * sigma2).sqrt()
            }
            DensityKind::Cauchy { scale } => {
                Complex64::new(*scale / PI, 0.0) / (z * z + scale * scale)
            }
            DensityKind::Custom(form) => (form.f)(z),
        }
    }

    fn derivative(&self, n: usize, z: Complex64) -> Complex64 {
        match &self.kind {
            DensityKind::Gaussian { sigma2 } => {
                let s = sigma2.sqrt();
                let sign = if n.is_multiple_of(2) { 1.0 } else { -1.0 };
                hermite_he(n, z / s) * self.value(z) * (sign / s.powi(n as i32))
            }
            DensityKind::Cauchy { scale } => {
                let ia = Complex64::new(0.0, *scale);
                let e = -(n as i32) - 1;
                let diff = (z - ia).powi(e) - (z + ia).powi(e);
                let sign = if n.is_multiple_of(2) { 1.0 } else { -1.0 };
                diff * sign * factorial(n) / Complex64::new(0.0, 2.0 * PI)
            }
            DensityKind::Custom(_) => {
                if n == 0 {
                    return self.value(z);
                }
                let rho = 0.5 * (self.strip_radius - z.im.abs());
                circle_derivative(|w| self.value(w), n, z, rho)
            }
        }
    }

    fn tail_mass(&self, m: usize, cut: f64) -> f64 {
        match self.kind {
            DensityKind::Gaussian { sigma2 } => {
                let s = sigma2.sqrt();
                if m == 0 {
                    return libm::erfc(cut / (s * SQRT_2));
                }
                // Cramér: |g^{(m)}(v)| ≤ K sqrt(m!) exp(-x²/4) / (σ^{m+1} sqrt(2π)), x = v/σ
                2.0 * CRAMER_K * factorial(m).sqrt() / (s.powi(m as i32) * (2.0 * PI).sqrt())
                    * PI.sqrt()
                    * libm::erfc(cut / (2.0 * s))
            }
            DensityKind::Cauchy { scale } => {
                if m == 0 {
                    2.0 * (0.5 - (cut / scale).atan() / PI)
                } else {
                    2.0 * factorial(m) / (PI * m as f64 * cut.powi(m as i32))
                }
            }
            DensityKind::Custom(_) => f64::INFINITY,
        }
    }

    fn line_tail_mass(&self, y: f64, cut: f64) -> f64 {
        match self.kind {
            DensityKind::Gaussian { sigma2 } => {
                (y * y / (2.0 * sigma2)).exp() * libm::erfc(cut / (2.0 * sigma2).sqrt())
            }
            // |x + iy|² + a² ≥ x² - (a+|y|)² ≥ 3x²/4 once x ≥ 2(a+|y|)
            DensityKind::Cauchy { scale } if cut >= 2.0 * (scale + y.abs()) => 8.0 * scale / (3.0 * PI * cut),
            _ => f64::INFINITY,
        }
    }

    fn width(&self) -> f64 {
        match &self.kind {
            DensityKind::Gaussian { sigma2 } => sigma2.sqrt(),
            DensityKind::Cauchy { scale } => *scale,
            DensityKind::Custom(form) => form.width,
        }
    }

    fn norm_bound(&self) -> f64 {
        self.norm_r
    }
}

impl fmt::Display for AnalyticDensity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            DensityKind::Gaussian { sigma2 } => write!(f, "gaussian:sigma2={},r={}", sigma2, self.strip_radius),
            DensityKind::Cauchy { scale } => write!(f, "cauchy:a={},r={}", scale, self.strip_radius),
            DensityKind::Custom(form) => write!(f, "custom:{},r={}", form.name, self.strip_radius),
        }
    }
}

impl FromStr for AnalyticDensity {
    type Err = Error;

    /// Parses `gaussian:sigma2=1.0,r=1.0` or `cauchy:a=1.0,r=0.5`.
    fn from_str(s: &str) -> Result<Self> {
        let (name, params) = s
            .split_once(':')
            .ok_or_else(|| Error::Parse(format!("density spec `{s}` lacks `kind:` prefix")))?;
        let mut sigma2 = None;
        let mut a = None;
        let mut r = None;
        for item in params.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (k, v) = item
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("density parameter `{item}` is not key=value")))?;
            let v: f64 = v
                .trim()
                .parse()
                .map_err(|_| Error::Parse(format!("density parameter `{item}` is not a number")))?;
            match k.trim() {
                "sigma2" => sigma2 = Some(v),
                "a" => a = Some(v),
                "r" => r = Some(v),
                other => return Err(Error::Parse(format!("unknown density parameter `{other}`"))),
            }
        }
        let r = r.ok_or_else(|| Error::Parse("density spec needs r=<strip radius>".into()))?;
        match name.trim() {
            "gaussian" => {
                let s2 = sigma2.ok_or_else(|| Error::Parse("gaussian needs sigma2=<variance>".into()))?;
                AnalyticDensity::gaussian(s2, r)
            }
            "cauchy" => {
                let a = a.ok_or_else(|| Error::Parse("cauchy needs a=<scale>".into()))?;
                AnalyticDensity::cauchy(a, r)
            }
            other => Err(Error::Parse(format!("unknown density kind `{other}`"))),
        }
    }
}

/// The `order`-th derivative of a strip function, viewed as a strip function.
pub struct Derivative<'a, F: StripFunction + ?Sized> {
    pub base: &'a F,
    pub order: usize,
}

impl<'a, F: StripFunction + ?Sized> StripFunction for Derivative<'a, F> {
    fn strip_radius(&self) -> f64 {
        self.base.strip_radius()
    }
    fn value(&self, z: Complex64) -> Complex64 {
        self.base.derivative(self.order, z)
    }
    fn derivative(&self, n: usize, z: Complex64) -> Complex64 {
        self.base.derivative(self.order + n, z)
    }
    fn tail_mass(&self, m: usize, cut: f64) -> f64 {
        self.base.tail_mass(self.order + m, cut)
    }
    fn width(&self) -> f64 {
        self.base.width()
    }
    fn norm_bound(&self) -> f64 {
        // valid on the half strip, with ρ = r/2
        let rho = 0.5 * self.base.strip_radius();
        factorial(self.order) / rho.powi(self.order as i32) * self.base.norm_bound()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn closed_form_values() {
        let g = AnalyticDensity::gaussian(1.0, 1.0).unwrap();
        assert!((g.eval(c(0.0, 0.0)).unwrap().re - 0.398_942_280_401_432_7).abs() < 1e-15);
        let expected = 0.125f64.exp() / (2.0 * PI).sqrt();
        assert!((g.eval(c(0.0, 0.5)).unwrap() - c(expected, 0.0)).norm() < 1e-15);
        let ca = AnalyticDensity::cauchy(1.0, 0.5).unwrap();
        assert!((ca.eval(c(0.0, 0.0)).unwrap().re - 1.0 / PI).abs() < 1e-15);
    }

    #[test]
    fn continuation_matches_taylor_series() {
        // e^{-z²/2} = Σ (-1)^k z^{2k} / (2^k k!)
        let g = AnalyticDensity::gaussian(1.0, 1.0).unwrap();
        let z = c(0.0, 0.5);
        let mut sum = Complex64::new(0.0, 0.0);
        let mut term = Complex64::new(1.0, 0.0);
        for k in 0..30 {
            sum += term;
            term = -term * z * z / (2.0 * (k + 1) as f64);
        }
        let taylor = sum / (2.0 * PI).sqrt();
        assert!((g.eval(z).unwrap() - taylor).norm() < 1e-15);
    }

    #[test]
    fn strip_violations_are_rejected() {
        let g = AnalyticDensity::gaussian(1.0, 1.0).unwrap();
        assert!(matches!(g.eval(c(0.0, 1.0)), Err(Error::StripViolation { .. })));
        assert!(matches!(g.deriv(2, c(0.0, 0.6), 0.5), Err(Error::StripViolation { .. })));
        assert!(AnalyticDensity::cauchy(1.0, 1.0).is_err());
        assert!(AnalyticDensity::gaussian(-1.0, 1.0).is_err());
    }

    #[test]
    fn derivative_examples() {
        let g = AnalyticDensity::gaussian(1.0, 1.0).unwrap();
        assert!(g.deriv(1, c(0.0, 0.0), 0.5).unwrap().norm() < 1e-16);
        let d2 = g.deriv(2, c(0.0, 0.0), 0.5).unwrap();
        assert!((d2.re + 1.0 / (2.0 * PI).sqrt()).abs() < 1e-15);
        for z in [c(0.3, 0.1), c(-1.2, -0.2), c(2.0, 0.0)] {
            assert!((g.deriv(0, z, 0.5).unwrap() - g.eval(z).unwrap()).norm() < 1e-12);
        }
    }

    #[test]
    fn circle_quadrature_matches_closed_form() {
        let g = AnalyticDensity::gaussian(1.0, 1.0).unwrap();
        for n in 0..=6 {
            for &x in &[-2.0, -0.7, 0.0, 0.4, 1.5] {
                let z = c(x, 0.05);
                let exact = g.deriv(n, z, 0.5).unwrap();
                let circ = g.deriv_circle(n, z, 0.5).unwrap();
                let scale = exact.norm().max(1e-3);
                assert!((exact - circ).norm() <= 1e-10 * scale, "n={n} x={x}: {exact} vs {circ}");
            }
        }
        let ca = AnalyticDensity::cauchy(1.0, 0.8).unwrap();
        for n in 0..=5 {
            let z = c(0.3, 0.0);
            let exact = ca.derivative(n, z);
            let circ = ca.deriv_circle(n, z, 0.4).unwrap();
            assert!((exact - circ).norm() <= 1e-10 * exact.norm().max(1e-3), "n={n}");
        }
    }

    #[test]
    fn gaussian_norm_examples() {
        let g = AnalyticDensity::gaussian(1.0, 1.0).unwrap();
        assert!((g.norm_r(1.0).unwrap() - 0.5f64.exp()).abs() < 1e-15);
        assert!((g.norm_r(1e-6).unwrap() - 1.0).abs() < 1e-10);
        // numeric route agrees with the closed form
        assert!((g.numeric_strip_norm(1.0) - 0.5f64.exp()).abs() < 1e-9);
    }

    #[test]
    fn normalization_of_builtins() {
        for g in [AnalyticDensity::gaussian(1.0, 1.0).unwrap(), AnalyticDensity::cauchy(1.0, 0.5).unwrap()] {
            assert!((g.line_l1(0.0) - 1.0).abs() < 1e-10, "{g}");
        }
    }

    #[test]
    fn cauchy_norm_is_monotone_and_at_least_one() {
        let g = AnalyticDensity::cauchy(1.0, 0.9).unwrap();
        let a = g.norm_r(0.2).unwrap();
        let b = g.norm_r(0.5).unwrap();
        let cc = g.norm_r(0.9).unwrap();
        assert!(1.0 <= a && a <= b && b <= cc, "{a} {b} {cc}");
        assert!((g.norm() - cc).abs() < 1e-12);
    }

    #[test]
    fn deriv_sup_bound_values() {
        let g = AnalyticDensity::gaussian(1.0, 1.0).unwrap();
        assert_eq!(g.deriv_sup_bound(0, 0.3).unwrap(), g.norm());
        let b = g.deriv_sup_bound(2, 0.5).unwrap();
        assert!((b - 2.0 * 0.5f64.exp() / 0.25).abs() < 1e-12);
        assert!((b - 13.19).abs() < 0.01);
        assert!(g.deriv_sup_bound(1, 1.0).is_err());
    }

    #[test]
    fn derivative_bounds_hold_on_grid() {
        for g in [AnalyticDensity::gaussian(1.0, 1.0).unwrap(), AnalyticDensity::cauchy(1.0, 0.8).unwrap()] {
            let rho = 0.5 * g.strip_radius();
            for n in 0..=6 {
                let bound = g.deriv_sup_bound(n, rho).unwrap();
                let sup = (0..=400)
                    .map(|k| g.derivative(n, c(-8.0 + 16.0 * k as f64 / 400.0, 0.0)).norm())
                    .fold(0.0, f64::max);
                assert!(sup <= bound, "{g} n={n}: {sup} > {bound}");
            }
            // |g(z)| ≤ ‖g‖_r / (πρ) on |Im z| ≤ r - ρ
            let limit = g.norm() / (PI * rho);
            for i in 0..=10 {
                let y = -(g.strip_radius() - rho) + 2.0 * (g.strip_radius() - rho) * i as f64 / 10.0;
                for k in 0..=100 {
                    let z = c(-5.0 + 0.1 * k as f64, y);
                    assert!(g.value(z).norm() <= limit);
                }
            }
        }
    }

    #[test]
    fn parses_spec_strings() {
        let g: AnalyticDensity = "gaussian:sigma2=1.0,r=1.0".parse().unwrap();
        assert!(matches!(g.kind(), DensityKind::Gaussian { sigma2 } if *sigma2 == 1.0));
        let ca: AnalyticDensity = "cauchy:a=1.0,r=0.5".parse().unwrap();
        assert_eq!(ca.strip_radius(), 0.5);
        assert!("cauchy:a=1.0,r=1.5".parse::<AnalyticDensity>().is_err());
        assert!("uniform:r=1".parse::<AnalyticDensity>().is_err());
        assert!("gaussian:sigma2=x,r=1".parse::<AnalyticDensity>().is_err());
        let back: AnalyticDensity = g.to_string().parse().unwrap();
        assert_eq!(back.to_string(), g.to_string());
    }

    #[test]
    fn custom_density_checks_positivity_and_inflates_norm() {
        let form = CustomForm {
            name: "sech".into(),
            f: Arc::new(|z: Complex64| {
                // (1/π) sech(z), poles at ±iπ/2
                Complex64::new(1.0 / PI, 0.0) / z.cosh()
            }),
            width: 1.0,
        };
        let g = AnalyticDensity::custom(form, 0.5, None, Some(PI * PI / 4.0)).unwrap();
        assert!(g.norm() >= 1.01 * 0.999);
        let bad = CustomForm { name: "odd".into(), f: Arc::new(|z: Complex64| z), width: 1.0 };
        assert!(AnalyticDensity::custom(bad, 0.5, Some(1.0), None).is_err());
    }

    proptest! {
        #[test]
        fn strip_norm_is_monotone_for_gaussians(s2 in 0.2f64..4.0, r in 0.1f64..2.0, t in 0.05f64..1.0) {
            let g = AnalyticDensity::gaussian(s2, r).unwrap();
            prop_assert!(g.norm_r(t * r).unwrap() <= g.norm_r(r).unwrap());
        }

        #[test]
        fn schwarz_reflection(x in -4.0f64..4.0, y in -0.4f64..0.4) {
            let g = AnalyticDensity::cauchy(1.0, 0.5).unwrap();
            let z = c(x, y);
            prop_assert!((g.value(z.conj()) - g.value(z).conj()).norm() < 1e-15);
        }
    }
}
