//! Finite-range covariant observables: monomials with strip-analytic
//! coefficient functions, their polynomials, the velocity operators, and the
//! per-site densities `g_{Γ,u}` they induce in the path expansion.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::densities::{factorial, hermite_he, AnalyticDensity, StripFunction};
use crate::error::{Error, Result};
use crate::walks::{NPathFamily, Site};

// Cramér's bound |He_n(x)| e^{-x²/4} ≤ K sqrt(n!)
const CRAMER_K: f64 = 1.086_435;

/// Registry of scalar coefficient functions with closed-form derivatives and
/// strip bounds.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub enum CoefficientFn {
    /// `v ↦ c`.
    Constant(f64),
    /// `v ↦ 1 / (1 + v²)`, poles at `±i`.
    Rational1,
    /// `v ↦ exp(-α v²)`.
    GaussianDamped(f64),
}

impl CoefficientFn {
    fn key(&self) -> (u8, u64) {
        match *self {
            CoefficientFn::Constant(c) => (0, c.to_bits()),
            CoefficientFn::Rational1 => (1, 0),
            CoefficientFn::GaussianDamped(a) => (2, a.to_bits()),
        }
    }

    pub fn value(&self, z: Complex64) -> Complex64 {
        self.derivative(0, z)
    }

    pub fn derivative(&self, n: usize, z: Complex64) -> Complex64 {
        match *self {
            CoefficientFn::Constant(c) => {
                if n == 0 {
                    Complex64::new(c, 0.0)
                } else {
                    Complex64::new(0.0, 0.0)
                }
            }
            CoefficientFn::Rational1 => {
                // 1/(1+z²) = (1/2i) [1/(z-i) - 1/(z+i)]
                let i = Complex64::i();
                let k = -(n as i32) - 1;
                let sign = if n.is_multiple_of(2) { 1.0 } else { -1.0 };
                ((z - i).powi(k) - (z + i).powi(k)) * (sign * factorial(n)) / (2.0 * i)
            }
            CoefficientFn::GaussianDamped(alpha) => {
                let s = (2.0 * alpha).sqrt();
                let sign = if n.is_multiple_of(2) { 1.0 } else { -1.0 };
                hermite_he(n, z * s) * (-alpha * z * z).exp() * (sign * s.powi(n as i32))
            }
        }
    }

    /// Largest strip half-width on which this coefficient is used; the
    /// rational coefficient is kept at distance from its poles so that its
    /// sup-norm stays at 2.
    pub fn admissible_radius(&self) -> f64 {
        match self {
            CoefficientFn::Rational1 => std::f64::consts::FRAC_1_SQRT_2,
            _ => f64::INFINITY,
        }
    }

    /// `sup_{|Im z| < r} |a(z)|`.
    pub fn sup_norm(&self, r: f64) -> f64 {
        match *self {
            CoefficientFn::Constant(c) => c.abs(),
            CoefficientFn::Rational1 => {
                if r >= 1.0 {
                    f64::INFINITY
                } else {
                    1.0 / (1.0 - r * r)
                }
            }
            CoefficientFn::GaussianDamped(alpha) => (alpha * r * r).exp(),
        }
    }

    /// `sup_{v ∈ R} |a^{(k)}(v)|` (an upper bound).
    pub fn real_derivative_sup(&self, k: usize) -> f64 {
        match *self {
            CoefficientFn::Constant(c) => {
                if k == 0 {
                    c.abs()
                } else {
                    0.0
                }
            }
            CoefficientFn::Rational1 => factorial(k),
            CoefficientFn::GaussianDamped(alpha) => {
                let s = (2.0 * alpha).sqrt();
                CRAMER_K * factorial(k).sqrt() * s.powi(k as i32)
            }
        }
    }

    fn is_constant(&self) -> bool {
        matches!(self, CoefficientFn::Constant(_))
    }
}

impl PartialEq for CoefficientFn {
    fn eq(&self, other: &Self) -> bool {
        self.key() == other.key()
    }
}

impl Eq for CoefficientFn {}

impl PartialOrd for CoefficientFn {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for CoefficientFn {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.key().cmp(&other.key())
    }
}

impl std::hash::Hash for CoefficientFn {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.key().hash(state);
    }
}

impl fmt::Display for CoefficientFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CoefficientFn::Constant(c) => write!(f, "const:{c}"),
            CoefficientFn::Rational1 => write!(f, "rational1"),
            CoefficientFn::GaussianDamped(a) => write!(f, "gauss:{a}"),
        }
    }
}

impl FromStr for CoefficientFn {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let number = |t: &str| t.trim().parse::<f64>().map_err(|e| Error::Parse(format!("coefficient {s:?}: {e}")));
        if s == "rational1" {
            Ok(CoefficientFn::Rational1)
        } else if let Some(rest) = s.strip_prefix("const:") {
            Ok(CoefficientFn::Constant(number(rest)?))
        } else if let Some(rest) = s.strip_prefix("gauss:") {
            let a = number(rest)?;
            if a <= 0.0 {
                return Err(Error::Parse(format!("gaussian damping must be positive in {s:?}")));
            }
            Ok(CoefficientFn::GaussianDamped(a))
        } else {
            Err(Error::Parse(format!("unknown coefficient function {s:?}")))
        }
    }
}

/// `⟨x|A|y⟩ = δ_{y-x,u_0} Π_w a_w(V(x+w))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovariantMonomial {
    pub displacement: Site,
    pub coefficients: BTreeMap<Site, CoefficientFn>,
}

impl CovariantMonomial {
    pub fn identity(d: usize) -> Self {
        Self::shift(Site::origin(d))
    }

    pub fn shift(displacement: Site) -> Self {
        CovariantMonomial { displacement, coefficients: BTreeMap::new() }
    }

    pub fn with_coefficient(mut self, at: Site, a: CoefficientFn) -> Self {
        self.coefficients.insert(at, a);
        self
    }

    pub fn dim(&self) -> usize {
        self.displacement.dim()
    }
}

/// `Σ_k w_k A_k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovariantPolynomial {
    pub terms: Vec<(Complex64, CovariantMonomial)>,
}

impl CovariantPolynomial {
    pub fn monomial(a: CovariantMonomial) -> Self {
        CovariantPolynomial { terms: vec![(Complex64::new(1.0, 0.0), a)] }
    }

    pub fn identity(d: usize) -> Self {
        Self::monomial(CovariantMonomial::identity(d))
    }

    /// `∂_ν H = i[R_ν, H]` for `H = λ·adjacency + V`:
    /// `⟨x|∂_ν H|y⟩ = iλ(x_ν - y_ν)` on nearest neighbours.
    pub fn velocity(d: usize, nu: usize, lambda: f64) -> Result<Self> {
        if nu >= d {
            return Err(Error::InvalidArgument(format!("velocity direction {nu} in dimension {d}")));
        }
        Ok(CovariantPolynomial {
            terms: vec![
                (Complex64::new(0.0, -lambda), CovariantMonomial::shift(Site::unit(d, nu, 1))),
                (Complex64::new(0.0, lambda), CovariantMonomial::shift(Site::unit(d, nu, -1))),
            ],
        })
    }

    pub fn scaled(&self, c: Complex64) -> Self {
        CovariantPolynomial { terms: self.terms.iter().map(|(w, a)| (w * c, a.clone())).collect() }
    }

    /// `Σ_k |w_k| Π sup_{ℬ_r} |a|`, bounding the contribution of this
    /// observable to any site density.
    pub fn sup_norm(&self, r: f64) -> f64 {
        self.terms
            .iter()
            .map(|(w, a)| w.norm() * a.coefficients.values().map(|c| c.sup_norm(r)).product::<f64>())
            .sum()
    }

    /// As `sup_norm`, with sup-norms taken on the real line.
    pub fn real_sup_norm(&self) -> f64 {
        self.terms
            .iter()
            .map(|(w, a)| w.norm() * a.coefficients.values().map(|c| c.real_derivative_sup(0).min(c.sup_norm(0.0))).product::<f64>())
            .sum()
    }

    /// Smallest admissible strip half-width among the coefficients.
    pub fn admissible_radius(&self) -> f64 {
        self.terms
            .iter()
            .flat_map(|(_, a)| a.coefficients.values())
            .map(|c| c.admissible_radius())
            .fold(f64::INFINITY, f64::min)
    }
}

/// `⟨x|A|y⟩` for a given potential configuration.
pub fn matrix_element(a: &CovariantMonomial, potentials: &BTreeMap<Site, f64>, x: Site, y: Site) -> Result<Complex64> {
    if y - x != a.displacement {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let mut out = Complex64::new(1.0, 0.0);
    for (&w, coef) in &a.coefficients {
        let site = x + w;
        let v = potentials.get(&site).ok_or_else(|| Error::MissingPotential(site.coords().to_vec()))?;
        out *= coef.value(Complex64::new(*v, 0.0));
    }
    Ok(out)
}

pub fn polynomial_element(p: &CovariantPolynomial, potentials: &BTreeMap<Site, f64>, x: Site, y: Site) -> Result<Complex64> {
    let mut out = Complex64::new(0.0, 0.0);
    for (w, a) in &p.terms {
        out += w * matrix_element(a, potentials, x, y)?;
    }
    Ok(out)
}

/// `v ↦ g(v) Π_j a_j(v)`, as a strip function.
#[derive(Debug, Clone)]
pub struct SiteDensity<'a> {
    g: &'a AnalyticDensity,
    coefficients: Vec<CoefficientFn>,
    radius: f64,
    norm: f64,
}

impl<'a> SiteDensity<'a> {
    pub fn new(g: &'a AnalyticDensity, mut coefficients: Vec<CoefficientFn>) -> Result<Self> {
        coefficients.sort();
        let radius = coefficients.iter().map(|c| c.admissible_radius()).fold(g.strip_radius(), f64::min);
        let g_norm = if radius < g.strip_radius() { g.norm_r(radius)? } else { g.norm() };
        let norm = coefficients.iter().map(|c| c.sup_norm(radius)).product::<f64>() * g_norm;
        Ok(SiteDensity { g, coefficients, radius, norm })
    }

    pub fn coefficients(&self) -> &[CoefficientFn] {
        &self.coefficients
    }

    pub fn is_bare(&self) -> bool {
        self.coefficients.iter().all(|c| *c == CoefficientFn::Constant(1.0))
    }

    fn constant_factor(&self) -> Option<f64> {
        self.coefficients.iter().all(|c| c.is_constant()).then(|| {
            self.coefficients
                .iter()
                .map(|c| match c {
                    CoefficientFn::Constant(v) => *v,
                    _ => unreachable!(),
                })
                .product()
        })
    }
}

impl StripFunction for SiteDensity<'_> {
    fn strip_radius(&self) -> f64 {
        self.radius
    }

    fn value(&self, z: Complex64) -> Complex64 {
        self.coefficients.iter().fold(self.g.value(z), |acc, c| acc * c.value(z))
    }

    fn derivative(&self, n: usize, z: Complex64) -> Complex64 {
        if let Some(c) = self.constant_factor() {
            return self.g.derivative(n, z) * c;
        }
        // generalised Leibniz rule, one factor at a time
        let mut acc: Vec<Complex64> = (0..=n).map(|k| self.g.derivative(k, z)).collect();
        for c in &self.coefficients {
            let da: Vec<Complex64> = (0..=n).map(|k| c.derivative(k, z)).collect();
            acc = (0..=n)
                .map(|k| (0..=k).map(|j| acc[j] * da[k - j] * binomial(k, j)).sum())
                .collect();
        }
        acc[n]
    }

    fn tail_mass(&self, m: usize, cut: f64) -> f64 {
        // Σ_j C(m,j) sup|(Π a)^{(m-j)}| ∫_{|v|>cut} |g^{(j)}|
        let mut sup: Vec<f64> = vec![0.0; m + 1];
        sup[0] = 1.0;
        for c in &self.coefficients {
            let da: Vec<f64> = (0..=m).map(|k| c.real_derivative_sup(k)).collect();
            sup = (0..=m).map(|k| (0..=k).map(|j| sup[j] * da[k - j] * binomial(k, j)).sum()).collect();
        }
        (0..=m).map(|j| binomial(m, j) * sup[m - j] * self.g.tail_mass(j, cut)).sum()
    }

    fn line_tail_mass(&self, y: f64, cut: f64) -> f64 {
        let sup: f64 = self.coefficients.iter().map(|c| c.sup_norm(y.abs())).product();
        sup * self.g.line_tail_mass(y, cut)
    }

    fn width(&self) -> f64 {
        self.g.width()
    }

    fn norm_bound(&self) -> f64 {
        self.norm
    }
}

fn binomial(n: usize, k: usize) -> f64 {
    factorial(n) / (factorial(k) * factorial(n - k))
}

/// The coefficients attached at site `u` by a family: walk `i` contributes
/// `a_{i, u - end(γ_i)}`.
pub fn attached_coefficients(family: &NPathFamily, monomials: &[&CovariantMonomial], u: Site) -> Vec<CoefficientFn> {
    let mut out = Vec::new();
    for (walk, a) in family.walks().iter().zip(monomials) {
        if let Some(c) = a.coefficients.get(&(u - walk.end())) {
            out.push(*c);
        }
    }
    out
}

/// Sites carrying at least one attached coefficient.
pub fn coefficient_sites(family: &NPathFamily, monomials: &[&CovariantMonomial]) -> Vec<Site> {
    let mut sites: Vec<Site> = family
        .walks()
        .iter()
        .zip(monomials)
        .flat_map(|(w, a)| a.coefficients.keys().map(move |&k| w.end() + k))
        .collect();
    sites.sort();
    sites.dedup();
    sites
}

/// `g_{Γ,u}(v) = g(v) Π_i a_{i, u - end(γ_i)}(v)`.
pub fn assemble_site_density<'a>(
    g: &'a AnalyticDensity,
    family: &NPathFamily,
    monomials: &[&CovariantMonomial],
    u: Site,
) -> Result<SiteDensity<'a>> {
    if monomials.len() != family.n_walks() {
        return Err(Error::InvalidArgument("one monomial per walk is required".into()));
    }
    for (a, off) in monomials.iter().zip(family.offsets()) {
        if a.displacement != *off {
            return Err(Error::InvalidArgument(format!("family offset {off} does not match monomial {}", a.displacement)));
        }
    }
    SiteDensity::new(g, attached_coefficients(family, monomials, u))
}

/// Observable specification used by the CLI and config files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ObservableSpec {
    Identity,
    Velocity { nu: usize },
    Monomial { displacement: Vec<i32>, coefficients: Vec<(Vec<i32>, CoefficientFn)> },
}

impl ObservableSpec {
    pub fn to_polynomial(&self, d: usize, lambda: f64) -> Result<CovariantPolynomial> {
        match self {
            ObservableSpec::Identity => Ok(CovariantPolynomial::identity(d)),
            ObservableSpec::Velocity { nu } => CovariantPolynomial::velocity(d, *nu, lambda),
            ObservableSpec::Monomial { displacement, coefficients } => {
                let site = |c: &Vec<i32>| {
                    if c.len() != d {
                        Err(Error::InvalidArgument(format!("site {c:?} is not in dimension {d}")))
                    } else {
                        Ok(Site::new(c))
                    }
                };
                let mut a = CovariantMonomial::shift(site(displacement)?);
                for (at, c) in coefficients {
                    a = a.with_coefficient(site(at)?, *c);
                }
                Ok(CovariantPolynomial::monomial(a))
            }
        }
    }
}

fn split_top_level(s: &str) -> Vec<&str> {
    let mut parts = Vec::new();
    let mut depth = 0i32;
    let mut start = 0;
    for (i, ch) in s.char_indices() {
        match ch {
            '(' => depth += 1,
            ')' => depth -= 1,
            ',' if depth == 0 => {
                parts.push(&s[start..i]);
                start = i + 1;
            }
            _ => {}
        }
    }
    parts.push(&s[start..]);
    parts
}

fn fmt_site(c: &[i32]) -> String {
    let parts: Vec<String> = c.iter().map(|x| x.to_string()).collect();
    format!("({})", parts.join(","))
}

impl fmt::Display for ObservableSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ObservableSpec::Identity => write!(f, "identity"),
            ObservableSpec::Velocity { nu } => write!(f, "velocity:nu={nu}"),
            ObservableSpec::Monomial { displacement, coefficients } => {
                write!(f, "monomial:u0={}", fmt_site(displacement))?;
                for (at, c) in coefficients {
                    write!(f, ",coef@{}={c}", fmt_site(at))?;
                }
                Ok(())
            }
        }
    }
}

impl FromStr for ObservableSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "identity" {
            return Ok(ObservableSpec::Identity);
        }
        if let Some(rest) = s.strip_prefix("velocity:") {
            let nu = rest
                .trim()
                .strip_prefix("nu=")
                .and_then(|v| v.trim().parse().ok())
                .ok_or_else(|| Error::Parse(format!("expected velocity:nu=<axis>, got {s:?}")))?;
            return Ok(ObservableSpec::Velocity { nu });
        }
        let Some(rest) = s.strip_prefix("monomial:") else {
            return Err(Error::Parse(format!("unknown observable {s:?}")));
        };
        let parse_site = |t: &str| t.parse::<Site>().map(|x| x.coords().to_vec());
        let mut displacement = None;
        let mut coefficients = Vec::new();
        for part in split_top_level(rest) {
            let (key, value) = part
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("expected key=value in {part:?}")))?;
            let key = key.trim();
            if key == "u0" {
                displacement = Some(parse_site(value)?);
            } else if let Some(at) = key.strip_prefix("coef@") {
                coefficients.push((parse_site(at)?, value.parse()?));
            } else {
                return Err(Error::Parse(format!("unknown monomial field {key:?}")));
            }
        }
        let displacement = displacement.ok_or_else(|| Error::Parse(format!("monomial without u0 in {s:?}")))?;
        if coefficients.iter().any(|(c, _)| c.len() != displacement.len()) {
            return Err(Error::Parse(format!("mixed dimensions in {s:?}")));
        }
        Ok(ObservableSpec::Monomial { displacement, coefficients })
    }
}
