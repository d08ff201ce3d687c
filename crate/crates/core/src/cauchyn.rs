//! N-point Cauchy-type integrals
//! `J_n(g; z) = ∫ g(v) Π_k (v - z_k)^{-(n_k+1)} dv`, their boundary values
//! on the real axis, and the simplex representation behind them.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::fmt;
use std::ops::{Add, Index, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::cauchy1::{i0_boundary, pole_product_integral, pv_real_part, HalfPlaneSign};
use crate::densities::{factorial, Derivative, StripFunction};
use crate::error::{Error, Result};
use crate::quad::gauss_legendre;

/// Tuple of non-negative integers with the usual multi-index conventions.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MultiIndex(pub Vec<usize>);

impl MultiIndex {
    pub fn new(entries: Vec<usize>) -> Self {
        MultiIndex(entries)
    }

    pub fn zeros(len: usize) -> Self {
        MultiIndex(vec![0; len])
    }

    /// `f = (1, …, 1)`.
    pub fn ones(len: usize) -> Self {
        MultiIndex(vec![1; len])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// `|n| = Σ n_k`.
    pub fn abs(&self) -> usize {
        self.0.iter().sum()
    }

    /// `n! = Π n_k!`.
    pub fn factorial(&self) -> f64 {
        self.0.iter().map(|&k| factorial(k)).product()
    }

    /// `s^n = Π s_k^{n_k}`.
    pub fn monomial(&self, s: &[f64]) -> f64 {
        self.0.iter().zip(s).map(|(&k, &x)| x.powi(k as i32)).product()
    }

    /// Componentwise difference, `None` if an entry would go negative.
    pub fn checked_sub(&self, other: &MultiIndex) -> Option<MultiIndex> {
        assert_eq!(self.len(), other.len(), "multi-index length mismatch");
        self.0.iter().zip(&other.0).map(|(a, b)| a.checked_sub(*b)).collect::<Option<Vec<_>>>().map(MultiIndex)
    }

    pub fn iter(&self) -> std::slice::Iter<'_, usize> {
        self.0.iter()
    }
}

impl Index<usize> for MultiIndex {
    type Output = usize;
    fn index(&self, i: usize) -> &usize {
        &self.0[i]
    }
}

impl Add for &MultiIndex {
    type Output = MultiIndex;
    fn add(self, rhs: &MultiIndex) -> MultiIndex {
        assert_eq!(self.len(), rhs.len(), "multi-index length mismatch");
        MultiIndex(self.0.iter().zip(&rhs.0).map(|(a, b)| a + b).collect())
    }
}

impl Sub for &MultiIndex {
    type Output = MultiIndex;
    fn sub(self, rhs: &MultiIndex) -> MultiIndex {
        self.checked_sub(rhs).expect("multi-index subtraction went negative")
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|k| k.to_string()).collect();
        write!(f, "({})", parts.join(","))
    }
}

/// All `m` of length `len` with `|m| = total`, in lexicographic order
/// (stars and bars).
#[derive(Debug, Clone)]
pub struct Compositions {
    current: Option<Vec<usize>>,
}

impl Compositions {
    pub fn new(len: usize, total: usize) -> Self {
        if len == 0 {
            return Compositions { current: if total == 0 { Some(Vec::new()) } else { None } };
        }
        let mut first = vec![0; len];
        first[len - 1] = total;
        Compositions { current: Some(first) }
    }
}

impl Iterator for Compositions {
    type Item = MultiIndex;

    fn next(&mut self) -> Option<MultiIndex> {
        let out = self.current.take()?;
        let len = out.len();
        let mut next = out.clone();
        let mut tail = 0;
        for i in (0..len.saturating_sub(1)).rev() {
            tail += next[i + 1];
            if tail > 0 {
                next[i] += 1;
                for x in next[i + 1..].iter_mut() {
                    *x = 0;
                }
                next[len - 1] = tail - 1;
                self.current = Some(next);
                break;
            }
        }
        Some(MultiIndex(out))
    }
}

/// Vector of half-plane signs, one per energy.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SignVector(pub Vec<HalfPlaneSign>);

impl SignVector {
    pub fn uniform(sign: HalfPlaneSign, len: usize) -> Self {
        SignVector(vec![sign; len])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn flip(&self) -> Self {
        SignVector(self.0.iter().map(|s| s.flip()).collect())
    }

    /// Common sign if all entries agree.
    pub fn common(&self) -> Option<HalfPlaneSign> {
        let first = *self.0.first()?;
        self.0.iter().all(|&s| s == first).then_some(first)
    }
}

impl std::str::FromStr for SignVector {
    type Err = Error;

    /// Parses patterns such as `+-` or `+,-`.
    fn from_str(s: &str) -> Result<Self> {
        let signs = s
            .chars()
            .filter(|c| !c.is_whitespace() && *c != ',')
            .map(|c| HalfPlaneSign::from_char(c).ok_or_else(|| Error::Parse(format!("bad sign {c:?} in {s:?}"))))
            .collect::<Result<Vec<_>>>()?;
        if signs.is_empty() {
            return Err(Error::Parse("empty sign pattern".into()));
        }
        Ok(SignVector(signs))
    }
}

impl fmt::Display for SignVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in &self.0 {
            f.write_str(match s {
                HalfPlaneSign::Plus => "+",
                HalfPlaneSign::Minus => "-",
            })?;
        }
        Ok(())
    }
}

/// Real energies together with their minimal pairwise gap.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyVector {
    entries: Vec<f64>,
    min_gap: f64,
}

impl EnergyVector {
    pub fn new(entries: Vec<f64>) -> Self {
        let mut min_gap = f64::INFINITY;
        for i in 0..entries.len() {
            for j in i + 1..entries.len() {
                min_gap = min_gap.min((entries[i] - entries[j]).abs());
            }
        }
        EnergyVector { entries, min_gap }
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// `+inf` for a single energy.
    pub fn min_gap(&self) -> f64 {
        self.min_gap
    }

    pub fn is_distinct(&self) -> bool {
        self.min_gap > 0.0
    }

    pub fn check_distinct(&self) -> Result<()> {
        first_coincidence(&self.entries.iter().map(|&e| Complex64::new(e, 0.0)).collect::<Vec<_>>())
    }
}

fn first_coincidence(z: &[Complex64]) -> Result<()> {
    for i in 0..z.len() {
        for j in i + 1..z.len() {
            if z[i] == z[j] {
                return Err(Error::CoincidentPoints(i, j));
            }
        }
    }
    Ok(())
}

fn binomial(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// The partial-fraction weight
/// `Π_{j≠i} (-1)^{m_j} C(m_j+n_j, m_j) (z_i - z_j)^{-(m_j+n_j+1)} / m_i!`.
fn gap_weight(n: &MultiIndex, m: &MultiIndex, z: &[Complex64], i: usize) -> Complex64 {
    let mut w = Complex64::new(1.0 / factorial(m[i]), 0.0);
    for j in 0..z.len() {
        if j == i {
            continue;
        }
        let sign = if m[j].is_multiple_of(2) { 1.0 } else { -1.0 };
        let c = sign * binomial(m[j] + n[j], m[j]);
        w *= c * (z[i] - z[j]).powi(-((m[j] + n[j] + 1) as i32));
    }
    w
}

/// Sum over `i` and `|m| = n_i` of `gap_weight · base(i, m_i)`.
fn partial_fraction_sum(
    n: &MultiIndex,
    z: &[Complex64],
    mut base: impl FnMut(usize, usize) -> Complex64,
) -> Complex64 {
    let mut cache: HashMap<(usize, usize), Complex64> = HashMap::new();
    let mut total = Complex64::new(0.0, 0.0);
    for i in 0..z.len() {
        for m in Compositions::new(z.len(), n[i]) {
            let b = *cache.entry((i, m[i])).or_insert_with(|| base(i, m[i]));
            total += gap_weight(n, &m, z, i) * b;
        }
    }
    total
}

fn check_shape(n: &MultiIndex, len: usize) -> Result<()> {
    if n.len() != len || len == 0 {
        return Err(Error::InvalidArgument(format!("multi-index {n} does not match {len} points")));
    }
    Ok(())
}

/// `J_n(g; z)` by direct quadrature of the pole product against `g`.
pub fn j_n<F: StripFunction + ?Sized>(g: &F, n: &MultiIndex, z: &[Complex64]) -> Result<Complex64> {
    check_shape(n, z.len())?;
    if z.iter().any(|w| w.im == 0.0) {
        return Err(Error::RealAxisInput);
    }
    let poles: Vec<(Complex64, i32)> = z.iter().zip(n.iter()).map(|(&w, &k)| (w, k as i32 + 1)).collect();
    Ok(pole_product_integral(g, 0, &poles))
}

/// `J_n(g; z)` through the partial-fraction expansion into one-point
/// integrals `I_0(g^{(m)}; z_i)`.
pub fn j_partial_fraction<F: StripFunction + ?Sized>(g: &F, n: &MultiIndex, z: &[Complex64]) -> Result<Complex64> {
    check_shape(n, z.len())?;
    if z.iter().any(|w| w.im == 0.0) {
        return Err(Error::RealAxisInput);
    }
    first_coincidence(z)?;
    Ok(partial_fraction_sum(n, z, |i, m| pole_product_integral(g, m, &[(z[i], 1)])))
}

/// Boundary value `J_n^σ(g; E)` assembled from gap powers and the
/// one-point boundary values `I_0^{σ_i}(g^{(m)}; E_i)`.
pub fn j_sigma_direct<F: StripFunction + ?Sized>(
    g: &F,
    n: &MultiIndex,
    sigma: &SignVector,
    e: &EnergyVector,
) -> Result<Complex64> {
    check_shape(n, e.len())?;
    check_signs(sigma, e)?;
    e.check_distinct()?;
    let z: Vec<Complex64> = e.entries().iter().map(|&x| Complex64::new(x, 0.0)).collect();
    Ok(partial_fraction_sum(n, &z, |i, m| {
        i0_boundary(&Derivative { base: g, order: m }, sigma.0[i], e.entries()[i])
    }))
}

fn check_signs(sigma: &SignVector, e: &EnergyVector) -> Result<()> {
    if sigma.len() != e.len() {
        return Err(Error::InvalidArgument(format!("{} signs for {} energies", sigma.len(), e.len())));
    }
    Ok(())
}

/// The singular part `Σ_k σ_k S_k` where `S_k` collects the point values
/// `g^{(m_k)}(E_k)/m_k!` weighted by the gap powers.
pub fn singular_part<F: StripFunction + ?Sized>(
    g: &F,
    n: &MultiIndex,
    sigma: &SignVector,
    e: &EnergyVector,
) -> Result<Complex64> {
    check_shape(n, e.len())?;
    check_signs(sigma, e)?;
    e.check_distinct()?;
    let z: Vec<Complex64> = e.entries().iter().map(|&x| Complex64::new(x, 0.0)).collect();
    Ok(partial_fraction_sum(n, &z, |i, m| g.derivative(m, z[i]) * sigma.0[i].value()))
}

/// Boundary value `J_n^σ = J_reg + iπ Σ_k σ_k S_k`. When all signs agree the
/// singular sum is replaced by the simplex residue `±R_n`, which also
/// covers coincident energies.
pub fn j_sigma_decomposed<F: StripFunction + ?Sized>(
    g: &F,
    n: &MultiIndex,
    sigma: &SignVector,
    e: &EnergyVector,
) -> Result<Complex64> {
    check_shape(n, e.len())?;
    check_signs(sigma, e)?;
    let reg = j_reg(g, n, e)?;
    let sing = match sigma.common() {
        Some(s) if !e.is_distinct() => residue_part(g, n, e)? * s.value(),
        _ => singular_part(g, n, sigma, e)?,
    };
    Ok(reg + Complex64::new(0.0, PI) * sing)
}

/// Regular part: `∫_Δ (s^n/n!) PV[g^{(N+|n|-1)}](Σ s_k E_k) ds`, where PV is
/// the principal-value integral `∫_0^∞ (h(x+u) - h(x-u))/u du`.
pub fn j_reg<F: StripFunction + ?Sized>(g: &F, n: &MultiIndex, e: &EnergyVector) -> Result<Complex64> {
    check_shape(n, e.len())?;
    let order = e.len() + n.abs() - 1;
    let nf = n.factorial();
    let energies = e.entries();
    // the integrand depends on s only through x = Σ s_k E_k ∈ [min E, max E]
    let lo = energies.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = energies.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let pv = Chebyshev::fit(|x| pv_real_part(g, order, x), lo, hi);
    Ok(simplex_quadrature(e.len(), |s| {
        let x: f64 = s.iter().zip(energies).map(|(a, b)| a * b).sum();
        Complex64::new(n.monomial(s) / nf * pv.eval(x), 0.0)
    }))
}

/// Chebyshev interpolant on `[a, b]`; the degree doubles from 16 until the
/// trailing coefficients fall below `1e-15` of the largest.
struct Chebyshev {
    a: f64,
    b: f64,
    coeffs: Vec<f64>,
}

impl Chebyshev {
    fn fit(f: impl Fn(f64) -> f64, a: f64, b: f64) -> Self {
        if b - a <= f64::EPSILON * a.abs().max(b.abs()).max(1.0) {
            return Chebyshev { a, b, coeffs: vec![f(0.5 * (a + b))] };
        }
        let mut n = 16;
        loop {
            // Chebyshev points of the first kind
            let values: Vec<f64> = (0..n)
                .map(|k| {
                    let t = (PI * (k as f64 + 0.5) / n as f64).cos();
                    f(0.5 * (a + b) + 0.5 * (b - a) * t)
                })
                .collect();
            let coeffs: Vec<f64> = (0..n)
                .map(|j| {
                    let sum: f64 = values
                        .iter()
                        .enumerate()
                        .map(|(k, v)| v * (PI * j as f64 * (k as f64 + 0.5) / n as f64).cos())
                        .sum();
                    sum * if j == 0 { 1.0 } else { 2.0 } / n as f64
                })
                .collect();
            let scale = coeffs.iter().fold(0.0f64, |m, c| m.max(c.abs()));
            let tail = coeffs[n - 4..].iter().fold(0.0f64, |m, c| m.max(c.abs()));
            if tail <= 1e-15 * scale.max(1e-300) || n >= 1024 {
                return Chebyshev { a, b, coeffs };
            }
            n *= 2;
        }
    }

    fn eval(&self, x: f64) -> f64 {
        if self.coeffs.len() == 1 {
            return self.coeffs[0];
        }
        let t = ((2.0 * x - self.a - self.b) / (self.b - self.a)).clamp(-1.0, 1.0);
        let (mut b1, mut b2) = (0.0, 0.0);
        for &c in self.coeffs[1..].iter().rev() {
            let b0 = 2.0 * t * b1 - b2 + c;
            b2 = b1;
            b1 = b0;
        }
        t * b1 - b2 + self.coeffs[0]
    }
}

/// `R_n(g; E) = ∫_Δ (s^n/n!) g^{(N+|n|-1)}(Σ s_k E_k) ds`.
pub fn residue_part<F: StripFunction + ?Sized>(g: &F, n: &MultiIndex, e: &EnergyVector) -> Result<Complex64> {
    check_shape(n, e.len())?;
    let order = e.len() + n.abs() - 1;
    let nf = n.factorial();
    let energies = e.entries();
    Ok(simplex_quadrature(e.len(), |s| {
        let x: f64 = s.iter().zip(energies).map(|(a, b)| a * b).sum();
        g.derivative(order, Complex64::new(x, 0.0)) * (n.monomial(s) / nf)
    }))
}

const SIMPLEX_TOL: f64 = 1e-10;
const SIMPLEX_START: usize = 32;
const SIMPLEX_MAX_POINTS: usize = 1 << 21;

/// Integral over the simplex `{s ∈ [0,1]^N : |s| = 1}` with respect to
/// `ds_1 … ds_{N-1}`. The simplex is mapped onto the cube through
/// `s_1 = t_1, s_2 = t_2(1-t_1), …`; a tensor Gauss–Legendre rule is doubled
/// per axis until two successive values agree to 1e-10.
pub fn simplex_quadrature<F>(dim: usize, f: F) -> Complex64
where
    F: Fn(&[f64]) -> Complex64,
{
    assert!(dim >= 1, "simplex dimension must be positive");
    if dim == 1 {
        return f(&[1.0]);
    }
    let mut order = SIMPLEX_START;
    let (mut prev, _) = tensor_simplex(dim, order, &f);
    loop {
        let next_order = 2 * order;
        if next_order.pow(dim as u32 - 1) > SIMPLEX_MAX_POINTS {
            return prev;
        }
        // agreement is measured against ∫|f|, so exact cancellations terminate
        let (next, mass) = tensor_simplex(dim, next_order, &f);
        if (next - prev).norm() <= SIMPLEX_TOL * mass {
            return next;
        }
        prev = next;
        order = next_order;
    }
}

fn tensor_simplex<F>(dim: usize, order: usize, f: &F) -> (Complex64, f64)
where
    F: Fn(&[f64]) -> Complex64,
{
    let (nodes, weights) = gauss_legendre(order);
    let axes = dim - 1;
    let mut idx = vec![0usize; axes];
    let mut s = vec![0.0; dim];
    let mut total = Complex64::new(0.0, 0.0);
    let mut mass = 0.0;
    loop {
        let mut rest = 1.0;
        let mut w = 1.0;
        for (k, &i) in idx.iter().enumerate() {
            let t = nodes[i];
            s[k] = t * rest;
            w *= weights[i] * rest;
            rest *= 1.0 - t;
        }
        s[axes] = rest;
        let v = f(&s) * w;
        total += v;
        mass += v.norm();

        let mut k = 0;
        while k < axes {
            idx[k] += 1;
            if idx[k] < order {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
        if k == axes {
            return (total, mass);
        }
    }
}

/// Both sides of the simplex identity
/// `Π (v - z_k)^{-(n_k+1)} = ((N+|n|-1)!/n!) ∫_Δ s^n (v - Σ s_k z_k)^{-(N+|n|)} ds`.
pub fn simplex_pole_product(n: &MultiIndex, z: &[Complex64], v: Complex64) -> Result<(Complex64, Complex64)> {
    check_shape(n, z.len())?;
    if in_convex_hull(z, v) {
        return Err(Error::ConvexHullViolation(format!("{v}")));
    }
    let lhs = z.iter().zip(n.iter()).fold(Complex64::new(1.0, 0.0), |acc, (&w, &k)| acc * (v - w).powi(-(k as i32 + 1)));
    let power = (z.len() + n.abs()) as i32;
    let scale = factorial(z.len() + n.abs() - 1) / n.factorial();
    let rhs = simplex_quadrature(z.len(), |s| {
        let w: Complex64 = s.iter().zip(z).map(|(a, b)| b * a).sum();
        (v - w).powi(-power) * n.monomial(s)
    }) * scale;
    Ok((lhs, rhs))
}

/// Whether `v` lies in the closed convex hull of `points`: it does unless all
/// `points - v` fit in an open half-plane, i.e. unless some angular gap
/// between them exceeds π.
pub fn in_convex_hull(points: &[Complex64], v: Complex64) -> bool {
    if points.contains(&v) {
        return true;
    }
    let mut angles: Vec<f64> = points.iter().map(|&p| (p - v).arg()).collect();
    angles.sort_by(f64::total_cmp);
    let mut max_gap = angles[0] + 2.0 * PI - angles[angles.len() - 1];
    for w in angles.windows(2) {
        max_gap = max_gap.max(w[1] - w[0]);
    }
    max_gap <= PI
}

fn checked_binomial(n: usize, k: usize) -> Result<u128> {
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // acc * (n - i) / (i + 1) stays integral at each step
        acc = acc.checked_mul((n - i) as u128).ok_or(Error::Overflow("binomial coefficient"))? / (i as u128 + 1);
    }
    Ok(acc)
}

/// `Σ_{|m| = r} Π_k (m_k+n_k)!/(m_k! n_k!)` by enumeration.
pub fn restricted_multiindex_sum(n: &MultiIndex, r: usize) -> Result<u128> {
    if n.is_empty() {
        return Err(Error::InvalidArgument("empty multi-index".into()));
    }
    let mut total: u128 = 0;
    for m in Compositions::new(n.len(), r) {
        let mut term: u128 = 1;
        for k in 0..n.len() {
            term = term.checked_mul(checked_binomial(m[k] + n[k], m[k])?).ok_or(Error::Overflow("restricted sum"))?;
        }
        total = total.checked_add(term).ok_or(Error::Overflow("restricted sum"))?;
    }
    Ok(total)
}

/// `(r+|n|+L-1)! / (r! (|n|+L-1)!)`, the closed form of the restricted sum.
pub fn restricted_multiindex_closed_form(n: &MultiIndex, r: usize) -> Result<u128> {
    if n.is_empty() {
        return Err(Error::InvalidArgument("empty multi-index".into()));
    }
    checked_binomial(r + n.abs() + n.len() - 1, r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cauchy1::{i_n, in_boundary};
    use crate::densities::AnalyticDensity;
    use crate::quad;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn mi(v: &[usize]) -> MultiIndex {
        MultiIndex(v.to_vec())
    }

    fn sv(s: &str) -> SignVector {
        s.parse().unwrap()
    }

    fn close(a: Complex64, b: Complex64, tol: f64) -> bool {
        (a - b).norm() <= tol * (1.0 + b.norm())
    }

    fn gauss() -> AnalyticDensity {
        AnalyticDensity::gaussian(1.0, 1.0).unwrap()
    }

    fn cauchy_i0_plus(e: f64) -> Complex64 {
        -Complex64::new(1.0, 0.0) / c(e, 1.0)
    }

    #[test]
    fn compositions_are_lexicographic() {
        let all: Vec<Vec<usize>> = Compositions::new(3, 2).map(|m| m.0).collect();
        assert_eq!(
            all,
            vec![vec![0, 0, 2], vec![0, 1, 1], vec![0, 2, 0], vec![1, 0, 1], vec![1, 1, 0], vec![2, 0, 0]]
        );
        assert_eq!(Compositions::new(1, 4).count(), 1);
        assert_eq!(Compositions::new(4, 0).count(), 1);
        assert_eq!(Compositions::new(4, 3).count(), 20);
    }

    #[test]
    fn multiindex_arithmetic() {
        let a = mi(&[2, 0, 3]);
        assert_eq!(a.abs(), 5);
        assert_eq!(a.factorial(), 12.0);
        assert_eq!(&a - &mi(&[1, 0, 1]), mi(&[1, 0, 2]));
        assert_eq!(a.checked_sub(&mi(&[0, 1, 0])), None);
        assert_eq!(&a + &MultiIndex::ones(3), mi(&[3, 1, 4]));
        assert!((a.monomial(&[0.5, 0.3, 2.0]) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn energy_vector_gap() {
        let e = EnergyVector::new(vec![0.0, 1.5, -0.25]);
        assert!((e.min_gap() - 0.25).abs() < 1e-15);
        assert!(e.is_distinct());
        assert!(!EnergyVector::new(vec![1.0, 1.0]).is_distinct());
        assert_eq!(EnergyVector::new(vec![3.0]).min_gap(), f64::INFINITY);
    }

    #[test]
    fn single_point_reduces_to_one_point_integrals() {
        let g = gauss();
        let z = c(0.3, 0.4);
        for n in 0..3 {
            let a = j_n(&g, &mi(&[n]), &[z]).unwrap();
            assert_eq!(a, i_n(&g, n, z).unwrap());
            let b = j_sigma_direct(&g, &mi(&[n]), &sv("+"), &EnergyVector::new(vec![0.7])).unwrap();
            assert!(close(b, in_boundary(&g, n, HalfPlaneSign::Plus, 0.7), 1e-12));
        }
    }

    #[test]
    fn two_point_cauchy_closed_form() {
        let g = AnalyticDensity::cauchy(1.0, 0.9).unwrap();
        let z = [c(0.0, 1.0), c(0.0, 2.0)];
        let i0 = |w: Complex64| -Complex64::new(1.0, 0.0) / (w + c(0.0, 1.0));
        let expected = i0(z[0]) / (z[0] - z[1]) + i0(z[1]) / (z[1] - z[0]);
        let direct = j_n(&g, &mi(&[0, 0]), &z).unwrap();
        let pf = j_partial_fraction(&g, &mi(&[0, 0]), &z).unwrap();
        assert!(close(direct, expected, 1e-10), "{direct} {expected}");
        assert!(close(pf, expected, 1e-10), "{pf} {expected}");

        let e = EnergyVector::new(vec![0.0, 1.0]);
        let b = j_sigma_direct(&g, &mi(&[0, 0]), &sv("++"), &e).unwrap();
        let want = cauchy_i0_plus(0.0) / (0.0 - 1.0) + cauchy_i0_plus(1.0) / (1.0 - 0.0);
        assert!(close(b, want, 1e-10), "{b} {want}");
    }

    #[test]
    fn partial_fractions_match_direct_quadrature() {
        let g = gauss();
        let cases: Vec<(MultiIndex, Vec<Complex64>)> = vec![
            (mi(&[0, 0]), vec![c(0.2, 0.5), c(-0.4, -0.3)]),
            (mi(&[1, 2]), vec![c(0.2, 0.5), c(1.1, 0.3)]),
            (mi(&[1, 0, 0]), vec![c(0.0, 1.0), c(0.0, 2.0), c(0.0, 3.0)]),
            (mi(&[2, 1, 0]), vec![c(-1.0, 0.4), c(0.5, -0.6), c(1.5, 0.3)]),
            (mi(&[0, 0]), vec![c(0.3, 0.4), c(0.3, -0.4)]),
        ];
        for (n, z) in cases {
            let d = j_n(&g, &n, &z).unwrap();
            let p = j_partial_fraction(&g, &n, &z).unwrap();
            assert!(close(p, d, 1e-9), "n={n}: {p} vs {d}");
        }
    }

    #[test]
    fn coincident_and_real_points_are_rejected() {
        let g = gauss();
        let z = [c(0.1, 0.2), c(0.1, 0.2)];
        assert_eq!(j_partial_fraction(&g, &mi(&[0, 0]), &z), Err(Error::CoincidentPoints(0, 1)));
        assert_eq!(j_n(&g, &mi(&[0, 0]), &[c(0.0, 1.0), c(1.0, 0.0)]), Err(Error::RealAxisInput));
        let e = EnergyVector::new(vec![0.5, 0.5]);
        assert_eq!(j_sigma_direct(&g, &mi(&[0, 0]), &sv("+-"), &e), Err(Error::CoincidentPoints(0, 1)));
        assert!(matches!(j_sigma_decomposed(&g, &mi(&[0, 0]), &sv("+-"), &e), Err(Error::CoincidentPoints(..))));
        // equal signs only need the regular objects
        assert!(j_sigma_decomposed(&g, &mi(&[0, 0]), &sv("++"), &e).is_ok());
    }

    #[test]
    fn boundary_routes_agree() {
        let g = gauss();
        let cases: Vec<(MultiIndex, &str, Vec<f64>)> = vec![
            (mi(&[0, 0]), "+-", vec![0.0, 0.8]),
            (mi(&[1, 0]), "++", vec![-0.5, 0.6]),
            (mi(&[1, 2]), "-+", vec![0.3, -0.9]),
            (mi(&[0, 0, 0]), "+-+", vec![-1.0, 0.0, 1.0]),
            (mi(&[1, 1, 1]), "--+", vec![-0.6, 0.2, 1.4]),
        ];
        for (n, s, e) in cases {
            let e = EnergyVector::new(e);
            let a = j_sigma_direct(&g, &n, &sv(s), &e).unwrap();
            let b = j_sigma_decomposed(&g, &n, &sv(s), &e).unwrap();
            assert!(close(b, a, 1e-8), "n={n} σ={s}: {a} vs {b}");
        }
    }

    #[test]
    fn mixed_sign_singular_part_by_hand() {
        let g = gauss();
        let e = EnergyVector::new(vec![0.2, -0.6]);
        let s = singular_part(&g, &mi(&[0, 0]), &sv("+-"), &e).unwrap();
        let (g1, g2) = (g.value(c(0.2, 0.0)).re, g.value(c(-0.6, 0.0)).re);
        assert!(close(s, c((g1 + g2) / 0.8, 0.0), 1e-14));
    }

    #[test]
    fn equal_signs_split_into_regular_and_residue() {
        let g = gauss();
        let e = EnergyVector::new(vec![0.4, -0.3, 1.0]);
        let n = mi(&[1, 0, 0]);
        let reg = j_reg(&g, &n, &e).unwrap();
        let res = residue_part(&g, &n, &e).unwrap();
        for sign in [HalfPlaneSign::Plus, HalfPlaneSign::Minus] {
            let sigma = SignVector::uniform(sign, 3);
            let direct = j_sigma_direct(&g, &n, &sigma, &e).unwrap();
            let split = reg + c(0.0, PI * sign.value()) * res;
            assert!(close(split, direct, 1e-8), "{split} {direct}");
        }
    }

    #[test]
    fn schwarz_reflection_of_boundary_values() {
        let g = gauss();
        let e = EnergyVector::new(vec![0.1, 0.9]);
        let n = mi(&[0, 1]);
        let a = j_sigma_direct(&g, &n, &sv("+-"), &e).unwrap();
        let b = j_sigma_direct(&g, &n, &sv("-+"), &e).unwrap();
        assert!(close(a.conj(), b, 1e-13));
    }

    #[test]
    fn regular_part_limits() {
        let g = gauss();
        // N = 1 is the principal-value real part
        let one = j_reg(&g, &mi(&[0]), &EnergyVector::new(vec![0.7])).unwrap();
        let bv = crate::cauchy1::i0_boundary(&g, HalfPlaneSign::Plus, 0.7);
        assert!((one.re - bv.re).abs() < 1e-13 && one.im == 0.0);
        // continuity across the diagonal
        let at = j_reg(&g, &mi(&[0, 0]), &EnergyVector::new(vec![0.0, 0.0])).unwrap();
        let near = j_reg(&g, &mi(&[0, 0]), &EnergyVector::new(vec![1e-4, -1e-4])).unwrap();
        assert!(close(near, at, 1e-6), "{near} {at}");
        // permutation symmetry of (E_k, n_k) pairs
        let p = j_reg(&g, &mi(&[1, 0]), &EnergyVector::new(vec![0.3, -0.5])).unwrap();
        let q = j_reg(&g, &mi(&[0, 1]), &EnergyVector::new(vec![-0.5, 0.3])).unwrap();
        assert!(close(p, q, 1e-10));
    }

    #[test]
    fn residue_examples() {
        let g = gauss();
        let r1 = residue_part(&g, &mi(&[0]), &EnergyVector::new(vec![0.3])).unwrap();
        assert_eq!(r1, g.value(c(0.3, 0.0)));
        let (e1, e2) = (0.4, -1.1);
        let r2 = residue_part(&g, &mi(&[0, 0]), &EnergyVector::new(vec![e1, e2])).unwrap();
        let dd = (g.value(c(e1, 0.0)) - g.value(c(e2, 0.0))) / (e1 - e2);
        assert!(close(r2, dd, 1e-12), "{r2} {dd}");
        let r3 = residue_part(&g, &mi(&[0, 0]), &EnergyVector::new(vec![0.5, 0.5])).unwrap();
        assert!(close(r3, g.derivative(1, c(0.5, 0.0)), 1e-13));
    }

    #[test]
    fn epsilon_limit_matches_boundary_value() {
        let g = gauss();
        let n = mi(&[0, 1]);
        let e = [0.2, -0.7];
        let sigma = sv("+-");
        let exact = j_sigma_direct(&g, &n, &sigma, &EnergyVector::new(e.to_vec())).unwrap();
        let samples: Vec<_> = [0.1, 0.05, 0.025, 0.0125, 0.00625, 0.003125, 0.0015625]
            .into_iter()
            .map(|eps| {
                let z: Vec<_> = e.iter().zip(&sigma.0).map(|(&x, s)| c(x, s.value() * eps)).collect();
                (eps, j_n(&g, &n, &z).unwrap())
            })
            .collect();
        let lim = quad::extrapolate_to_zero(&samples);
        assert!(close(lim, exact, 1e-6), "{lim} {exact}");
    }

    #[test]
    fn polar_singularity_only_for_opposite_signs() {
        let g = gauss();
        let hs: Vec<f64> = (0..9).map(|k| 1e-3 * 10f64.powf(k as f64 / 4.0)).collect();
        let eval = |s: &str, h: f64| j_sigma_decomposed(&g, &mi(&[0, 0]), &sv(s), &EnergyVector::new(vec![0.0, h])).unwrap();
        let pts: Vec<(f64, f64)> = hs.iter().map(|&h| (h.ln(), eval("+-", h).norm().ln())).collect();
        let slope = fit_slope(&pts);
        assert!((slope + 1.0).abs() < 0.05, "slope {slope}");
        let vals: Vec<f64> = hs.iter().map(|&h| eval("++", h).norm()).collect();
        let (lo, hi) = vals.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &v| (a.min(v), b.max(v)));
        assert!((hi - lo) / hi < 0.1);
    }

    fn fit_slope(p: &[(f64, f64)]) -> f64 {
        let n = p.len() as f64;
        let mx = p.iter().map(|q| q.0).sum::<f64>() / n;
        let my = p.iter().map(|q| q.1).sum::<f64>() / n;
        let sxy: f64 = p.iter().map(|q| (q.0 - mx) * (q.1 - my)).sum();
        let sxx: f64 = p.iter().map(|q| (q.0 - mx).powi(2)).sum();
        sxy / sxx
    }

    #[test]
    fn simplex_identity_examples() {
        let z = [c(0.0, 1.0), c(0.0, 2.0)];
        let v = c(5.0, 0.0);
        let (lhs, rhs) = simplex_pole_product(&mi(&[0, 0]), &z, v).unwrap();
        assert!(close(lhs, 1.0 / ((v - z[0]) * (v - z[1])), 1e-15));
        assert!(close(rhs, lhs, 1e-12));
        let z3 = [c(0.0, 1.0), c(1.0, 2.0), c(-1.0, 0.5)];
        let (l, r) = simplex_pole_product(&mi(&[1, 0, 2]), &z3, c(0.5, -1.0)).unwrap();
        assert!(close(r, l, 1e-10), "{l} {r}");
        assert!(matches!(
            simplex_pole_product(&mi(&[0, 0, 0]), &z3, c(0.0, 1.2)),
            Err(Error::ConvexHullViolation(_))
        ));
    }

    #[test]
    fn convex_hull_membership() {
        let tri = [c(0.0, 0.0), c(1.0, 0.0), c(0.0, 1.0)];
        assert!(in_convex_hull(&tri, c(0.2, 0.2)));
        assert!(in_convex_hull(&tri, c(0.5, 0.0)));
        assert!(!in_convex_hull(&tri, c(0.6, 0.6)));
        assert!(!in_convex_hull(&tri[..1], c(0.6, 0.6)));
        assert!(in_convex_hull(&tri[..2], c(0.3, 0.0)));
    }

    #[test]
    fn restricted_sum_examples() {
        assert_eq!(restricted_multiindex_sum(&mi(&[1, 0]), 1), Ok(3));
        assert_eq!(restricted_multiindex_sum(&mi(&[4, 2, 1]), 0), Ok(1));
        assert_eq!(restricted_multiindex_sum(&mi(&[3]), 5), Ok(56));
        for len in 1..=4 {
            for total in 0..=6 {
                for n in Compositions::new(len, total) {
                    for r in 0..=6 {
                        assert_eq!(restricted_multiindex_sum(&n, r), restricted_multiindex_closed_form(&n, r));
                    }
                }
            }
        }
        assert!(matches!(restricted_multiindex_sum(&mi(&[60, 60]), 60), Err(Error::Overflow(_))));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn simplex_identity_random(
            n in proptest::collection::vec(0usize..2, 1..5),
            re in proptest::collection::vec(-1.0f64..1.0, 4),
            im in proptest::collection::vec(0.2f64..1.0, 4),
            vx in 2.0f64..4.0,
        ) {
            let z: Vec<_> = (0..n.len()).map(|k| c(re[k], im[k])).collect();
            let (l, r) = simplex_pole_product(&MultiIndex(n), &z, c(vx, -0.5)).unwrap();
            prop_assert!((l - r).norm() <= 1e-10 * (1.0 + l.norm()));
        }
    }
}
