//! Truncated random-walk series for the density of states and N-point Green
//! functions, off-axis and as boundary values, with geometric tail bounds.
//!
//! Walk terms are aggregated by the sorted multiset of site factors
//! `(n̲_Γ(u), attached coefficients)`, so each distinct Cauchy-type integral is
//! evaluated once. Distinct factors are evaluated in parallel and summed in a
//! fixed (key) order, which makes every result bit-stable regardless of the
//! thread count.

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::{E, PI};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cauchy1::{in_boundary, pole_product_integral, HalfPlaneSign};
use crate::cauchyn::{j_partial_fraction, j_sigma_decomposed, EnergyVector, MultiIndex, SignVector};
use crate::covariant::{attached_coefficients, coefficient_sites, CoefficientFn, CovariantMonomial, CovariantPolynomial, SiteDensity};
use crate::densities::AnalyticDensity;
use crate::error::{Error, Result};
use crate::walks::{enumerate_npaths_with_budget, visit_counts, Site, DEFAULT_BUDGET, MAX_DIM};

/// Whether a tail bound outside its certified regime is an error or `+∞`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundMode {
    Certified,
    #[default]
    Exploratory,
}

#[derive(Debug, Clone)]
pub struct ExpansionConfig {
    pub d: usize,
    pub lambda: f64,
    /// Largest total walk length `n_max` summed.
    pub order: usize,
    pub density: AnalyticDensity,
    /// One polynomial per point; `N = observables.len()`.
    pub observables: Vec<CovariantPolynomial>,
    /// Minimum energy gap Δ; defaults to the gap of the energies evaluated.
    pub gap: Option<f64>,
    /// Analyticity parameter δ (bound tuning only).
    pub delta: Option<f64>,
    pub mode: BoundMode,
    pub budget: u64,
}

impl ExpansionConfig {
    pub fn new(d: usize, lambda: f64, order: usize, density: AnalyticDensity, observables: Vec<CovariantPolynomial>) -> Self {
        ExpansionConfig {
            d,
            lambda,
            order,
            density,
            observables,
            gap: None,
            delta: None,
            mode: BoundMode::Exploratory,
            budget: DEFAULT_BUDGET,
        }
    }

    /// Single point, identity observable.
    pub fn dos(d: usize, lambda: f64, order: usize, density: AnalyticDensity) -> Self {
        Self::new(d, lambda, order, density, vec![CovariantPolynomial::identity(d)])
    }

    pub fn with_mode(mut self, mode: BoundMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn with_gap(mut self, gap: f64, delta: Option<f64>) -> Self {
        self.gap = Some(gap);
        self.delta = delta;
        self
    }

    pub fn n_points(&self) -> usize {
        self.observables.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.d == 0 || self.d > MAX_DIM {
            return Err(Error::InvalidArgument(format!("dimension {} outside 1..={MAX_DIM}", self.d)));
        }
        if !self.lambda.is_finite() {
            return Err(Error::InvalidArgument("λ must be finite".into()));
        }
        if self.observables.is_empty() {
            return Err(Error::InvalidArgument("at least one observable is required".into()));
        }
        for p in &self.observables {
            if p.terms.is_empty() {
                return Err(Error::InvalidArgument("empty observable polynomial".into()));
            }
            if p.terms.iter().any(|(_, a)| a.dim() != self.d) {
                return Err(Error::InvalidArgument(format!("observable dimension differs from d = {}", self.d)));
            }
        }
        if self.density.second_moment().is_none() {
            return Err(Error::InvalidDensity(format!(
                "{} has no finite second moment; the series requires one",
                self.density
            )));
        }
        if let Some(gap) = self.gap {
            if !(gap > 0.0) {
                return Err(Error::InvalidArgument(format!("gap Δ = {gap} must be positive")));
            }
        }
        if let Some(delta) = self.delta {
            if !(delta >= 0.0) {
                return Err(Error::InvalidArgument(format!("δ = {delta} must be non-negative")));
            }
        }
        Ok(())
    }

    /// Strip radius used in the bounds: that of `g`, reduced to the
    /// admissible radius of every coefficient that occurs.
    pub fn effective_radius(&self) -> f64 {
        self.observables.iter().map(|p| p.admissible_radius()).fold(self.density.strip_radius(), f64::min)
    }

    fn effective_norm(&self) -> Result<f64> {
        let r = self.effective_radius();
        if r < self.density.strip_radius() {
            self.density.norm_r(r)
        } else {
            Ok(self.density.norm())
        }
    }

    /// `A^N = Π_i Σ_k |w_k| Π sup_{ℬ_r}|a|`.
    fn strip_amplitude(&self) -> f64 {
        let r = self.effective_radius();
        self.observables.iter().map(|p| p.sup_norm(r)).product()
    }

    fn real_amplitude(&self) -> f64 {
        self.observables.iter().map(|p| p.real_sup_norm()).product()
    }
}

/// `C = 8/π + 2 + r + r²`.
pub fn strip_constant(r: f64) -> f64 {
    8.0 / PI + 2.0 + r + r * r
}

/// `a₀ = 4 d N C₁ e ‖g‖_r` with `C₁ = 4C/r`.
pub fn radius_a0(cfg: &ExpansionConfig) -> Result<f64> {
    let r = cfg.effective_radius();
    Ok(a0_from(cfg.d, cfg.n_points(), r, cfg.effective_norm()?))
}

pub fn a0_from(d: usize, n: usize, r: f64, norm: f64) -> f64 {
    let c1 = 4.0 * strip_constant(r) / r;
    4.0 * d as f64 * n as f64 * c1 * E * norm
}

/// `λ_{r,ε} = ε³ / (2d e³ r C ‖g‖_r)`.
pub fn lambda_r_eps(d: usize, g: &AnalyticDensity, eps: f64) -> f64 {
    let r = g.strip_radius();
    eps.powi(3) / (2.0 * d as f64 * E.powi(3) * r * strip_constant(r) * g.norm())
}

/// `F_t(E_1,…,E_{2n}) = Π_j sin((t/2)(E_j − E_{j−1}))/(E_j − E_{j−1})`, with
/// `E_0 = E_{2n}`.
pub fn moment_kernel(t: f64, energies: &[f64]) -> f64 {
    let m = energies.len();
    (0..m)
        .map(|j| {
            let diff = energies[j] - energies[(j + m - 1) % m];
            let x = 0.5 * t * diff;
            if x == 0.0 {
                0.5 * t
            } else if x.abs() < 1e-4 {
                0.5 * t * (1.0 - x * x / 6.0 + x.powi(4) / 120.0)
            } else {
                x.sin() / diff
            }
        })
        .product()
}

/// `Σ_{n>m} C(n+N−1, N−1) ρ^n`, or `+∞` when `ρ ≥ 1`.
pub fn binomial_geometric_tail(points: usize, rho: f64, m: usize) -> f64 {
    if !(rho < 1.0) || !rho.is_finite() {
        return f64::INFINITY;
    }
    if rho == 0.0 {
        return 0.0;
    }
    if points <= 1 {
        return rho.powi(m as i32 + 1) / (1.0 - rho);
    }
    // term ratio C(n+N,N−1)/C(n+N−1,N−1) ρ = (n+N)/(n+1) ρ decreases to ρ
    let k = points - 1;
    let mut n = m + 1;
    let mut term = binom_f(n + k, k) * rho.powi(n as i32);
    let mut sum = 0.0;
    loop {
        sum += term;
        let ratio = (n + points) as f64 / (n + 1) as f64 * rho;
        if ratio < 1.0 && term * ratio / (1.0 - ratio) <= 1e-16 * sum {
            sum += term * ratio / (1.0 - ratio);
            return sum;
        }
        term *= ratio;
        n += 1;
        if n > 1_000_000 {
            return f64::INFINITY;
        }
    }
}

fn binom_f(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, j| acc * (n - j) as f64 / (j + 1) as f64)
}

/// Serialised form of a series evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesRecord {
    pub value_re: f64,
    pub value_im: f64,
    pub order: usize,
    #[serde(with = "infinite_as_null")]
    pub tail_bound: f64,
    pub lambda: f64,
    pub energies: Vec<Complex64>,
    pub sigmas: Vec<HalfPlaneSign>,
}

mod infinite_as_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
        if x.is_finite() {
            s.serialize_f64(*x)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeriesValue {
    pub value: Complex64,
    pub order: usize,
    pub tail_bound: f64,
    /// `|partial sum through order n|`, n = 0..=order.
    pub ratio_data: Vec<f64>,
    pub partial_sums: Vec<Complex64>,
    /// Tail bound after truncation at each order n = 0..=order.
    pub tail_bounds: Vec<f64>,
    pub lambda: f64,
    pub energies: Vec<Complex64>,
    pub sigmas: Vec<HalfPlaneSign>,
}

impl SeriesValue {
    pub fn record(&self) -> SeriesRecord {
        SeriesRecord {
            value_re: self.value.re,
            value_im: self.value.im,
            order: self.order,
            tail_bound: self.tail_bound,
            lambda: self.lambda,
            energies: self.energies.clone(),
            sigmas: self.sigmas.clone(),
        }
    }

    /// `(1/π) Im value`, the density of states for a `+` boundary value.
    pub fn dos(&self) -> f64 {
        self.value.im / PI
    }
}

/// `(n̲_Γ(u), sorted attached coefficients)` of one site.
pub type SiteKey = (MultiIndex, Vec<CoefficientFn>);
type FamilyKey = Vec<SiteKey>;

fn family_key(family: &crate::walks::NPathFamily, monomials: &[&CovariantMonomial], points: usize) -> FamilyKey {
    let counts = visit_counts(family);
    let mut sites: BTreeSet<Site> = counts.keys().copied().collect();
    sites.extend(coefficient_sites(family, monomials));
    let mut key: FamilyKey = sites
        .into_iter()
        .map(|u| {
            let n = counts.get(&u).cloned().unwrap_or_else(|| MultiIndex::zeros(points));
            let mut c = attached_coefficients(family, monomials, u);
            c.sort();
            (n, c)
        })
        .collect();
    key.sort();
    key
}

/// Per-order sums `Σ_key weight(key) Π_u factor(u)`, before the `(−λ)^n`.
fn walk_sums<F>(cfg: &ExpansionConfig, factor: F) -> Result<Vec<Complex64>>
where
    F: Fn(&SiteKey) -> Result<Complex64> + Sync,
{
    cfg.validate()?;
    let points = cfg.n_points();
    let mut classes: Vec<BTreeMap<FamilyKey, Complex64>> = vec![BTreeMap::new(); cfg.order + 1];

    // multilinear expansion over the term choices of each polynomial
    let mut choice = vec![0usize; points];
    loop {
        let weight: Complex64 = choice.iter().zip(&cfg.observables).map(|(&k, p)| p.terms[k].0).product();
        let monomials: Vec<&CovariantMonomial> =
            choice.iter().zip(&cfg.observables).map(|(&k, p)| &p.terms[k].1).collect();
        let offsets: Vec<Site> = monomials.iter().map(|a| a.displacement).collect();
        if weight != Complex64::new(0.0, 0.0) {
            for (n, bucket) in classes.iter_mut().enumerate() {
                for family in enumerate_npaths_with_budget(cfg.d, &offsets, n, cfg.budget)? {
                    let key = family_key(&family?, &monomials, points);
                    *bucket.entry(key).or_default() += weight;
                }
            }
        }
        let mut i = 0;
        loop {
            if i == points {
                break;
            }
            choice[i] += 1;
            if choice[i] < cfg.observables[i].terms.len() {
                break;
            }
            choice[i] = 0;
            i += 1;
        }
        if i == points {
            break;
        }
    }

    let distinct: Vec<SiteKey> =
        classes.iter().flat_map(|b| b.keys().flatten().cloned()).collect::<BTreeSet<_>>().into_iter().collect();
    let values: Vec<Complex64> = distinct.par_iter().map(&factor).collect::<Result<_>>()?;
    let table: BTreeMap<&SiteKey, Complex64> = distinct.iter().zip(values).collect();

    Ok(classes
        .iter()
        .map(|bucket| {
            bucket
                .iter()
                .map(|(key, w)| key.iter().fold(*w, |acc, site| acc * table[site]))
                .fold(Complex64::new(0.0, 0.0), |a, b| a + b)
        })
        .collect())
}

fn assemble(cfg: &ExpansionConfig, sums: Vec<Complex64>, tails: Vec<f64>, energies: Vec<Complex64>, sigmas: Vec<HalfPlaneSign>) -> SeriesValue {
    let mut acc = Complex64::new(0.0, 0.0);
    let mut partial_sums = Vec::with_capacity(sums.len());
    for (n, s) in sums.iter().enumerate() {
        acc += s * (-cfg.lambda).powi(n as i32);
        partial_sums.push(acc);
    }
    SeriesValue {
        value: acc,
        order: cfg.order,
        tail_bound: *tails.last().unwrap_or(&f64::INFINITY),
        ratio_data: partial_sums.iter().map(|z| z.norm()).collect(),
        partial_sums,
        tail_bounds: tails,
        lambda: cfg.lambda,
        energies,
        sigmas,
    }
}

fn merge_points<T: Copy + PartialEq>(points: impl Iterator<Item = (T, usize)>) -> Vec<(T, usize)> {
    let mut out: Vec<(T, usize)> = Vec::new();
    for (p, k) in points {
        match out.iter_mut().find(|(q, _)| *q == p) {
            Some(entry) => entry.1 += k,
            None => out.push((p, k)),
        }
    }
    out
}

/// `J_{n−f}(g_{Γ,u}; z̲)` restricted to the points visited at `u`; the
/// integral of `g_{Γ,u}` alone for coefficient-only sites.
fn off_axis_factor(g: &AnalyticDensity, key: &SiteKey, z: &[Complex64]) -> Result<Complex64> {
    let h = SiteDensity::new(g, key.1.clone())?;
    let poles = merge_points(z.iter().zip(key.0.iter()).filter(|(_, &k)| k > 0).map(|(&w, &k)| (w, k)));
    match poles.len() {
        0 => Ok(pole_product_integral(&h, 0, &[])),
        1 => Ok(pole_product_integral(&h, 0, &[(poles[0].0, poles[0].1 as i32)])),
        _ => {
            let n = MultiIndex::new(poles.iter().map(|p| p.1 - 1).collect());
            let zs: Vec<Complex64> = poles.iter().map(|p| p.0).collect();
            j_partial_fraction(&h, &n, &zs)
        }
    }
}

fn boundary_factor(g: &AnalyticDensity, key: &SiteKey, sigma: &[HalfPlaneSign], e: &[f64]) -> Result<Complex64> {
    let h = SiteDensity::new(g, key.1.clone())?;
    let visited = key.0.iter().enumerate().filter(|(_, &k)| k > 0).map(|(i, &k)| ((e[i].to_bits(), sigma[i]), k));
    let poles = merge_points(visited);
    for (a, pa) in poles.iter().enumerate() {
        for (b, pb) in poles.iter().enumerate().skip(a + 1) {
            if pa.0 .0 == pb.0 .0 {
                return Err(Error::CoincidentPoints(a, b));
            }
        }
    }
    match poles.len() {
        0 => Ok(pole_product_integral(&h, 0, &[])),
        1 => Ok(in_boundary(&h, poles[0].1 - 1, poles[0].0 .1, f64::from_bits(poles[0].0 .0))),
        _ => {
            let n = MultiIndex::new(poles.iter().map(|p| p.1 - 1).collect());
            let s = SignVector(poles.iter().map(|p| p.0 .1).collect());
            let en = EnergyVector::new(poles.iter().map(|p| f64::from_bits(p.0 .0)).collect());
            j_sigma_decomposed(&h, &n, &s, &en)
        }
    }
}

/// Off-axis tail: `|J_n(h; z̲)| ≤ ‖h‖_1 Π_k |Im z_k|^{−(n_k+1)}` gives
/// `A η^{−N} Σ_{n>m} C(n+N−1,N−1) (2d|λ|/η)^n`, η = min |Im z_k|.
pub fn off_axis_tail(cfg: &ExpansionConfig, z: &[Complex64], m: usize) -> f64 {
    let eta = z.iter().map(|w| w.im.abs()).fold(f64::INFINITY, f64::min);
    let points = cfg.n_points();
    let rho = 2.0 * cfg.d as f64 * cfg.lambda.abs() / eta;
    cfg.real_amplitude() * eta.powi(-(points as i32)) * binomial_geometric_tail(points, rho, m)
}

/// Geometry of the N-point bound: effective Δ and δ, and whether the
/// certified conditions hold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundGeometry {
    pub gap: f64,
    pub delta: f64,
    pub a0: f64,
    pub rho: f64,
    pub certified: bool,
}

/// Δ defaults to the energy gap (capped below `r`), δ to `Δ/4`, raised when
/// needed so that `Δ − δ < r/2`.
pub fn bound_geometry(cfg: &ExpansionConfig, e: &EnergyVector) -> Result<BoundGeometry> {
    let r = cfg.effective_radius();
    let norm = cfg.effective_norm()?;
    let points = cfg.n_points();
    let min_gap = e.min_gap();
    let gap = match cfg.gap {
        Some(g) => g,
        None if points == 1 => 0.9 * r,
        None => min_gap.min(0.9 * r),
    };
    let delta = cfg.delta.unwrap_or_else(|| {
        if gap < r {
            (gap / 4.0).max(gap - 0.5 * r + 0.25 * (r - gap))
        } else {
            gap / 4.0
        }
    });
    let a0 = a0_from(cfg.d, points, r, norm);
    let c1 = 4.0 * strip_constant(r) / r;
    let rho = 2.0 * cfg.d as f64 * points as f64 * c1 * E * cfg.lambda.abs() * norm / (gap - delta);
    let certified = delta > 0.0
        && delta < gap / 2.0
        && gap - delta > 0.0
        && gap - delta < r / 2.0
        && (points == 1 || min_gap >= gap)
        && a0 * cfg.lambda.abs() < gap
        && rho < 1.0;
    Ok(BoundGeometry { gap, delta, a0, rho, certified })
}

/// Tail after order `m` from the per-factor estimate
/// `‖J^σ_n‖ ≤ (4CN‖g‖_r/r)(e/(Δ−δ))^{|n|+N}`:
/// `A^N K^N Σ_{n>m} C(n+N−1,N−1) ρ^n` with `K = N C₁ e ‖g‖_r/(Δ−δ)`, `ρ = 2dK|λ|`.
/// The factor `K^N` accounts for up to `|Γ|+N` visited sites.
pub fn boundary_tail(cfg: &ExpansionConfig, geo: &BoundGeometry, m: usize) -> Result<f64> {
    if !geo.certified {
        return Ok(f64::INFINITY);
    }
    let r = cfg.effective_radius();
    let norm = cfg.effective_norm()?;
    let points = cfg.n_points();
    let c1 = 4.0 * strip_constant(r) / r;
    let k = (points as f64 * c1 * norm).max(1.0) * E / (geo.gap - geo.delta);
    Ok(cfg.strip_amplitude() * k.powi(points as i32) * binomial_geometric_tail(points, geo.rho, m))
}

/// The geometric tail in its compact form `A^N ρ^{m+1}/(1−ρ)`.
pub fn compact_tail(cfg: &ExpansionConfig, geo: &BoundGeometry, m: usize) -> f64 {
    if !geo.certified {
        return f64::INFINITY;
    }
    cfg.strip_amplitude() * binomial_geometric_tail(1, geo.rho, m)
}

/// Single-point boundary tail, from `‖J_n^±‖_δ ≤ (re²C/4)(n+3)²‖g‖_r/(r−δ)^{n+3}`:
/// `Q Σ_{n>m} (2d|λ|Q)^n` with `Q = e·max(1, re²C‖g‖_r/(r−δ)²)/(r−δ)`.
/// Certified iff `|λ| < λ_{r,r−δ}` (when the max is attained by its second
/// argument).
pub fn dos_tail(cfg: &ExpansionConfig, m: usize) -> Result<f64> {
    let r = cfg.density.strip_radius();
    let norm = cfg.density.norm();
    let delta = cfg.delta.unwrap_or(0.0);
    if delta >= r {
        return Ok(f64::INFINITY);
    }
    let eps = r - delta;
    let q = E * (r * E * E * strip_constant(r) * norm / (eps * eps)).max(1.0) / eps;
    let rho = 2.0 * cfg.d as f64 * cfg.lambda.abs() * q;
    Ok(q * binomial_geometric_tail(1, rho, m))
}

/// `Σ_{|γ| ≤ n_max} (−λ)^{|γ|} Π_u I^σ_{n_γ(u)−1}(g; E)`.
pub fn dos_series(cfg: &ExpansionConfig, sigma: HalfPlaneSign, e: f64) -> Result<SeriesValue> {
    if cfg.n_points() != 1 || cfg.observables[0] != CovariantPolynomial::identity(cfg.d) {
        return Err(Error::InvalidArgument("the DOS series takes one identity observable".into()));
    }
    if !e.is_finite() {
        return Err(Error::InvalidArgument(format!("energy {e} is not finite")));
    }
    cfg.validate()?;
    let eps = cfg.density.strip_radius() - cfg.delta.unwrap_or(0.0);
    let lam_max = lambda_r_eps(cfg.d, &cfg.density, eps);
    let energies = EnergyVector::new(vec![e]);
    let geo = bound_geometry(cfg, &energies)?;
    let thm = cfg.lambda.abs() < lam_max;
    if cfg.mode == BoundMode::Certified && !thm && !geo.certified {
        return Err(Error::RadiusViolation(format!(
            "|λ| = {} is outside the certified radius λ_(r,ε) = {lam_max:.3e}",
            cfg.lambda.abs()
        )));
    }
    let g = &cfg.density;
    let sums = walk_sums(cfg, |key| boundary_factor(g, key, &[sigma], &[e]))?;
    let tails = (0..=cfg.order)
        .map(|m| Ok(dos_tail(cfg, m)?.min(boundary_tail(cfg, &geo, m)?)))
        .collect::<Result<Vec<f64>>>()?;
    Ok(assemble(cfg, sums, tails, vec![Complex64::new(e, 0.0)], vec![sigma]))
}

/// `G_Å(z̲)` off the real axis.
pub fn green_series(cfg: &ExpansionConfig, z: &[Complex64]) -> Result<SeriesValue> {
    if z.len() != cfg.n_points() {
        return Err(Error::InvalidArgument(format!("{} points for {} observables", z.len(), cfg.n_points())));
    }
    if z.iter().any(|w| w.im == 0.0) {
        return Err(Error::RealAxisInput);
    }
    if z.iter().any(|w| !w.re.is_finite() || !w.im.is_finite()) {
        return Err(Error::InvalidArgument("non-finite spectral parameter".into()));
    }
    let g = &cfg.density;
    let sums = walk_sums(cfg, |key| off_axis_factor(g, key, z))?;
    let tails = (0..=cfg.order).map(|m| off_axis_tail(cfg, z, m)).collect();
    let sigmas = z
        .iter()
        .map(|w| if w.im > 0.0 { HalfPlaneSign::Plus } else { HalfPlaneSign::Minus })
        .collect();
    Ok(assemble(cfg, sums, tails, z.to_vec(), sigmas))
}

/// Boundary value `G_Å^σ̲(E̲)`.
pub fn npoint_boundary_series(cfg: &ExpansionConfig, sigma: &SignVector, e: &EnergyVector) -> Result<SeriesValue> {
    if sigma.len() != cfg.n_points() || e.len() != cfg.n_points() {
        return Err(Error::InvalidArgument(format!(
            "{} signs and {} energies for {} observables",
            sigma.len(),
            e.len(),
            cfg.n_points()
        )));
    }
    e.check_distinct()?;
    cfg.validate()?;
    let geo = bound_geometry(cfg, e)?;
    if cfg.mode == BoundMode::Certified && !geo.certified {
        return Err(Error::RadiusViolation(format!(
            "need a₀|λ| = {:.3e} < Δ = {} ≤ min gap {}, 0 < δ = {} < Δ/2 and Δ−δ < r/2",
            geo.a0 * cfg.lambda.abs(),
            geo.gap,
            e.min_gap(),
            geo.delta
        )));
    }
    let g = &cfg.density;
    let sums = walk_sums(cfg, |key| boundary_factor(g, key, &sigma.0, e.entries()))?;
    let tails = (0..=cfg.order).map(|m| boundary_tail(cfg, &geo, m)).collect::<Result<Vec<f64>>>()?;
    let energies = e.entries().iter().map(|&x| Complex64::new(x, 0.0)).collect();
    Ok(assemble(cfg, sums, tails, energies, sigma.0.clone()))
}

/// Taylor data `(1/l!) ∂^l F(E_k)` on a grid, `l = 0..=lmax`.
pub type TaylorGrid = Vec<Vec<Complex64>>;

/// `‖F‖_δ ≈ Σ_l δ^l sup_k |(1/l!) ∂^l F(E_k)|`.
pub fn delta_norm(taylor: &TaylorGrid, delta: f64) -> f64 {
    taylor
        .iter()
        .enumerate()
        .map(|(l, row)| delta.powi(l as i32) * row.iter().map(|z| z.norm()).fold(0.0, f64::max))
        .sum()
}

/// Taylor data of a pointwise product (Cauchy product per grid point).
pub fn taylor_product(a: &TaylorGrid, b: &TaylorGrid) -> TaylorGrid {
    let lmax = a.len().min(b.len());
    (0..lmax)
        .map(|l| {
            (0..a[0].len())
                .map(|k| (0..=l).map(|j| a[j][k] * b[l - j][k]).sum())
                .collect()
        })
        .collect()
}

/// Taylor data of `E ↦ J^σ_n(g; E)` using `(1/l!) ∂^l J_n = C(n+l, l) J_{n+l}`.
pub fn boundary_taylor(g: &AnalyticDensity, n: usize, sigma: HalfPlaneSign, grid: &[f64], lmax: usize) -> TaylorGrid {
    (0..=lmax)
        .map(|l| {
            grid.par_iter()
                .map(|&e| in_boundary(g, n + l, sigma, e) * binom_f(n + l, l))
                .collect()
        })
        .collect()
}

/// `(re²C/4)(n+3)²‖g‖_r/(r−δ)^{n+3}`.
pub fn boundary_factor_bound(g: &AnalyticDensity, n: usize, delta: f64) -> f64 {
    let r = g.strip_radius();
    r * E * E * strip_constant(r) / 4.0 * ((n + 3) as f64).powi(2) * g.norm() / (r - delta).powi(n as i32 + 3)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cauchy1::{i0_boundary, i_n};
    use crate::cauchyn::j_n;

    fn gauss() -> AnalyticDensity {
        AnalyticDensity::gaussian(1.0, 1.0).unwrap()
    }

    #[test]
    fn a0_reference_value() {
        // 4e(4(8/π+2) + 4 + 4)
        let expected = 4.0 * E * (4.0 * (8.0 / PI + 2.0) + 8.0);
        assert!((a0_from(1, 1, 1.0, 1.0) - expected).abs() < 1e-12);
        assert!((expected - 284.72).abs() < 0.01);
        assert!(a0_from(2, 1, 1.0, 1.0) > a0_from(1, 1, 1.0, 1.0));
        assert!(a0_from(1, 2, 1.0, 1.0) > a0_from(1, 1, 1.0, 1.0));
        assert!(a0_from(1, 1, 1.0, 2.0) > a0_from(1, 1, 1.0, 1.0));
    }

    #[test]
    fn moment_kernel_values() {
        assert!((moment_kernel(2.0, &[0.0, PI / 2.0]) - 4.0 / (PI * PI)).abs() < 1e-15);
        assert!((moment_kernel(1.3, &[0.7; 4]) - 0.65f64.powi(4)).abs() < 1e-15);
        assert_eq!(moment_kernel(0.0, &[0.0, 1.0]), 0.0);
    }

    #[test]
    fn dos_at_zero_coupling_is_the_density() {
        let g = gauss();
        let cfg = ExpansionConfig::dos(1, 0.0, 4, g.clone());
        for &e in &[-1.5, 0.0, 0.8] {
            let s = dos_series(&cfg, HalfPlaneSign::Plus, e).unwrap();
            let i0 = i0_boundary(&g, HalfPlaneSign::Plus, e);
            assert!((s.value - i0).norm() < 1e-12);
            assert!((s.dos() - g.eval(Complex64::new(e, 0.0)).unwrap().re).abs() < 1e-10);
            assert_eq!(s.tail_bound, 0.0);
        }
    }

    #[test]
    fn dos_order_two_matches_hand_expansion() {
        let g = gauss();
        for d in 1..=3 {
            let lambda = 0.03;
            let cfg = ExpansionConfig::dos(d, lambda, 2, g.clone());
            let e = 0.4;
            let s = dos_series(&cfg, HalfPlaneSign::Minus, e).unwrap();
            let i0 = i0_boundary(&g, HalfPlaneSign::Minus, e);
            let i1 = in_boundary(&g, 1, HalfPlaneSign::Minus, e);
            let expected = lambda * lambda * 2.0 * d as f64 * i1 * i0;
            assert!((s.partial_sums[2] - s.partial_sums[0] - expected).norm() < 1e-12);
            // odd orders vanish
            assert_eq!(s.partial_sums[1], s.partial_sums[0]);
        }
    }

    #[test]
    fn green_reduces_to_one_point_integrals() {
        let g = gauss();
        let z = Complex64::new(0.3, 0.4);
        let cfg = ExpansionConfig::dos(1, 0.0, 2, g.clone());
        let s = green_series(&cfg, &[z]).unwrap();
        assert!((s.value - i_n(&g, 0, z).unwrap()).norm() < 1e-12);

        let cfg2 = ExpansionConfig::new(1, 0.0, 2, g.clone(), vec![CovariantPolynomial::identity(1); 2]);
        let z2 = [z, Complex64::new(-0.5, -0.3)];
        let s2 = green_series(&cfg2, &z2).unwrap();
        let direct = j_n(&g, &MultiIndex::new(vec![0, 0]), &z2).unwrap();
        assert!((s2.value - direct).norm() < 1e-10);
        assert!(matches!(green_series(&cfg, &[Complex64::new(0.3, 0.0)]), Err(Error::RealAxisInput)));
    }

    #[test]
    fn green_order_two_matches_hand_expansion() {
        let g = gauss();
        let z = Complex64::new(-0.2, 0.5);
        let lambda = 0.1;
        let cfg = ExpansionConfig::dos(2, lambda, 2, g.clone());
        let s = green_series(&cfg, &[z]).unwrap();
        let expected = i_n(&g, 0, z).unwrap() + lambda * lambda * 4.0 * i_n(&g, 1, z).unwrap() * i_n(&g, 0, z).unwrap();
        assert!((s.value - expected).norm() < 1e-12);
    }

    #[test]
    fn boundary_at_zero_coupling() {
        let g = gauss();
        let cfg = ExpansionConfig::new(1, 0.0, 2, g.clone(), vec![CovariantPolynomial::identity(1); 2]);
        let sigma: SignVector = "+-".parse().unwrap();
        let e = EnergyVector::new(vec![-0.5, 0.7]);
        let s = npoint_boundary_series(&cfg, &sigma, &e).unwrap();
        let direct = j_sigma_decomposed(&g, &MultiIndex::new(vec![0, 0]), &sigma, &e).unwrap();
        assert!((s.value - direct).norm() < 1e-12);
        let same = EnergyVector::new(vec![0.1, 0.1]);
        assert!(matches!(npoint_boundary_series(&cfg, &sigma, &same), Err(Error::CoincidentPoints(..))));
    }

    #[test]
    fn schwarz_symmetry_of_the_series() {
        let g = gauss();
        let cfg = ExpansionConfig::new(1, 0.05, 2, g.clone(), vec![CovariantPolynomial::identity(1); 2]);
        let e = EnergyVector::new(vec![-0.5, 0.7]);
        let sigma: SignVector = "+-".parse().unwrap();
        let a = npoint_boundary_series(&cfg, &sigma, &e).unwrap();
        let b = npoint_boundary_series(&cfg, &sigma.flip(), &e).unwrap();
        assert!((a.value - b.value.conj()).norm() < 1e-9);
    }

    #[test]
    fn velocity_order_zero() {
        // ⟨0|R(z1) ∂H R(z2) ∂H|0⟩ at order 0: 2λ² I_0(z1) I_0(z2) from ±e
        let g = gauss();
        let lambda = 0.05;
        let v = CovariantPolynomial::velocity(1, 0, lambda).unwrap();
        let cfg = ExpansionConfig::new(1, lambda, 0, g.clone(), vec![v.clone(), v]);
        let z = [Complex64::new(0.2, 0.4), Complex64::new(-0.9, -0.4)];
        let s = green_series(&cfg, &z).unwrap();
        let expected = i_n(&g, 0, z[0]).unwrap() * i_n(&g, 0, z[1]).unwrap() * (2.0 * lambda * lambda);
        assert!((s.value - expected).norm() < 1e-12);
    }

    #[test]
    fn cauchy_density_is_rejected() {
        let c = AnalyticDensity::cauchy(1.0, 0.5).unwrap();
        let cfg = ExpansionConfig::dos(1, 0.01, 2, c);
        assert!(matches!(dos_series(&cfg, HalfPlaneSign::Plus, 0.0), Err(Error::InvalidDensity(_))));
    }

    #[test]
    fn certified_mode_rejects_large_coupling() {
        let cfg = ExpansionConfig::dos(1, 0.05, 2, gauss()).with_mode(BoundMode::Certified);
        assert!(matches!(dos_series(&cfg, HalfPlaneSign::Plus, 0.0), Err(Error::RadiusViolation(_))));
        let cfg = cfg.with_mode(BoundMode::Exploratory);
        assert!(dos_series(&cfg, HalfPlaneSign::Plus, 0.0).unwrap().tail_bound.is_infinite());
    }

    #[test]
    fn geometric_tail_closed_forms() {
        assert!((binomial_geometric_tail(1, 0.5, 3) - 0.0625 * 2.0).abs() < 1e-15);
        // Σ_{n>0} (n+1) ρ^n = 1/(1−ρ)² − 1
        let rho: f64 = 0.3;
        assert!((binomial_geometric_tail(2, rho, 0) - (1.0 / (1.0 - rho).powi(2) - 1.0)).abs() < 1e-14);
        assert!(binomial_geometric_tail(2, 1.0, 3).is_infinite());
    }

    #[test]
    fn dos_factor_norm_bound_and_multiplicativity() {
        let g = gauss();
        let grid: Vec<f64> = (0..41).map(|k| -4.0 + 0.2 * k as f64).collect();
        let delta = 0.1;
        let a = boundary_taylor(&g, 0, HalfPlaneSign::Plus, &grid, 8);
        let b = boundary_taylor(&g, 1, HalfPlaneSign::Plus, &grid, 8);
        let (na, nb) = (delta_norm(&a, delta), delta_norm(&b, delta));
        assert!(na <= boundary_factor_bound(&g, 0, delta));
        assert!(nb <= boundary_factor_bound(&g, 1, delta));
        let nab = delta_norm(&taylor_product(&a, &b), delta);
        assert!(nab <= na * nb * (1.0 + 1e-12));
    }

    #[test]
    fn record_round_trip_with_infinite_tail() {
        let cfg = ExpansionConfig::dos(1, 0.05, 2, gauss());
        let s = dos_series(&cfg, HalfPlaneSign::Plus, 0.2).unwrap();
        let json = serde_json::to_string(&s.record()).unwrap();
        let back: SeriesRecord = serde_json::from_str(&json).unwrap();
        assert_eq!(back, s.record());
    }
}
