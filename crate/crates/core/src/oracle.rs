//! Brute-force validators on finite boxes: Hamiltonians, resolvent matrix
//! elements by linear solves, Monte Carlo disorder averages, eigenvalue
//! counting and reference quadrature.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Cauchy, Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::covariant::{CoefficientFn, CovariantPolynomial};
use crate::densities::{AnalyticDensity, DensityKind};
use crate::error::{Error, Result};
use crate::quad::{self, check_tolerance, QuadOptions};
use crate::walks::{Site, MAX_DIM};

/// Largest matrix dimension handled by dense LU; larger systems use COCG.
pub const DENSE_LIMIT: usize = 1500;
pub const ITERATIVE_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    #[default]
    Open,
    Periodic,
}

/// The box `[−L, L]^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteBox {
    d: usize,
    l: usize,
    boundary: Boundary,
    sites: Vec<Site>,
    index: BTreeMap<Site, usize>,
}

impl FiniteBox {
    pub fn new(d: usize, l: usize, boundary: Boundary) -> Result<Self> {
        if d == 0 || d > MAX_DIM {
            return Err(Error::InvalidArgument(format!("dimension {d} outside 1..={MAX_DIM}")));
        }
        let side = 2 * l + 1;
        let n = side.checked_pow(d as u32).filter(|&n| n <= 50_000_000).ok_or(Error::ResourceLimit { budget: 50_000_000 })?;
        // shell order: sites of [−L', L']^d come first for every L' ≤ L
        let mut sites: Vec<Site> = (0..n)
            .map(|mut k| {
                let mut c = [0i32; MAX_DIM];
                for slot in c.iter_mut().take(d) {
                    *slot = (k % side) as i32 - l as i32;
                    k /= side;
                }
                Site::new(&c[..d])
            })
            .collect();
        sites.sort_by_key(|s| (s.coords().iter().map(|c| c.abs()).max().unwrap_or(0), *s));
        let index = sites.iter().enumerate().map(|(i, s)| (*s, i)).collect();
        Ok(FiniteBox { d, l, boundary, sites, index })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn half_width(&self) -> usize {
        self.l
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    pub fn n_sites(&self) -> usize {
        self.sites.len()
    }

    pub fn sites(&self) -> &[Site] {
        &self.sites
    }

    /// Index of a site, wrapping for periodic boxes; `None` outside an open box.
    pub fn index_of(&self, s: Site) -> Option<usize> {
        match self.boundary {
            Boundary::Open => self.index.get(&s).copied(),
            Boundary::Periodic => {
                let side = 2 * self.l as i32 + 1;
                let l = self.l as i32;
                let wrapped: Vec<i32> = s.coords().iter().map(|&c| (c + l).rem_euclid(side) - l).collect();
                self.index.get(&Site::new(&wrapped)).copied()
            }
        }
    }

    /// Nearest-neighbour index pairs (with multiplicity for tiny periodic boxes).
    pub fn neighbours(&self, i: usize) -> Vec<usize> {
        let s = self.sites[i];
        (0..2 * self.d as u8).filter_map(|dir| self.index_of(s.step(dir))).collect()
    }
}

/// I.i.d. potentials on a box, reproducible from `(seed, index)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DisorderSample {
    pub seed: u64,
    pub index: u64,
    /// Potentials in box order.
    pub potentials: Vec<f64>,
}

impl DisorderSample {
    /// Sample `index` of the run seeded by `seed`: a ChaCha8 stream selected
    /// by the sample index, so samples are independent of how work is split.
    pub fn draw(bx: &FiniteBox, g: &AnalyticDensity, seed: u64, index: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(index);
        let n = bx.n_sites();
        let potentials = match g.kind() {
            DensityKind::Gaussian { sigma2 } => {
                let dist = Normal::new(0.0, sigma2.sqrt()).map_err(|e| Error::InvalidDensity(e.to_string()))?;
                (0..n).map(|_| dist.sample(&mut rng)).collect()
            }
            DensityKind::Cauchy { scale } => {
                let dist = Cauchy::new(0.0, *scale).map_err(|e| Error::InvalidDensity(e.to_string()))?;
                (0..n).map(|_| dist.sample(&mut rng)).collect()
            }
            DensityKind::Custom(form) => {
                return Err(Error::InvalidDensity(format!("no sampler for custom density {}", form.name)))
            }
        };
        Ok(DisorderSample { seed, index, potentials })
    }

    pub fn from_potentials(potentials: Vec<f64>) -> Self {
        DisorderSample { seed: 0, index: 0, potentials }
    }

    pub fn potential_map(&self, bx: &FiniteBox) -> BTreeMap<Site, f64> {
        bx.sites().iter().copied().zip(self.potentials.iter().copied()).collect()
    }
}

/// `H = λ·adjacency + diag(V)`.
pub fn build_hamiltonian(bx: &FiniteBox, lambda: f64, sample: &DisorderSample) -> DMatrix<f64> {
    let n = bx.n_sites();
    let mut h = DMatrix::from_diagonal(&DVector::from_column_slice(&sample.potentials));
    for i in 0..n {
        for j in bx.neighbours(i) {
            h[(i, j)] += lambda;
        }
    }
    h
}

/// Sparse form of `H` for matrix-vector products.
pub struct SparseHamiltonian<'a> {
    diag: &'a [f64],
    lambda: f64,
    adj: Vec<Vec<usize>>,
}

impl<'a> SparseHamiltonian<'a> {
    fn new(bx: &FiniteBox, lambda: f64, sample: &'a DisorderSample) -> Self {
        let adj = (0..bx.n_sites()).map(|i| bx.neighbours(i)).collect();
        SparseHamiltonian { diag: &sample.potentials, lambda, adj }
    }

    fn apply_shifted(&self, z: Complex64, x: &[Complex64], out: &mut [Complex64]) {
        for (i, o) in out.iter_mut().enumerate() {
            let hop: Complex64 = self.adj[i].iter().map(|&j| x[j]).sum();
            *o = x[i] * (self.diag[i] - z) + hop * self.lambda;
        }
    }
}

/// Solver for `(H − z) x = b` at fixed `z`.
pub enum ShiftedSolver<'a> {
    Dense(nalgebra::LU<Complex64, nalgebra::Dyn, nalgebra::Dyn>),
    Iterative(Box<SparseHamiltonian<'a>>, Complex64),
}

impl<'a> ShiftedSolver<'a> {
    pub fn new(bx: &FiniteBox, lambda: f64, sample: &'a DisorderSample, z: Complex64) -> Result<Self> {
        if bx.n_sites() <= DENSE_LIMIT {
            let h = build_hamiltonian(bx, lambda, sample);
            let m = h.map(|v| Complex64::new(v, 0.0)) - DMatrix::from_diagonal_element(bx.n_sites(), bx.n_sites(), z);
            Ok(ShiftedSolver::Dense(m.lu()))
        } else {
            Ok(ShiftedSolver::Iterative(Box::new(SparseHamiltonian::new(bx, lambda, sample)), z))
        }
    }

    pub fn solve(&self, b: &[Complex64]) -> Result<Vec<Complex64>> {
        match self {
            ShiftedSolver::Dense(lu) => lu
                .solve(&DVector::from_column_slice(b))
                .map(|x| x.as_slice().to_vec())
                .ok_or_else(|| Error::SolverFailure("singular shifted Hamiltonian".into())),
            ShiftedSolver::Iterative(h, z) => cocg(h, *z, b),
        }
    }
}

/// Conjugate orthogonal conjugate gradients for the complex symmetric
/// system `(H − z) x = b`.
fn cocg(h: &SparseHamiltonian<'_>, z: Complex64, b: &[Complex64]) -> Result<Vec<Complex64>> {
    let n = b.len();
    let dot = |a: &[Complex64], c: &[Complex64]| a.iter().zip(c).map(|(x, y)| x * y).sum::<Complex64>();
    let norm = |a: &[Complex64]| a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
    let b_norm = norm(b);
    let mut x = vec![Complex64::new(0.0, 0.0); n];
    if b_norm == 0.0 {
        return Ok(x);
    }
    let mut r = b.to_vec();
    let mut p = r.clone();
    let mut q = vec![Complex64::new(0.0, 0.0); n];
    let mut rho = dot(&r, &r);
    for _ in 0..(10 * n).max(1000) {
        h.apply_shifted(z, &p, &mut q);
        let pq = dot(&p, &q);
        if pq.norm() == 0.0 {
            return Err(Error::SolverFailure("COCG breakdown".into()));
        }
        let alpha = rho / pq;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * q[i];
        }
        if norm(&r) <= ITERATIVE_TOL * b_norm {
            return Ok(x);
        }
        let rho_new = dot(&r, &r);
        let beta = rho_new / rho;
        rho = rho_new;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
    }
    Err(Error::SolverFailure(format!("COCG did not reach {ITERATIVE_TOL:e} in {} iterations", (10 * n).max(1000))))
}

/// Monte Carlo run parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McOptions {
    pub samples: usize,
    pub seed: u64,
    /// Required distance from the origin to the box boundary.
    pub margin: usize,
    /// Sum samples sequentially in index order (bit-stable).
    pub deterministic: bool,
}

impl Default for McOptions {
    fn default() -> Self {
        McOptions { samples: 2000, seed: 0x5eed, margin: 8, deterministic: true }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub mean: Complex64,
    pub stderr: f64,
    pub samples: usize,
    pub seed: u64,
}

/// Serialised Monte Carlo result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McRecord<C> {
    pub config: C,
    pub mean_re: f64,
    pub mean_im: f64,
    pub stderr: f64,
    pub samples: usize,
    pub seed: u64,
}

impl McEstimate {
    pub fn record<C>(&self, config: C) -> McRecord<C> {
        McRecord { config, mean_re: self.mean.re, mean_im: self.mean.im, stderr: self.stderr, samples: self.samples, seed: self.seed }
    }
}

fn check_run(bx: &FiniteBox, opts: &McOptions) -> Result<()> {
    if opts.samples < 2 {
        return Err(Error::InvalidArgument("at least two samples are needed for a standard error".into()));
    }
    if bx.half_width() < opts.margin {
        return Err(Error::InvalidArgument(format!(
            "origin is {} sites from the boundary, margin {} required",
            bx.half_width(),
            opts.margin
        )));
    }
    Ok(())
}

fn estimate<F>(opts: &McOptions, per_sample: F) -> Result<McEstimate>
where
    F: Fn(u64) -> Result<Complex64> + Sync,
{
    let n = opts.samples;
    let (sum, sum_sq) = if opts.deterministic {
        let values: Vec<Complex64> = (0..n as u64).into_par_iter().map(&per_sample).collect::<Result<_>>()?;
        values.iter().fold((Complex64::new(0.0, 0.0), 0.0), |(s, q), v| (s + v, q + v.norm_sqr()))
    } else {
        (0..n as u64)
            .into_par_iter()
            .map(|k| per_sample(k).map(|v| (v, v.norm_sqr())))
            .try_reduce(|| (Complex64::new(0.0, 0.0), 0.0), |a, b| Ok((a.0 + b.0, a.1 + b.1)))?
    };
    let mean = sum / n as f64;
    let var = ((sum_sq - n as f64 * mean.norm_sqr()) / (n as f64 - 1.0)).max(0.0);
    Ok(McEstimate { mean, stderr: (var / n as f64).sqrt(), samples: n, seed: opts.seed })
}

fn unit_vector(n: usize, i: usize) -> Vec<Complex64> {
    let mut e = vec![Complex64::new(0.0, 0.0); n];
    e[i] = Complex64::new(1.0, 0.0);
    e
}

/// `⟨0|(H − z)^{−1}|0⟩` for one sample.
pub fn resolvent_element(bx: &FiniteBox, lambda: f64, sample: &DisorderSample, z: Complex64) -> Result<Complex64> {
    let origin = bx.index_of(Site::origin(bx.dim())).expect("origin lies in every box");
    let x = ShiftedSolver::new(bx, lambda, sample, z)?.solve(&unit_vector(bx.n_sites(), origin))?;
    Ok(x[origin])
}

/// Mean and standard error of `⟨0|(H − z)^{−1}|0⟩`.
pub fn mc_green(bx: &FiniteBox, lambda: f64, g: &AnalyticDensity, z: Complex64, opts: &McOptions) -> Result<McEstimate> {
    if z.im == 0.0 {
        return Err(Error::RealAxisInput);
    }
    check_run(bx, opts)?;
    estimate(opts, |k| {
        let sample = DisorderSample::draw(bx, g, opts.seed, k)?;
        resolvent_element(bx, lambda, &sample, z)
    })
}

/// `(A v)(x) = Σ_y ⟨x|A|y⟩ v(y)`, dropping terms that leave an open box.
pub fn apply_observable(bx: &FiniteBox, p: &CovariantPolynomial, sample: &DisorderSample, v: &[Complex64]) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); v.len()];
    for (i, &x) in bx.sites().iter().enumerate() {
        for (w, a) in &p.terms {
            let Some(j) = bx.index_of(x + a.displacement) else { continue };
            let mut coef = *w;
            let mut inside = true;
            for (off, c) in &a.coefficients {
                match bx.index_of(x + *off) {
                    Some(k) => coef *= coefficient_value(c, sample.potentials[k]),
                    None => {
                        inside = false;
                        break;
                    }
                }
            }
            if inside {
                out[i] += coef * v[j];
            }
        }
    }
    out
}

fn coefficient_value(c: &CoefficientFn, v: f64) -> Complex64 {
    c.value(Complex64::new(v, 0.0))
}

/// `⟨0| Π_k (H − z_k)^{−1} A_k |0⟩` for one sample, by N sequential solves.
pub fn npoint_element(
    bx: &FiniteBox,
    lambda: f64,
    observables: &[CovariantPolynomial],
    sample: &DisorderSample,
    z: &[Complex64],
) -> Result<Complex64> {
    let origin = bx.index_of(Site::origin(bx.dim())).expect("origin lies in every box");
    let mut v = unit_vector(bx.n_sites(), origin);
    for (a, &zk) in observables.iter().zip(z).rev() {
        v = apply_observable(bx, a, sample, &v);
        v = ShiftedSolver::new(bx, lambda, sample, zk)?.solve(&v)?;
    }
    Ok(v[origin])
}

pub fn mc_npoint(
    bx: &FiniteBox,
    lambda: f64,
    g: &AnalyticDensity,
    observables: &[CovariantPolynomial],
    z: &[Complex64],
    opts: &McOptions,
) -> Result<McEstimate> {
    if observables.len() != z.len() || z.is_empty() {
        return Err(Error::InvalidArgument(format!("{} observables for {} points", observables.len(), z.len())));
    }
    if z.iter().any(|w| w.im == 0.0) {
        return Err(Error::RealAxisInput);
    }
    check_run(bx, opts)?;
    estimate(opts, |k| {
        let sample = DisorderSample::draw(bx, g, opts.seed, k)?;
        npoint_element(bx, lambda, observables, &sample, z)
    })
}

/// Spectral weights `(λ_k, |ψ_k(0)|²)` of the origin.
pub fn origin_spectral_measure(bx: &FiniteBox, lambda: f64, sample: &DisorderSample) -> Vec<(f64, f64)> {
    let origin = bx.index_of(Site::origin(bx.dim())).expect("origin lies in every box");
    let eig = SymmetricEigen::new(build_hamiltonian(bx, lambda, sample));
    eig.eigenvalues.iter().enumerate().map(|(k, &e)| (e, eig.eigenvectors[(origin, k)].powi(2))).collect()
}

/// `(1/π) E[Im ⟨0|(H − E − iε)^{−1}|0⟩]` on a grid, as (mean, stderr) pairs.
pub fn smoothed_dos(
    bx: &FiniteBox,
    lambda: f64,
    g: &AnalyticDensity,
    eps: f64,
    grid: &[f64],
    opts: &McOptions,
) -> Result<Vec<(f64, f64)>> {
    if !(eps > 0.0) {
        return Err(Error::InvalidArgument(format!("smoothing ε = {eps} must be positive")));
    }
    check_run(bx, opts)?;
    let per_sample = |k: u64| -> Result<Vec<f64>> {
        let sample = DisorderSample::draw(bx, g, opts.seed, k)?;
        if bx.n_sites() <= DENSE_LIMIT {
            let measure = origin_spectral_measure(bx, lambda, &sample);
            Ok(grid
                .iter()
                .map(|&e| measure.iter().map(|&(l, w)| w * eps / ((l - e).powi(2) + eps * eps)).sum::<f64>() / PI)
                .collect())
        } else {
            grid.iter()
                .map(|&e| Ok(resolvent_element(bx, lambda, &sample, Complex64::new(e, eps))?.im / PI))
                .collect()
        }
    };
    let values: Vec<Vec<f64>> = (0..opts.samples as u64).into_par_iter().map(per_sample).collect::<Result<_>>()?;
    let n = opts.samples as f64;
    Ok((0..grid.len())
        .map(|i| {
            let mean = values.iter().map(|v| v[i]).sum::<f64>() / n;
            let var = values.iter().map(|v| (v[i] - mean).powi(2)).sum::<f64>() / (n - 1.0);
            (mean, (var / n).sqrt())
        })
        .collect())
}

/// `#{eigenvalues of H ≤ E} / |Λ|`.
pub fn ids_count(bx: &FiniteBox, lambda: f64, sample: &DisorderSample, e: f64) -> f64 {
    let eig = SymmetricEigen::new(build_hamiltonian(bx, lambda, sample)).eigenvalues;
    eig.iter().filter(|&&x| x <= e).count() as f64 / bx.n_sites() as f64
}

/// A one-dimensional integrand on `[lower, upper]` (either end may be
/// infinite) with optional interior break points.
pub struct ReferenceIntegrand<'a> {
    pub f: &'a (dyn Fn(f64) -> Complex64 + Sync),
    pub lower: f64,
    pub upper: f64,
    pub breaks: Vec<f64>,
}

/// Adaptive Gauss–Kronrod reference value, required to reach `target_tol`
/// (absolute, or relative to the value when larger).
pub fn quad_reference(spec: &ReferenceIntegrand<'_>, target_tol: f64) -> Result<Complex64> {
    let opts = QuadOptions { abs_tol: target_tol / 4.0, rel_tol: 0.0, max_intervals: 50_000 };
    let f = spec.f;
    let (a, b) = (spec.lower, spec.upper);
    if !(a < b) {
        return Err(Error::InvalidArgument(format!("empty range [{a}, {b}]")));
    }
    let mut pieces = Vec::new();
    match (a.is_finite(), b.is_finite()) {
        (true, true) => pieces.push(quad::adaptive(f, a, b, &spec.breaks, opts)),
        (true, false) => {
            let cut = spec.breaks.iter().copied().fold(a + 1.0, f64::max);
            pieces.push(quad::adaptive(f, a, cut, &spec.breaks, opts));
            pieces.push(quad::upper_tail(f, cut, opts));
        }
        (false, true) => {
            let cut = spec.breaks.iter().copied().fold(b - 1.0, f64::min);
            pieces.push(quad::lower_tail(f, cut, opts));
            pieces.push(quad::adaptive(f, cut, b, &spec.breaks, opts));
        }
        (false, false) => {
            let lo = spec.breaks.iter().copied().fold(-1.0, f64::min);
            let hi = spec.breaks.iter().copied().fold(1.0, f64::max);
            pieces.push(quad::lower_tail(f, lo, opts));
            pieces.push(quad::adaptive(f, lo, hi, &spec.breaks, opts));
            pieces.push(quad::upper_tail(f, hi, opts));
        }
    }
    let total = pieces.iter().fold(quad::QuadResult { value: Complex64::new(0.0, 0.0), error: 0.0, evaluations: 0 }, |acc, p| {
        quad::QuadResult { value: acc.value + p.value, error: acc.error + p.error, evaluations: acc.evaluations + p.evaluations }
    });
    check_tolerance(&total, target_tol)?;
    Ok(total.value)
}
