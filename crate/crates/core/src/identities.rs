//! Self-consistency suite: each check compares two independent evaluation
//! routes of the same quantity (or a value against its bound) and records
//! the worst discrepancy against a fixed tolerance.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::time::Instant;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cauchy1::{i0_bound, i0_boundary, i_n, i_n_by_derivative, HalfPlaneSign};
use crate::cauchyn::{
    j_n, j_partial_fraction, j_sigma_decomposed, j_sigma_direct, restricted_multiindex_closed_form,
    restricted_multiindex_sum, simplex_pole_product, Compositions, EnergyVector, MultiIndex, SignVector,
};
use crate::densities::{AnalyticDensity, StripFunction};
use crate::error::Result;
use crate::quad::extrapolate_to_zero;
use crate::walks::{count_walks, count_walks_with_budget, enumerate_npaths, visit_counts, Site};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub group: String,
    pub name: String,
    /// Worst observed discrepancy (or bound violation measure).
    pub measured: f64,
    pub tolerance: f64,
    pub passed: bool,
    pub cases: usize,
    pub seconds: f64,
}

struct Tracker {
    worst: f64,
    cases: usize,
}

impl Tracker {
    fn new() -> Self {
        Tracker { worst: 0.0, cases: 0 }
    }

    fn record(&mut self, err: f64) {
        self.cases += 1;
        // NaN counts as a failure
        if !(err <= self.worst) {
            self.worst = if err.is_nan() { f64::INFINITY } else { err };
        }
    }
}

fn run(group: &str, name: &str, tolerance: f64, body: impl FnOnce(&mut Tracker) -> Result<()>) -> CheckOutcome {
    let start = Instant::now();
    let mut t = Tracker::new();
    let ok = body(&mut t).is_ok();
    let measured = if ok { t.worst } else { f64::INFINITY };
    CheckOutcome {
        group: group.into(),
        name: name.into(),
        measured,
        tolerance,
        passed: ok && measured <= tolerance,
        cases: t.cases,
        seconds: start.elapsed().as_secs_f64(),
    }
}

fn rel(a: Complex64, b: Complex64) -> f64 {
    (a - b).norm() / b.norm().max(1e-300)
}

fn off_axis_points(rng: &mut ChaCha8Rng, count: usize) -> Vec<Complex64> {
    (0..count)
        .map(|_| {
            let im: f64 = rng.random_range(0.1..2.0) * if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            Complex64::new(rng.random_range(-3.0..3.0), im)
        })
        .collect()
}

/// Well-separated off-axis points.
fn separated_points(rng: &mut ChaCha8Rng, count: usize, sep: f64) -> Vec<Complex64> {
    loop {
        let z = off_axis_points(rng, count);
        if z.iter().enumerate().all(|(i, a)| z[i + 1..].iter().all(|b| (a - b).norm() >= sep)) {
            return z;
        }
    }
}

/// Separated real energies.
fn separated_energies(rng: &mut ChaCha8Rng, count: usize, gap: f64) -> Vec<f64> {
    loop {
        let e: Vec<f64> = (0..count).map(|_| rng.random_range(-2.0..2.0)).collect();
        if EnergyVector::new(e.clone()).min_gap() >= gap {
            return e;
        }
    }
}

fn sign_patterns(len: usize) -> Vec<SignVector> {
    (0..1usize << len)
        .map(|mask| {
            SignVector(
                (0..len)
                    .map(|k| if mask >> k & 1 == 0 { HalfPlaneSign::Plus } else { HalfPlaneSign::Minus })
                    .collect(),
            )
        })
        .collect()
}

/// Closed walks of length `n` on Z^d by dynamic programming over positions.
pub fn closed_walk_count_dp(d: usize, n: usize) -> u128 {
    let mut layer: HashMap<Vec<i32>, u128> = HashMap::new();
    layer.insert(vec![0; d], 1);
    for _ in 0..n {
        let mut next: HashMap<Vec<i32>, u128> = HashMap::new();
        for (x, c) in &layer {
            for axis in 0..d {
                for s in [-1, 1] {
                    let mut y = x.clone();
                    y[axis] += s;
                    *next.entry(y).or_default() += c;
                }
            }
        }
        layer = next;
    }
    layer.get(&vec![0; d]).copied().unwrap_or(0)
}

fn binomial_u128(n: usize, k: usize) -> u128 {
    (0..k).fold(1u128, |acc, j| acc * (n - j) as u128 / (j as u128 + 1))
}

fn fit_slope(p: &[(f64, f64)]) -> f64 {
    let n = p.len() as f64;
    let mx = p.iter().map(|q| q.0).sum::<f64>() / n;
    let my = p.iter().map(|q| q.1).sum::<f64>() / n;
    let sxy: f64 = p.iter().map(|q| (q.0 - mx) * (q.1 - my)).sum();
    let sxx: f64 = p.iter().map(|q| (q.0 - mx).powi(2)).sum();
    sxy / sxx
}

/// The ε ladder used to extrapolate off-axis values to the real axis.
pub const EPS_LADDER: [f64; 7] = [0.1, 0.05, 0.025, 0.0125, 0.00625, 0.003125, 0.0015625];

/// Runs every check on the density `g` with RNG seed `seed`.
pub fn run_suite(g: &AnalyticDensity, seed: u64) -> Vec<CheckOutcome> {
    let mut out = Vec::new();
    out.extend(integral_checks(g, seed));
    out.extend(boundary_checks(g, seed));
    out.extend(singularity_checks(g));
    out.extend(walk_checks(seed));
    out
}

pub fn integral_checks(g: &AnalyticDensity, seed: u64) -> Vec<CheckOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let zs = off_axis_points(&mut rng, 20);
    let mut out = vec![run("integrals", "one-point chain I_n = I_0(g^(n))/n!", 1e-9, |t| {
        for &z in &zs {
            for n in 0..=6 {
                t.record(rel(i_n_by_derivative(g, n, z)?, i_n(g, n, z)?));
            }
        }
        Ok(())
    })];
    out.push(run("integrals", "partial fractions vs direct J_n", 1e-9, |t| {
        for len in 2..=3 {
            for _ in 0..6 {
                let z = separated_points(&mut rng, len, 0.5);
                for total in 0..=3 {
                    for n in Compositions::new(len, total) {
                        t.record(rel(j_partial_fraction(g, &n, &z)?, j_n(g, &n, &z)?));
                    }
                }
            }
        }
        Ok(())
    }));
    out.push(run("integrals", "simplex pole-product identity", 1e-10, |t| {
        for len in 1..=4 {
            for _ in 0..3 {
                let z: Vec<Complex64> = (0..len).map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(0.2..1.5))).collect();
                let v = Complex64::new(rng.random_range(-2.0..2.0), rng.random_range(-1.5..-0.2));
                for total in 0..=4 {
                    for n in Compositions::new(len, total) {
                        let (lhs, rhs) = simplex_pole_product(&n, &z, v)?;
                        t.record(rel(rhs, lhs));
                    }
                }
            }
        }
        Ok(())
    }));
    out.push(run("integrals", "restricted multi-index sum closed form", 0.0, |t| {
        for len in 1..=4 {
            for total in 0..=6 {
                for n in Compositions::new(len, total) {
                    for r in 0..=6 {
                        let a = restricted_multiindex_sum(&n, r)?;
                        let b = restricted_multiindex_closed_form(&n, r)?;
                        t.record(if a == b { 0.0 } else { 1.0 });
                    }
                }
            }
        }
        Ok(())
    }));
    out
}

pub fn boundary_checks(g: &AnalyticDensity, seed: u64) -> Vec<CheckOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xb0);
    let grid: Vec<f64> = (0..200).map(|k| -4.0 + 8.0 * k as f64 / 199.0).collect();
    let mut out = vec![run("boundary", "Im I_0^+(E) = π g(E)", 1e-10, |t| {
        for &e in &grid {
            let v = i0_boundary(g, HalfPlaneSign::Plus, e);
            t.record((v.im - PI * g.value(Complex64::new(e, 0.0)).re).abs());
        }
        Ok(())
    })];
    out.push(run("boundary", "sup bound on I_0^±", 0.0, |t| {
        let bound = i0_bound(g);
        for &e in &grid {
            for s in [HalfPlaneSign::Plus, HalfPlaneSign::Minus] {
                t.record((i0_boundary(g, s, e).norm() - bound).max(0.0));
            }
        }
        Ok(())
    }));
    let mut cases = Vec::new();
    for len in 2..=3 {
        for _ in 0..2 {
            let e = EnergyVector::new(separated_energies(&mut rng, len, 0.5));
            for total in 0..=2 {
                for n in Compositions::new(len, total) {
                    cases.push((n, e.clone()));
                }
            }
        }
    }
    out.push(run("boundary", "J^σ gap formula vs regular + singular split", 1e-8, |t| {
        for (n, e) in &cases {
            for s in sign_patterns(e.len()) {
                t.record(rel(j_sigma_decomposed(g, n, &s, e)?, j_sigma_direct(g, n, &s, e)?));
            }
        }
        Ok(())
    }));
    out.push(run("boundary", "ε → 0 limit of J_n agrees with J^σ", 1e-6, |t| {
        for (n, e) in cases.iter().step_by(3) {
            for s in sign_patterns(e.len()) {
                let samples = EPS_LADDER
                    .iter()
                    .map(|&eps| {
                        let z: Vec<Complex64> =
                            e.entries().iter().zip(&s.0).map(|(&x, sg)| Complex64::new(x, sg.value() * eps)).collect();
                        Ok((eps, j_n(g, n, &z)?))
                    })
                    .collect::<Result<Vec<_>>>()?;
                let lim = extrapolate_to_zero(&samples);
                t.record(rel(lim, j_sigma_direct(g, n, &s, e)?));
                t.record(rel(lim, j_sigma_decomposed(g, n, &s, e)?));
            }
        }
        Ok(())
    }));
    out
}

/// Slope of `log|J^σ_{(0,0)}(0, h)|` against `log h` for `h ∈ [1e-3, 1e-1]`,
/// and the relative spread of `|J|` over the same range.
pub fn singularity_profile(g: &AnalyticDensity, sigma: &SignVector) -> Result<(f64, f64)> {
    let hs: Vec<f64> = (0..9).map(|k| 1e-3 * 10f64.powf(k as f64 / 4.0)).collect();
    let n = MultiIndex::new(vec![0, 0]);
    let vals = hs
        .iter()
        .map(|&h| Ok(j_sigma_decomposed(g, &n, sigma, &EnergyVector::new(vec![0.0, h]))?.norm()))
        .collect::<Result<Vec<f64>>>()?;
    let pts: Vec<(f64, f64)> = hs.iter().zip(&vals).map(|(h, v)| (h.ln(), v.ln())).collect();
    let (lo, hi) = vals.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &v| (a.min(v), b.max(v)));
    Ok((fit_slope(&pts), (hi - lo) / hi))
}

pub fn singularity_checks(g: &AnalyticDensity) -> Vec<CheckOutcome> {
    vec![
        run("singularity", "opposite signs: log-log slope −1", 0.05, |t| {
            let (slope, _) = singularity_profile(g, &"+-".parse()?)?;
            t.record((slope + 1.0).abs());
            Ok(())
        }),
        run("singularity", "equal signs: bounded variation", 0.1, |t| {
            let (_, spread) = singularity_profile(g, &"++".parse()?)?;
            t.record(spread);
            Ok(())
        }),
    ]
}

pub fn walk_checks(seed: u64) -> Vec<CheckOutcome> {
    let mut out = vec![run("walks", "d=1 closed walks = C(n, n/2)", 0.0, |t| {
        for n in 0..=12 {
            let expected = if n % 2 == 0 { binomial_u128(n, n / 2) } else { 0 };
            t.record(if count_walks(1, n)? == expected { 0.0 } else { 1.0 });
        }
        Ok(())
    })];
    out.push(run("walks", "d=2 closed walks vs dynamic programming", 0.0, |t| {
        for n in 0..=8 {
            t.record(if count_walks(2, n)? == closed_walk_count_dp(2, n) { 0.0 } else { 1.0 });
        }
        Ok(())
    }));
    out.push(run("walks", "counts ≤ (2d)^n", 0.0, |t| {
        for d in 1..=3 {
            for n in 0..=10 {
                t.record(if count_walks_with_budget(d, n, 1 << 30)? <= (2 * d as u128).pow(n as u32) { 0.0 } else { 1.0 });
            }
        }
        Ok(())
    }));
    out.push(run("walks", "visit-count conservation Σ|n(u)| = |Γ| + N", 0.0, |t| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x3a1c);
        while t.cases < 1000 {
            let d = rng.random_range(1..=2usize);
            let points = rng.random_range(1..=3usize);
            let offsets: Vec<Site> = (0..points)
                .map(|_| {
                    if rng.random_bool(0.3) {
                        Site::origin(d)
                    } else {
                        Site::unit(d, rng.random_range(0..d), if rng.random_bool(0.5) { 1 } else { -1 })
                    }
                })
                .collect();
            let n = rng.random_range(0..=5usize);
            for family in enumerate_npaths(d, &offsets, n)? {
                let family = family?;
                if rng.random_bool(0.2) {
                    let total: usize = visit_counts(&family).values().map(|m| m.abs()).sum();
                    t.record(if total == family.total_length() + points { 0.0 } else { 1.0 });
                }
            }
        }
        Ok(())
    }));
    out
}
