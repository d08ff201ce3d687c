//! Python bindings: densities, the Cauchy-type integrals, the series driver
//! and the Monte Carlo oracle.

use anderson_corr::cauchy1;
use anderson_corr::cauchyn::{self, EnergyVector, MultiIndex, SignVector};
use anderson_corr::covariant::{CovariantPolynomial, ObservableSpec};
use anderson_corr::expansion::{self, BoundMode, ExpansionConfig, SeriesValue};
use anderson_corr::identities;
use anderson_corr::oracle::{self, Boundary, FiniteBox, McOptions};
use anderson_corr::walks;
use anderson_corr::{AnalyticDensity, Complex64, Error, HalfPlaneSign};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

fn to_py(e: Error) -> PyErr {
    match e {
        Error::SolverFailure(_) | Error::ToleranceNotMet { .. } | Error::ResourceLimit { .. } => {
            PyRuntimeError::new_err(e.to_string())
        }
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn sign(c: char) -> PyResult<HalfPlaneSign> {
    HalfPlaneSign::from_char(c).ok_or_else(|| PyValueError::new_err(format!("sign must be '+' or '-', got {c:?}")))
}

/// Single-site density analytic in a strip, e.g. `Density("gaussian:sigma2=1,r=1")`.
#[pyclass(name = "Density", frozen, from_py_object)]
#[derive(Clone)]
struct PyDensity(AnalyticDensity);

#[pymethods]
impl PyDensity {
    #[new]
    fn new(spec: &str) -> PyResult<Self> {
        spec.parse().map(PyDensity).map_err(to_py)
    }

    #[staticmethod]
    fn gaussian(sigma2: f64, r: f64) -> PyResult<Self> {
        AnalyticDensity::gaussian(sigma2, r).map(PyDensity).map_err(to_py)
    }

    #[staticmethod]
    fn cauchy(a: f64, r: f64) -> PyResult<Self> {
        AnalyticDensity::cauchy(a, r).map(PyDensity).map_err(to_py)
    }

    /// g(z) for `|Im z| < r`.
    fn __call__(&self, z: Complex64) -> PyResult<Complex64> {
        self.0.eval(z).map_err(to_py)
    }

    #[getter]
    fn strip_radius(&self) -> f64 {
        self.0.strip_radius()
    }

    /// Strip norm ‖g‖_r.
    #[getter]
    fn norm(&self) -> f64 {
        self.0.norm()
    }

    fn __repr__(&self) -> String {
        format!("Density('{}')", self.0)
    }
}

/// Result of a truncated series evaluation.
#[pyclass(name = "Series", frozen)]
struct PySeries(SeriesValue);

#[pymethods]
impl PySeries {
    #[getter]
    fn value(&self) -> Complex64 {
        self.0.value
    }

    #[getter]
    fn order(&self) -> usize {
        self.0.order
    }

    /// `inf` when the bound is not certified at these parameters.
    #[getter]
    fn tail_bound(&self) -> f64 {
        self.0.tail_bound
    }

    #[getter]
    fn partial_sums(&self) -> Vec<Complex64> {
        self.0.partial_sums.clone()
    }

    #[getter]
    fn tail_bounds(&self) -> Vec<f64> {
        self.0.tail_bounds.clone()
    }

    #[getter]
    fn energies(&self) -> Vec<Complex64> {
        self.0.energies.clone()
    }

    #[getter]
    fn sigmas(&self) -> String {
        SignVector(self.0.sigmas.clone()).to_string()
    }

    /// `Im value / π`.
    #[getter]
    fn dos(&self) -> f64 {
        self.0.dos()
    }

    fn to_json(&self) -> String {
        serde_json::to_string(&self.0.record()).expect("record is serialisable")
    }

    fn __repr__(&self) -> String {
        format!("Series(value={}, order={}, tail_bound={:e})", self.0.value, self.0.order, self.0.tail_bound)
    }
}

/// Random-walk expansion at fixed dimension, coupling, order and density.
#[pyclass(name = "Expansion", frozen)]
struct PyExpansion(ExpansionConfig);

#[pymethods]
impl PyExpansion {
    #[new]
    #[pyo3(signature = (d, lam, order, density, observables=None, gap=None, delta=None, certified=false))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        d: usize,
        lam: f64,
        order: usize,
        density: &PyDensity,
        observables: Option<Vec<String>>,
        gap: Option<f64>,
        delta: Option<f64>,
        certified: bool,
    ) -> PyResult<Self> {
        let specs = observables.unwrap_or_else(|| vec!["identity".into()]);
        let polys = specs
            .iter()
            .map(|s| s.parse::<ObservableSpec>().and_then(|o| o.to_polynomial(d, lam)))
            .collect::<Result<Vec<CovariantPolynomial>, Error>>()
            .map_err(to_py)?;
        let mut cfg = ExpansionConfig::new(d, lam, order, density.0.clone(), polys);
        cfg.gap = gap;
        cfg.delta = delta;
        cfg.mode = if certified { BoundMode::Certified } else { BoundMode::Exploratory };
        cfg.validate().map_err(to_py)?;
        Ok(PyExpansion(cfg))
    }

    /// Density of states at energy `e` (boundary value from the upper half-plane).
    fn dos(&self, py: Python<'_>, e: f64) -> PyResult<PySeries> {
        py.detach(|| expansion::dos_series(&self.0, HalfPlaneSign::Plus, e)).map(PySeries).map_err(to_py)
    }

    /// Off-axis N-point function at the points `z`.
    fn green(&self, py: Python<'_>, z: Vec<Complex64>) -> PyResult<PySeries> {
        py.detach(|| expansion::green_series(&self.0, &z)).map(PySeries).map_err(to_py)
    }

    /// Boundary value for a sign pattern such as `"+-"` at real energies.
    fn boundary(&self, py: Python<'_>, sigma: &str, energies: Vec<f64>) -> PyResult<PySeries> {
        let sigma: SignVector = sigma.parse().map_err(to_py)?;
        let e = EnergyVector::new(energies);
        py.detach(|| expansion::npoint_boundary_series(&self.0, &sigma, &e)).map(PySeries).map_err(to_py)
    }

    /// Radius constant a₀; the boundary series converges for `a₀|λ| < Δ`.
    fn radius_a0(&self) -> PyResult<f64> {
        expansion::radius_a0(&self.0).map_err(to_py)
    }

    #[getter]
    fn points(&self) -> usize {
        self.0.n_points()
    }
}

/// I_n(z) = ∫ g(v) (v − z)^{−n−1} dv.
#[pyfunction]
fn i_n(density: &PyDensity, n: usize, z: Complex64) -> PyResult<Complex64> {
    cauchy1::i_n(&density.0, n, z).map_err(to_py)
}

/// Boundary value I_0^σ(E).
#[pyfunction]
fn i0_boundary(density: &PyDensity, sigma: char, e: f64) -> PyResult<Complex64> {
    Ok(cauchy1::i0_boundary(&density.0, sign(sigma)?, e))
}

/// J_n(z̲) = ∫ g(v) Π_i (v − z_i)^{−n_i−1} dv.
#[pyfunction]
fn j_n(density: &PyDensity, n: Vec<usize>, z: Vec<Complex64>) -> PyResult<Complex64> {
    cauchyn::j_n(&density.0, &MultiIndex::new(n), &z).map_err(to_py)
}

/// Boundary value J_n^σ(E̲) for distinct real energies.
#[pyfunction]
fn j_sigma(density: &PyDensity, n: Vec<usize>, sigma: &str, energies: Vec<f64>) -> PyResult<Complex64> {
    let sigma: SignVector = sigma.parse().map_err(to_py)?;
    cauchyn::j_sigma_direct(&density.0, &MultiIndex::new(n), &sigma, &EnergyVector::new(energies)).map_err(to_py)
}

/// Number of closed walks of length `n` on Z^d starting at the origin.
#[pyfunction]
fn count_walks(d: usize, n: usize) -> PyResult<u128> {
    walks::count_walks(d, n).map_err(to_py)
}

/// Monte Carlo estimate of E⟨0|(H − z)^{−1}|0⟩ on the box [−L, L]^d; returns `(mean, stderr)`.
#[pyfunction]
#[pyo3(signature = (d, box_half_width, lam, density, z, samples=2000, seed=0x5eed, margin=8, periodic=false))]
#[allow(clippy::too_many_arguments)]
fn mc_green(
    py: Python<'_>,
    d: usize,
    box_half_width: usize,
    lam: f64,
    density: &PyDensity,
    z: Complex64,
    samples: usize,
    seed: u64,
    margin: usize,
    periodic: bool,
) -> PyResult<(Complex64, f64)> {
    let boundary = if periodic { Boundary::Periodic } else { Boundary::Open };
    let bx = FiniteBox::new(d, box_half_width, boundary).map_err(to_py)?;
    let opts = McOptions { samples, seed, margin, deterministic: true };
    let est = py.detach(|| oracle::mc_green(&bx, lam, &density.0, z, &opts)).map_err(to_py)?;
    Ok((est.mean, est.stderr))
}

/// Runs the identity suite; one `(group, name, measured, tolerance, passed)` tuple per check.
#[pyfunction]
#[pyo3(signature = (density, seed=0x5eed))]
fn run_identities(py: Python<'_>, density: &PyDensity, seed: u64) -> Vec<(String, String, f64, f64, bool)> {
    py.detach(|| identities::run_suite(&density.0, seed))
        .into_iter()
        .map(|c| (c.group, c.name, c.measured, c.tolerance, c.passed))
        .collect()
}

#[pymodule]
fn anderson_corr_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyDensity>()?;
    m.add_class::<PySeries>()?;
    m.add_class::<PyExpansion>()?;
    m.add_function(wrap_pyfunction!(i_n, m)?)?;
    m.add_function(wrap_pyfunction!(i0_boundary, m)?)?;
    m.add_function(wrap_pyfunction!(j_n, m)?)?;
    m.add_function(wrap_pyfunction!(j_sigma, m)?)?;
    m.add_function(wrap_pyfunction!(count_walks, m)?)?;
    m.add_function(wrap_pyfunction!(mc_green, m)?)?;
    m.add_function(wrap_pyfunction!(run_identities, m)?)?;
    Ok(())
}
