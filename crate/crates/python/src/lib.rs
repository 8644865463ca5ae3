//! Python bindings for `sbwave`.
//!
//! Structured results come back as plain dicts (through their JSON form);
//! profiles come back as lists of floats.

use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use serde::Serialize;

use sbwave::cnoidal;
use sbwave::continuation::{continue_branch as run_branch, ContinuationConfig};
use sbwave::elliptic::{self, EllipticModulus};
use sbwave::estimate_probe::{self, CounterexampleCase};
use sbwave::functionals;
use sbwave::hill_spectra::{self, OperatorKind, Parity, Potential};
use sbwave::orbital::{self, ExperimentConfig, Perturbation};
use sbwave::Error;

fn err(e: Error) -> PyErr {
    match e {
        Error::Io(io) => PyIOError::new_err(io.to_string()),
        e if e.is_numeric() => PyRuntimeError::new_err(e.to_string()),
        e => PyValueError::new_err(e.to_string()),
    }
}

fn to_py<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let s = serde_json::to_string(value).map_err(|e| PyValueError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (s,))
}

/// A cnoidal standing-wave profile on a Fourier grid.
#[pyclass(name = "CnoidalWave", module = "sbwave_py")]
struct CnoidalWave {
    inner: cnoidal::WaveProfile,
}

#[pymethods]
impl CnoidalWave {
    #[new]
    #[pyo3(signature = (omega, period, n_modes = 256))]
    fn new(omega: f64, period: f64, n_modes: usize) -> PyResult<Self> {
        Ok(Self { inner: cnoidal::build_wave(omega, period, n_modes).map_err(err)? })
    }

    #[getter]
    fn omega(&self) -> f64 {
        self.inner.omega()
    }

    #[getter]
    fn period(&self) -> f64 {
        self.inner.params.period
    }

    #[getter]
    fn k(&self) -> f64 {
        self.inner.params.k.k()
    }

    fn params<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.inner.params)
    }

    fn xs(&self) -> Vec<f64> {
        self.inner.grid().xs()
    }

    fn values(&self) -> Vec<f64> {
        self.inner.field.real_values()
    }

    fn residual_sup(&self) -> PyResult<f64> {
        self.inner.residual_sup().map_err(err)
    }

    /// Lowest `m` eigenvalues and inertia of one linearized operator about this wave.
    #[pyo3(signature = (kind, m = 5))]
    fn spectrum<'py>(&self, py: Python<'py>, kind: &str, m: usize) -> PyResult<Bound<'py, PyAny>> {
        let kind: OperatorKind = kind.parse().map_err(err)?;
        let pot = Potential::from_wave(&self.inner);
        let spec = hill_spectra::spectrum_of(kind, &pot, m, Parity::Full).map_err(err)?;
        to_py(py, &spec)
    }

    fn __repr__(&self) -> String {
        format!("CnoidalWave(omega={}, L={}, k={:.6})", self.omega(), self.period(), self.k())
    }
}

/// `(K(k), E(k))`.
#[pyfunction]
fn complete_elliptic(k: f64) -> PyResult<(f64, f64)> {
    let m = EllipticModulus::new(k).map_err(err)?;
    let p = elliptic::complete_elliptic(m);
    Ok((p.K, p.E))
}

/// `(sn, cn, dn)` at `x` with modulus `k`.
#[pyfunction]
fn jacobi(x: f64, k: f64) -> PyResult<(f64, f64, f64)> {
    elliptic::jacobi(x, EllipticModulus::new(k).map_err(err)?).map_err(err)
}

#[pyfunction]
fn wave_params<'py>(py: Python<'py>, omega: f64, period: f64) -> PyResult<Bound<'py, PyAny>> {
    to_py(py, &cnoidal::wave_params(omega, period).map_err(err)?)
}

/// Convexity index `d″(ω)` with its finite-difference cross-check.
#[pyfunction]
fn d_second<'py>(py: Python<'py>, omega: f64, period: f64) -> PyResult<Bound<'py, PyAny>> {
    to_py(py, &functionals::d_second(omega, period).map_err(err)?)
}

/// Perturbed standing-wave run; returns the orbital-distance record.
#[pyfunction]
#[pyo3(signature = (eps, t_final = 50.0, seed = 0, period = 13.0, n_modes = 128, dt = 2e-3, tangent = false))]
#[allow(clippy::too_many_arguments)]
fn stability_experiment<'py>(
    py: Python<'py>,
    eps: f64,
    t_final: f64,
    seed: u64,
    period: f64,
    n_modes: usize,
    dt: f64,
    tangent: bool,
) -> PyResult<Bound<'py, PyAny>> {
    let d = ExperimentConfig::default();
    let cfg = ExperimentConfig {
        period,
        n_modes,
        eps,
        t_final,
        seed,
        perturbation: if tangent { Perturbation::BranchTangent } else { Perturbation::Random },
        solver: sbwave::evolution::SolverConfig { dt, ..d.solver },
        ..d
    };
    let r = py.detach(|| orbital::stability_experiment(&cfg)).map_err(err)?;
    to_py(py, &r)
}

/// Newton continuation of the even solution pairs; returns omegas, residuals and σ_min.
#[pyfunction]
#[pyo3(signature = (omega_min = 0.9, omega_max = 1.1, step = 0.01, period = 13.0, n_modes = 128))]
fn continue_branch<'py>(
    py: Python<'py>,
    omega_min: f64,
    omega_max: f64,
    step: f64,
    period: f64,
    n_modes: usize,
) -> PyResult<Bound<'py, PyAny>> {
    let cfg = ContinuationConfig { period, n_modes, omega_min, omega_max, step, ..Default::default() };
    let br = py.detach(|| run_branch(&cfg)).map_err(err)?;
    let summary = serde_json::json!({
        "omegas": br.pairs.iter().map(|p| p.omega).collect::<Vec<_>>(),
        "residuals": br.pairs.iter().map(|p| p.residual_norm).collect::<Vec<_>>(),
        "sigma_min_at_one": br.sigma_min_at_one,
        "aborts": br.aborts,
    });
    to_py(py, &summary)
}

/// Fitted growth exponent of a sharpness counterexample (`case` is "i", "ii" or "iii").
#[pyfunction]
#[pyo3(signature = (case, k, s, a = 0.3, b = 0.6, n_list = vec![8, 16, 32, 64, 128]))]
fn counterexample_slope<'py>(
    py: Python<'py>,
    case: &str,
    k: f64,
    s: f64,
    a: f64,
    b: f64,
    n_list: Vec<i64>,
) -> PyResult<Bound<'py, PyAny>> {
    let case: CounterexampleCase = case.parse().map_err(err)?;
    to_py(py, &estimate_probe::counterexample_slope(case, k, s, a, b, &n_list).map_err(err)?)
}

/// `(sup, inf)` of the modulation-equivalence ratio on a grid.
#[pyfunction]
fn lemma33_sup(x_max: f64, y_max: f64, n_points: usize) -> PyResult<(f64, f64)> {
    estimate_probe::lemma33_sup(x_max, y_max, n_points).map_err(err)
}

#[pymodule]
pub fn sbwave_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<CnoidalWave>()?;
    m.add_function(wrap_pyfunction!(complete_elliptic, m)?)?;
    m.add_function(wrap_pyfunction!(jacobi, m)?)?;
    m.add_function(wrap_pyfunction!(wave_params, m)?)?;
    m.add_function(wrap_pyfunction!(d_second, m)?)?;
    m.add_function(wrap_pyfunction!(stability_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(continue_branch, m)?)?;
    m.add_function(wrap_pyfunction!(counterexample_slope, m)?)?;
    m.add_function(wrap_pyfunction!(lemma33_sup, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
