//! Python bindings: grids, bottoms, parameters, states, simulation and the
//! verification reports. Arrays cross the boundary as lists of floats;
//! reports come back as dictionaries.

use peregrine::bathymetry::validate_depth;
use peregrine::diagnostics;
use peregrine::elliptic;
use peregrine::grid::{sobolev_mu_norm, sobolev_norm};
use peregrine::harness;
use peregrine::littlewood_paley::lp_project;
use peregrine::verify;
use peregrine::{BathymetryPreset, Error, Field, SimulationOptions, SystemKind};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use serde::Serialize;

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Config(_)
        | Error::InvalidGrid(_)
        | Error::InvalidParameter(_)
        | Error::GridMismatch
        | Error::Hypothesis(_) => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn to_dict<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

#[pyclass(name = "Grid", module = "peregrine_py", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyGrid {
    inner: peregrine::Grid,
}

#[pymethods]
impl PyGrid {
    #[new]
    fn new(length: f64, points: usize) -> PyResult<Self> {
        Ok(Self { inner: peregrine::Grid::new(length, points).map_err(to_py)? })
    }

    #[getter]
    fn length(&self) -> f64 {
        self.inner.length()
    }

    #[getter]
    fn points(&self) -> usize {
        self.inner.points()
    }

    #[getter]
    fn dx(&self) -> f64 {
        self.inner.dx()
    }

    /// Grid coordinates `x_j = j L / M`.
    fn x(&self) -> Vec<f64> {
        self.inner.coordinates()
    }

    fn __repr__(&self) -> String {
        format!("Grid(length={}, points={})", self.inner.length(), self.inner.points())
    }
}

impl PyGrid {
    fn field(&self, values: Vec<f64>) -> PyResult<Field> {
        Field::new(&self.inner, values).map_err(to_py)
    }
}

#[pyclass(name = "Params", module = "peregrine_py", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyParams {
    inner: peregrine::Params,
}

#[pymethods]
impl PyParams {
    #[new]
    #[pyo3(signature = (eps, mu, beta=0.0, nu=0.0, h0=0.5, dt=1e-3, t_end=1.0))]
    fn new(eps: f64, mu: f64, beta: f64, nu: f64, h0: f64, dt: f64, t_end: f64) -> PyResult<Self> {
        Ok(Self { inner: peregrine::Params::new(eps, mu, beta, nu, h0, dt, t_end).map_err(to_py)? })
    }

    #[getter]
    fn eps(&self) -> f64 {
        self.inner.eps
    }

    #[getter]
    fn mu(&self) -> f64 {
        self.inner.mu
    }

    #[getter]
    fn beta(&self) -> f64 {
        self.inner.beta
    }

    #[getter]
    fn nu(&self) -> f64 {
        self.inner.nu
    }

    #[getter]
    fn h0(&self) -> f64 {
        self.inner.h0
    }

    #[getter]
    fn dt(&self) -> f64 {
        self.inner.dt
    }

    #[getter]
    fn t_end(&self) -> f64 {
        self.inner.t_end
    }

    fn __repr__(&self) -> String {
        let p = &self.inner;
        format!(
            "Params(eps={}, mu={}, beta={}, nu={}, h0={}, dt={}, t_end={})",
            p.eps, p.mu, p.beta, p.nu, p.h0, p.dt, p.t_end
        )
    }
}

#[pyclass(name = "Bathymetry", module = "peregrine_py", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyBathymetry {
    inner: peregrine::Bathymetry,
}

#[pymethods]
impl PyBathymetry {
    /// Named preset (`flat`, `gaussian-bump`, `two-bumps`, `ridge`) sampled on `grid`.
    #[new]
    #[pyo3(signature = (grid, preset="flat", beta=0.0))]
    fn new(grid: &PyGrid, preset: &str, beta: f64) -> PyResult<Self> {
        let preset = BathymetryPreset::by_name(preset).map_err(to_py)?;
        let inner = peregrine::Bathymetry::from_preset(&grid.inner, &preset, beta).map_err(to_py)?;
        Ok(Self { inner })
    }

    /// Bottom from sampled values `b(x_j)`.
    #[staticmethod]
    fn from_values(grid: &PyGrid, b: Vec<f64>, beta: f64) -> PyResult<Self> {
        let inner = peregrine::Bathymetry::new(grid.field(b)?, beta).map_err(to_py)?;
        Ok(Self { inner })
    }

    #[getter]
    fn beta(&self) -> f64 {
        self.inner.beta()
    }

    fn b(&self) -> Vec<f64> {
        self.inner.b().values().to_vec()
    }

    /// Still-water depth `1 - beta b`.
    fn hb(&self) -> Vec<f64> {
        self.inner.hb().values().to_vec()
    }

    fn validate_depth<'py>(&self, py: Python<'py>, h0: f64) -> PyResult<Bound<'py, PyAny>> {
        to_dict(py, &validate_depth(&self.inner, h0))
    }
}

#[pyclass(name = "State", module = "peregrine_py", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyState {
    inner: peregrine::State,
}

#[pymethods]
impl PyState {
    #[new]
    #[pyo3(signature = (grid, zeta, u, t=0.0))]
    fn new(grid: &PyGrid, zeta: Vec<f64>, u: Vec<f64>, t: f64) -> PyResult<Self> {
        let inner = peregrine::State::new(grid.field(zeta)?, grid.field(u)?, t).map_err(to_py)?;
        Ok(Self { inner })
    }

    #[getter]
    fn t(&self) -> f64 {
        self.inner.t
    }

    fn zeta(&self) -> Vec<f64> {
        self.inner.zeta.values().to_vec()
    }

    fn u(&self) -> Vec<f64> {
        self.inner.u.values().to_vec()
    }

    fn grid(&self) -> PyGrid {
        PyGrid { inner: self.inner.grid().clone() }
    }

    /// `E^s = |zeta|^2_{H^s} + nu |zeta_x|^2_{H^s} + |u|^2_{H^s} + mu |u_x|^2_{H^s}`.
    #[pyo3(signature = (s, mu, nu=0.0))]
    fn energy(&self, s: f64, mu: f64, nu: f64) -> PyResult<f64> {
        diagnostics::energy_es(&self.inner, s, mu, nu).map_err(to_py)
    }

    fn entropy(&self, bathymetry: &PyBathymetry, params: &PyParams) -> PyResult<f64> {
        diagnostics::entropy_total(&self.inner, &bathymetry.inner, &params.inner).map_err(to_py)
    }
}

#[pyclass(name = "Trajectory", module = "peregrine_py", frozen)]
struct PyTrajectory {
    inner: peregrine::Trajectory,
    s_list: Vec<f64>,
    abort: Option<String>,
}

#[pymethods]
impl PyTrajectory {
    /// Times of the stored snapshots.
    fn times(&self) -> Vec<f64> {
        self.inner.times()
    }

    fn snapshots(&self) -> Vec<PyState> {
        self.inner.snapshots.iter().map(|s| PyState { inner: s.clone() }).collect()
    }

    fn last(&self) -> PyState {
        PyState { inner: self.inner.last().clone() }
    }

    /// Per-step diagnostics as a list of dictionaries.
    fn records<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_dict(py, &self.inner.records)
    }

    /// The `diagnostics.csv` text the CLI writes for this run.
    fn diagnostics_csv(&self) -> String {
        peregrine::output::diagnostics_csv(&self.inner, &self.s_list)
    }

    /// Abort message (`ABORT_POSITIVITY ...` / `ABORT_BLOWUP ...`), if the run stopped early.
    #[getter]
    fn abort(&self) -> Option<String> {
        self.abort.clone()
    }

    fn __len__(&self) -> usize {
        self.inner.snapshots.len()
    }
}

/// Integrates `system` (`"bp"` or `"bpw"`) from `state` to `params.t_end`.
/// Raises on invalid input; an abort during the run is reported in `Trajectory.abort`.
#[pyfunction]
#[pyo3(signature = (state, bathymetry, params, system="bpw", snapshot_stride=1, s_list=vec![0.0, 1.0]))]
fn simulate(
    py: Python<'_>,
    state: &PyState,
    bathymetry: &PyBathymetry,
    params: &PyParams,
    system: &str,
    snapshot_stride: usize,
    s_list: Vec<f64>,
) -> PyResult<PyTrajectory> {
    let kind = SystemKind::parse(system).map_err(to_py)?;
    let opts = SimulationOptions { snapshot_stride, s_list: s_list.clone(), record_diagnostics: true };
    let (inner, abort) = py
        .detach(|| peregrine::dynamics::simulate_partial(&state.inner, kind, &bathymetry.inner, &params.inner, &opts))
        .map_err(to_py)?;
    Ok(PyTrajectory { inner, s_list, abort: abort.map(|e| e.to_string()) })
}

#[pyfunction]
fn list_scenarios() -> Vec<String> {
    harness::scenarios().into_iter().map(|s| s.name).collect()
}

/// Runs a shipped scenario, optionally with a different end time.
#[pyfunction]
#[pyo3(signature = (name, seed=2024, t_end=None))]
fn run_scenario(py: Python<'_>, name: &str, seed: u64, t_end: Option<f64>) -> PyResult<PyTrajectory> {
    let mut sc = harness::scenario(name).map_err(to_py)?;
    if let Some(t) = t_end {
        sc.params.t_end = t;
    }
    let out = py.detach(|| sc.run(seed)).map_err(to_py)?;
    Ok(PyTrajectory {
        inner: out.trajectory,
        s_list: sc.s_list,
        abort: out.abort.map(|e| e.to_string()),
    })
}

#[pyfunction]
fn sobolev_norm_of(grid: &PyGrid, f: Vec<f64>, s: f64) -> PyResult<f64> {
    sobolev_norm(&grid.field(f)?, s).map_err(to_py)
}

/// `sqrt(|f|^2_{H^s} + mu |f_x|^2_{H^s})`.
#[pyfunction]
fn sobolev_mu_norm_of(grid: &PyGrid, f: Vec<f64>, s: f64, mu: f64) -> PyResult<f64> {
    sobolev_mu_norm(&grid.field(f)?, s, mu).map_err(to_py)
}

/// Solves `T_b u = f` for the bottom `bathymetry`.
#[pyfunction]
fn solve_tb(bathymetry: &PyBathymetry, mu: f64, f: Vec<f64>) -> PyResult<Vec<f64>> {
    let op = peregrine::TbOperator::new(&bathymetry.inner, mu).map_err(to_py)?;
    let f = Field::new(bathymetry.inner.grid(), f).map_err(to_py)?;
    Ok(op.solve(&f).map_err(to_py)?.into_values())
}

#[pyfunction]
fn apply_tb(bathymetry: &PyBathymetry, mu: f64, u: Vec<f64>) -> PyResult<Vec<f64>> {
    let op = peregrine::TbOperator::new(&bathymetry.inner, mu).map_err(to_py)?;
    let u = Field::new(bathymetry.inner.grid(), u).map_err(to_py)?;
    Ok(op.apply(&u).map_err(to_py)?.into_values())
}

/// `(1 - a d_x^2)^{-1} f`.
#[pyfunction]
fn helmholtz_solve(grid: &PyGrid, f: Vec<f64>, a: f64) -> PyResult<Vec<f64>> {
    Ok(elliptic::helmholtz_solve(&grid.field(f)?, a).map_err(to_py)?.into_values())
}

#[pyfunction]
fn kernel_kmu(mu: f64, x: f64) -> PyResult<f64> {
    elliptic::kernel_kmu(mu, x).map_err(to_py)
}

#[pyfunction]
fn sigma0(x: f64) -> PyResult<f64> {
    diagnostics::sigma0(x).map_err(to_py)
}

#[pyfunction]
fn compatibility_residual(h: f64, u: f64, eps: f64) -> PyResult<f64> {
    diagnostics::compatibility_residual(h, u, eps).map_err(to_py)
}

/// Littlewood-Paley block `P_N f` for dyadic `n`.
#[pyfunction]
fn lp_block(grid: &PyGrid, f: Vec<f64>, n: u64) -> PyResult<Vec<f64>> {
    Ok(lp_project(&grid.field(f)?, n).map_err(to_py)?.into_values())
}

/// Periodic convolution with the discrete mollifier `rho_n`.
#[pyfunction]
fn mollify(grid: &PyGrid, f: Vec<f64>, n: u32) -> PyResult<Vec<f64>> {
    Ok(harness::mollify(&grid.field(f)?, n).map_err(to_py)?.into_values())
}

#[pyfunction]
#[pyo3(signature = (preset, points=128, samples=100, mu=0.1, beta=0.2, h0=0.5, seed=2024))]
#[allow(clippy::too_many_arguments)]
fn verify_elliptic<'py>(
    py: Python<'py>,
    preset: &str,
    points: usize,
    samples: usize,
    mu: f64,
    beta: f64,
    h0: f64,
    seed: u64,
) -> PyResult<Bound<'py, PyAny>> {
    let preset = BathymetryPreset::by_name(preset).map_err(to_py)?;
    let cfg = verify::EllipticSettings { points, samples, mu, beta, h0, seed, ..Default::default() };
    let report = py.detach(|| verify::verify_elliptic(&preset, &cfg)).map_err(to_py)?;
    let pass = report.pass();
    let out = to_dict(py, &report)?;
    out.set_item("pass", pass)?;
    Ok(out)
}

#[pyfunction]
#[pyo3(signature = (scenario, seed=2024))]
fn verify_entropy<'py>(py: Python<'py>, scenario: &str, seed: u64) -> PyResult<Bound<'py, PyAny>> {
    let sc = harness::scenario(scenario).map_err(to_py)?;
    let report = py.detach(|| verify::verify_entropy(&sc, seed)).map_err(to_py)?;
    let pass = report.pass();
    let out = to_dict(py, &report)?;
    out.set_item("pass", pass)?;
    Ok(out)
}

#[pyfunction]
#[pyo3(signature = (scenario="algebraic-tail", s=1.0, n=vec![8, 16, 32, 64], probe_horizon=2.0, seed=2024))]
fn bona_smith<'py>(
    py: Python<'py>,
    scenario: &str,
    s: f64,
    n: Vec<u64>,
    probe_horizon: f64,
    seed: u64,
) -> PyResult<Bound<'py, PyAny>> {
    let sc = harness::scenario(scenario).map_err(to_py)?;
    let report = py
        .detach(|| harness::bona_smith_experiment(&sc, seed, s, &n, probe_horizon))
        .map_err(to_py)?;
    to_dict(py, &report)
}

#[pyfunction]
#[pyo3(signature = (scenario, n=vec![1, 2, 4, 8], seed=2024))]
fn weak_limit<'py>(py: Python<'py>, scenario: &str, n: Vec<u32>, seed: u64) -> PyResult<Bound<'py, PyAny>> {
    let sc = harness::scenario(scenario).map_err(to_py)?;
    let report = py.detach(|| harness::weak_limit_experiment(&sc, seed, &n)).map_err(to_py)?;
    let pass = report.pass();
    let out = to_dict(py, &report)?;
    out.set_item("pass", pass)?;
    Ok(out)
}

#[pymodule]
fn peregrine_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGrid>()?;
    m.add_class::<PyParams>()?;
    m.add_class::<PyBathymetry>()?;
    m.add_class::<PyState>()?;
    m.add_class::<PyTrajectory>()?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(list_scenarios, m)?)?;
    m.add_function(wrap_pyfunction!(run_scenario, m)?)?;
    m.add_function(wrap_pyfunction!(sobolev_norm_of, m)?)?;
    m.add_function(wrap_pyfunction!(sobolev_mu_norm_of, m)?)?;
    m.add_function(wrap_pyfunction!(solve_tb, m)?)?;
    m.add_function(wrap_pyfunction!(apply_tb, m)?)?;
    m.add_function(wrap_pyfunction!(helmholtz_solve, m)?)?;
    m.add_function(wrap_pyfunction!(kernel_kmu, m)?)?;
    m.add_function(wrap_pyfunction!(sigma0, m)?)?;
    m.add_function(wrap_pyfunction!(compatibility_residual, m)?)?;
    m.add_function(wrap_pyfunction!(lp_block, m)?)?;
    m.add_function(wrap_pyfunction!(mollify, m)?)?;
    m.add_function(wrap_pyfunction!(verify_elliptic, m)?)?;
    m.add_function(wrap_pyfunction!(verify_entropy, m)?)?;
    m.add_function(wrap_pyfunction!(bona_smith, m)?)?;
    m.add_function(wrap_pyfunction!(weak_limit, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
