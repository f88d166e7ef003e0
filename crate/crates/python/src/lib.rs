//! Python bindings for the vacuumlab core.
//!
//! Structured arguments (profiles, test functions, renormalizers, velocity
//! parameters) accept either a dict or a JSON string with the same layout as
//! the scenario files. Reports come back as dicts.

use std::sync::Arc;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyString;
use serde::de::DeserializeOwned;
use serde::Serialize;

use vacuumlab::characteristics::{compute_flow, oracle_trajectory, OracleEquation};
use vacuumlab::exponents::{self, Exponent, ExponentTuple, Integrability, Verdict};
use vacuumlab::fields::{Domain, DomainKind, Grid, Trajectory};
use vacuumlab::profiles::Profile;
use vacuumlab::runner;
use vacuumlab::solver::{self, Scheme, SolverConfig};
use vacuumlab::vacuum;
use vacuumlab::velocity::{make_velocity, Params, VelocityField};
use vacuumlab::weak_forms::{self, Notion, Problem, RenormKind, SpaceProfile, TestFunction, TimeProfile};

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn runtime_err(e: impl std::fmt::Display) -> PyErr {
    PyRuntimeError::new_err(e.to_string())
}

/// Deserializes a dict (via `json.dumps`) or a JSON string.
fn from_py<T: DeserializeOwned>(obj: &Bound<'_, PyAny>) -> PyResult<T> {
    let text: String = if obj.is_instance_of::<PyString>() {
        obj.extract()?
    } else {
        obj.py().import("json")?.call_method1("dumps", (obj,))?.extract()?
    };
    serde_json::from_str(&text).map_err(value_err)
}

fn from_name<T: DeserializeOwned>(name: &str) -> PyResult<T> {
    serde_json::from_value(serde_json::Value::String(name.to_string())).map_err(value_err)
}

fn to_py<T: Serialize>(py: Python<'_>, v: &T) -> PyResult<Py<PyAny>> {
    let text = serde_json::to_string(v).map_err(runtime_err)?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

fn exponent(s: &str) -> PyResult<Exponent> {
    s.parse().map_err(value_err)
}

/// `(admissible, violated condition or None)`.
fn verdict(v: Verdict) -> (bool, Option<String>) {
    let cond = v.violation().map(|x| format!("{} ({})", x.condition, x.detail));
    (v.is_admissible(), cond)
}

/// Structured grid on an axis-aligned box.
#[pyclass(name = "Grid", frozen)]
struct PyGrid {
    inner: Arc<Grid>,
}

#[pymethods]
impl PyGrid {
    /// `domain` is "periodic_box" or "lipschitz_box".
    #[new]
    fn new(domain: &str, lower: Vec<f64>, upper: Vec<f64>, cells: Vec<usize>, t_final: f64) -> PyResult<Self> {
        let kind: DomainKind = from_name(domain)?;
        let d = Domain::new(kind, lower, upper).map_err(value_err)?;
        Ok(Self { inner: Arc::new(Grid::new(d, cells, t_final).map_err(value_err)?) })
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn cells(&self) -> Vec<usize> {
        self.inner.cells.clone()
    }

    #[getter]
    fn t_final(&self) -> f64 {
        self.inner.t_final
    }

    fn centers(&self) -> Vec<Vec<f64>> {
        let d = self.inner.dim();
        self.inner.centers().map(|x| x[..d].to_vec()).collect()
    }

    fn __repr__(&self) -> String {
        format!("Grid(cells={:?}, t_final={})", self.inner.cells, self.inner.t_final)
    }
}

/// A catalog velocity field.
#[pyclass(name = "Velocity", frozen)]
struct PyVelocity {
    inner: VelocityField,
}

#[pymethods]
impl PyVelocity {
    #[new]
    #[pyo3(signature = (id, params=None))]
    fn new(id: &str, params: Option<&Bound<'_, PyAny>>) -> PyResult<Self> {
        let p: Params = match params {
            Some(obj) => from_py(obj)?,
            None => Params::new(),
        };
        Ok(Self { inner: make_velocity(id, &p).map_err(value_err)? })
    }

    #[getter]
    fn id(&self) -> String {
        self.inner.id().to_string()
    }

    #[getter]
    fn zero_trace(&self) -> bool {
        self.inner.zero_trace()
    }

    #[getter]
    fn time_independent(&self) -> bool {
        self.inner.time_independent()
    }

    fn eval(&self, t: f64, x: Vec<f64>) -> PyResult<Vec<f64>> {
        let d = self.inner.dim();
        if x.len() != d {
            return Err(value_err(format!("expected {d} coordinates")));
        }
        let mut p = [0.0; 3];
        p[..d].copy_from_slice(&x);
        Ok(self.inner.eval(t, &p)[..d].to_vec())
    }
}

/// Snapshots of a scalar field at increasing times.
#[pyclass(name = "Trajectory", frozen)]
struct PyTrajectory {
    inner: Trajectory,
}

#[pymethods]
impl PyTrajectory {
    fn times(&self) -> Vec<f64> {
        self.inner.times()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    /// Cell values of snapshot `k`.
    fn values(&self, k: usize) -> PyResult<Vec<f64>> {
        self.inner.snapshots().get(k).map(|s| s.values().to_vec()).ok_or_else(|| value_err("snapshot out of range"))
    }

    fn integrals(&self) -> Vec<f64> {
        self.inner.snapshots().iter().map(|s| s.integrate()).collect()
    }
}

/// Exact solution by characteristics; `equation` is "continuity" or "transport".
#[pyfunction]
#[pyo3(signature = (profile, velocity, grid, outputs, equation="continuity", rk_steps=None))]
fn oracle(
    profile: &Bound<'_, PyAny>,
    velocity: &PyVelocity,
    grid: &PyGrid,
    outputs: usize,
    equation: &str,
    rk_steps: Option<usize>,
) -> PyResult<PyTrajectory> {
    let p: Profile = from_py(profile)?;
    let eq = match equation {
        "continuity" => OracleEquation::Continuity,
        "transport" => OracleEquation::Transport,
        other => return Err(value_err(format!("unknown equation `{other}`"))),
    };
    let g = &grid.inner;
    let times: Vec<f64> = (0..=outputs).map(|k| g.t_final * k as f64 / outputs as f64).collect();
    let steps = rk_steps.unwrap_or(4 * g.cells.iter().copied().max().unwrap_or(1));
    let flow = compute_flow(&velocity.inner, g.clone(), &times, steps).map_err(value_err)?;
    let inner = oracle_trajectory(&p, &flow, eq, velocity.inner.id()).map_err(value_err)?;
    Ok(PyTrajectory { inner })
}

/// Numerical solution; `scheme` is "upwind_fv" or "semi_lagrangian".
#[pyfunction]
#[pyo3(signature = (profile, velocity, grid, scheme="upwind_fv", cfl=0.5, outputs=16))]
fn solve(
    profile: &Bound<'_, PyAny>,
    velocity: &PyVelocity,
    grid: &PyGrid,
    scheme: &str,
    cfl: f64,
    outputs: usize,
) -> PyResult<PyTrajectory> {
    let p: Profile = from_py(profile)?;
    let scheme: Scheme = from_name(scheme)?;
    let cfg = SolverConfig::uniform(scheme, cfl, grid.inner.t_final, outputs).map_err(value_err)?;
    let inner = solver::solve(&p.sample_grid(grid.inner.clone()), &velocity.inner, &cfg).map_err(runtime_err)?;
    Ok(PyTrajectory { inner })
}

/// Residual of one solution notion against one test function.
#[pyfunction]
#[pyo3(signature = (trajectory, velocity, notion, space, time, tau, problem="continuity", renorm=None))]
#[allow(clippy::too_many_arguments)]
fn residual(
    trajectory: &PyTrajectory,
    velocity: &PyVelocity,
    notion: &str,
    space: &Bound<'_, PyAny>,
    time: &Bound<'_, PyAny>,
    tau: f64,
    problem: &str,
    renorm: Option<&Bound<'_, PyAny>>,
) -> PyResult<f64> {
    let notion: Notion = from_name(notion)?;
    let problem: Problem = from_name(problem)?;
    let space: SpaceProfile = from_py(space)?;
    let time: TimeProfile = from_py(time)?;
    let phi = TestFunction::new("phi", space, time, &trajectory.inner.grid().domain, 0.0).map_err(value_err)?;
    let b = match renorm {
        Some(obj) => Some(weak_forms::make_renorm(from_py::<RenormKind>(obj)?).map_err(value_err)?),
        None => None,
    };
    weak_forms::residual(problem, notion, &trajectory.inner, &velocity.inner, b.as_ref(), &phi, tau).map_err(value_err)
}

#[pyfunction]
#[pyo3(signature = (rho, threshold=0.0))]
fn vacuum_measure_series(py: Python<'_>, rho: &PyTrajectory, threshold: f64) -> PyResult<Py<PyAny>> {
    to_py(py, &vacuum::vacuum_measure_series(&rho.inner, threshold).map_err(value_err)?)
}

#[pyfunction]
#[pyo3(signature = (rho, r, threshold=0.0))]
fn conserved_product_deviation(
    py: Python<'_>,
    rho: &PyTrajectory,
    r: &PyTrajectory,
    threshold: f64,
) -> PyResult<Py<PyAny>> {
    to_py(py, &vacuum::conserved_product_deviation(&rho.inner, &r.inner, threshold).map_err(value_err)?)
}

#[pyfunction]
#[pyo3(signature = (p, q, alpha, beta, d=2))]
fn check_diperna_lions(p: &str, q: &str, alpha: &str, beta: &str, d: u32) -> PyResult<(bool, Option<String>)> {
    let t = ExponentTuple::velocity_and_solution(exponent(p)?, exponent(q)?, exponent(alpha)?, exponent(beta)?, d)
        .map_err(value_err)?;
    Ok(verdict(exponents::check_diperna_lions(&t)))
}

#[pyfunction]
fn check_gamma_condition(gamma: &str, q: &str, d: u32) -> PyResult<(bool, Option<String>)> {
    Ok(verdict(exponents::check_gamma_condition(exponent(gamma)?, exponent(q)?, d).map_err(value_err)?))
}

#[pyfunction]
fn check_product_theorem(
    alpha_rho: &str,
    beta_rho: &str,
    alpha_s: &str,
    beta_s: &str,
    p: &str,
    q: &str,
) -> PyResult<(bool, Option<String>)> {
    let rho = Integrability { alpha: exponent(alpha_rho)?, beta: exponent(beta_rho)? };
    let s = Integrability { alpha: exponent(alpha_s)?, beta: exponent(beta_s)? };
    Ok(verdict(exponents::check_product_theorem(rho, s, exponent(p)?, exponent(q)?)))
}

/// A validated scenario.
#[pyclass(name = "Scenario", frozen)]
struct PyScenario {
    inner: runner::Scenario,
}

#[pymethods]
impl PyScenario {
    #[staticmethod]
    fn parse(text: &str) -> PyResult<Self> {
        Ok(Self { inner: runner::parse_config(text).map_err(value_err)? })
    }

    #[getter]
    fn name(&self) -> String {
        self.inner.name.clone()
    }

    /// Runs every analysis; returns the summary and writes the bundle to
    /// `out` when given.
    #[pyo3(signature = (out=None, dump_fields=false))]
    fn run(&self, py: Python<'_>, out: Option<std::path::PathBuf>, dump_fields: bool) -> PyResult<Py<PyAny>> {
        let opts = runner::RunOptions { dump_fields };
        let bundle = py.detach(|| runner::run_scenario_with(&self.inner, &opts)).map_err(runtime_err)?;
        if let Some(dir) = out {
            bundle.write(&dir).map_err(runtime_err)?;
        }
        to_py(py, &bundle.summary)
    }

    fn verify_hypotheses(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_py(py, &runner::verify_hypotheses(&self.inner).map_err(value_err)?)
    }
}

#[pymodule]
fn vacuumlab_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGrid>()?;
    m.add_class::<PyVelocity>()?;
    m.add_class::<PyTrajectory>()?;
    m.add_class::<PyScenario>()?;
    m.add_function(wrap_pyfunction!(oracle, m)?)?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(residual, m)?)?;
    m.add_function(wrap_pyfunction!(vacuum_measure_series, m)?)?;
    m.add_function(wrap_pyfunction!(conserved_product_deviation, m)?)?;
    m.add_function(wrap_pyfunction!(check_diperna_lions, m)?)?;
    m.add_function(wrap_pyfunction!(check_gamma_condition, m)?)?;
    m.add_function(wrap_pyfunction!(check_product_theorem, m)?)?;
    Ok(())
}
