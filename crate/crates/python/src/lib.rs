//! Python module `periodic_inclusions_py`.

use std::path::PathBuf;

use periodic_inclusions::cauchy::{Evolution, StepConfig};
use periodic_inclusions::grid::{hausdorff_finite, weak_norm, ForcingPath, SpaceGrid, StateVector, TimeGrid};
use periodic_inclusions::monotone::{prox_phi, OperatorSpec, PhiSpec, ScalarGraph};
use periodic_inclusions::periodic::poincare;
use periodic_inclusions::relaxation::relaxation_rows;
use periodic_inclusions::scenario::{self, RunStatus, Scenario};
use periodic_inclusions::Error;
use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyValueError};
use pyo3::prelude::*;

create_exception!(periodic_inclusions_py, SolverError, PyException);

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Config { .. } | Error::Parse { .. } | Error::Parameter { .. } | Error::Dimension { .. } => {
            PyValueError::new_err(e.to_string())
        }
        other => SolverError::new_err(format!("[{}] {other}", other.kind())),
    }
}

#[pyclass(name = "TimeGrid", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyTimeGrid {
    inner: TimeGrid,
}

#[pymethods]
impl PyTimeGrid {
    #[new]
    fn new(b: f64, n_steps: usize) -> PyResult<Self> {
        Ok(Self {
            inner: TimeGrid::new(b, n_steps).map_err(to_py)?,
        })
    }

    #[getter]
    fn b(&self) -> f64 {
        self.inner.b()
    }

    #[getter]
    fn n_steps(&self) -> usize {
        self.inner.n_steps()
    }

    #[getter]
    fn tau(&self) -> f64 {
        self.inner.tau()
    }

    fn times(&self) -> Vec<f64> {
        (0..=self.inner.n_steps()).map(|k| self.inner.time(k)).collect()
    }

    fn __repr__(&self) -> String {
        format!("TimeGrid(b={}, n_steps={})", self.inner.b(), self.inner.n_steps())
    }
}

/// Result of running a scenario's workflow in memory.
#[pyclass(name = "Outcome", frozen, skip_from_py_object)]
struct PyOutcome {
    #[pyo3(get)]
    times: Vec<f64>,
    /// One row per grid time, one column per node.
    #[pyo3(get)]
    states: Vec<Vec<f64>>,
    /// One row per step.
    #[pyo3(get)]
    forcing: Vec<Vec<f64>>,
    /// `(delta, weak_gap, sup_gap, gronwall_bound)` rows for relaxation runs.
    #[pyo3(get)]
    relaxation: Option<Vec<(f64, f64, f64, f64)>>,
    report: String,
}

#[pymethods]
impl PyOutcome {
    fn report_json(&self) -> String {
        self.report.clone()
    }
}

#[pyclass(name = "Scenario", skip_from_py_object)]
#[derive(Clone)]
struct PyScenario {
    inner: Scenario,
}

#[pymethods]
impl PyScenario {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self {
            inner: scenario::load_scenario(path).map_err(to_py)?,
        })
    }

    #[staticmethod]
    fn parse(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: scenario::parse_scenario(text).map_err(to_py)?,
        })
    }

    #[staticmethod]
    fn builtin(name: &str) -> PyResult<Self> {
        Ok(Self {
            inner: scenario::builtin(name).map_err(to_py)?,
        })
    }

    #[getter]
    fn name(&self) -> String {
        self.inner.name.clone()
    }

    #[getter]
    fn workflow(&self) -> &'static str {
        self.inner.workflow.name()
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed
    }

    #[getter]
    fn defaults(&self) -> Vec<String> {
        self.inner.defaults.clone()
    }

    #[getter]
    fn grid(&self) -> PyTimeGrid {
        PyTimeGrid { inner: self.inner.grid }
    }

    fn diagnostics_json(&self) -> PyResult<String> {
        let d = scenario::diagnose(&self.inner).map_err(to_py)?;
        serde_json::to_string_pretty(&d).map_err(|e| to_py(e.into()))
    }

    /// Runs the workflow without touching the file system.
    fn execute(&self, py: Python<'_>) -> PyResult<PyOutcome> {
        let scn = self.inner.clone();
        let out = py.detach(move || scenario::execute(&scn)).map_err(to_py)?;
        let g = out.trajectory.grid();
        let report = serde_json::json!({
            "cauchy": out.cauchy,
            "periodic": out.periodic,
            "relaxation": out.relaxation.as_ref().map(relaxation_rows),
        });
        Ok(PyOutcome {
            times: (0..=g.n_steps()).map(|k| g.time(k)).collect(),
            states: out.trajectory.states().iter().map(|s| s.as_slice().to_vec()).collect(),
            forcing: out.forcing.values().iter().map(|s| s.as_slice().to_vec()).collect(),
            relaxation: out.relaxation.as_ref().map(|r| {
                relaxation_rows(r)
                    .into_iter()
                    .map(|row| (row.delta, row.weak_gap, row.sup_gap, row.gronwall_bound))
                    .collect()
            }),
            report: serde_json::to_string_pretty(&report).map_err(|e| to_py(e.into()))?,
        })
    }

    /// Writes the artifacts into `out_dir` and returns `(status, files)`;
    /// status is `"ok"` or `"failed: <kind>"`.
    fn run(&self, py: Python<'_>, out_dir: PathBuf) -> PyResult<(String, Vec<PathBuf>)> {
        let scn = self.inner.clone();
        let art = py.detach(move || scenario::run(&scn, &out_dir)).map_err(to_py)?;
        let status = match art.status {
            RunStatus::Success => "ok".to_string(),
            RunStatus::Failed { kind, .. } => format!("failed: {kind}"),
        };
        Ok((status, art.files))
    }

    fn __repr__(&self) -> String {
        format!("Scenario(name={:?}, workflow={:?})", self.inner.name, self.inner.workflow.name())
    }
}

fn scalar_evolution(a: f64) -> PyResult<Evolution> {
    let op = OperatorSpec::scalar_linear(a).map_err(to_py)?;
    Evolution::new(SpaceGrid::scalar(), op, PhiSpec::zero(), StepConfig::default()).map_err(to_py)
}

fn scalar_forcing(grid: TimeGrid, values: Option<Vec<f64>>) -> PyResult<ForcingPath> {
    match values {
        None => Ok(ForcingPath::zeros(grid, SpaceGrid::scalar())),
        Some(v) => ForcingPath::new(grid, SpaceGrid::scalar(), v.into_iter().map(StateVector::scalar).collect())
            .map_err(to_py),
    }
}

/// Backward Euler for `-u' = a u + h` from `x0`; returns `u` at every grid time.
#[pyfunction]
#[pyo3(signature = (a, x0, grid, forcing=None))]
fn solve_cauchy_scalar(a: f64, x0: f64, grid: &PyTimeGrid, forcing: Option<Vec<f64>>) -> PyResult<Vec<f64>> {
    let evo = scalar_evolution(a)?;
    let h = scalar_forcing(grid.inner, forcing)?;
    let u = evo.solve_cauchy(&grid.inner, &StateVector::scalar(x0), &h).map_err(to_py)?;
    Ok(u.states().iter().map(|s| s.as_slice()[0]).collect())
}

/// `K(x0) = u(b)` for `-u' = a u + h`.
#[pyfunction]
#[pyo3(signature = (a, x0, grid, forcing=None))]
fn poincare_scalar(a: f64, x0: f64, grid: &PyTimeGrid, forcing: Option<Vec<f64>>) -> PyResult<f64> {
    let evo = scalar_evolution(a)?;
    let h = scalar_forcing(grid.inner, forcing)?;
    Ok(poincare(&evo, &grid.inner, &StateVector::scalar(x0), &h).map_err(to_py)?.as_slice()[0])
}

/// Nodewise resolvent `(I + tau beta)^{-1}` for `kind` in
/// `zero`, `linear` (param = slope), `abs` (param = weight), `indicator` (param = half-width).
#[pyfunction]
fn prox(kind: &str, param: f64, tau: f64, values: Vec<f64>) -> PyResult<Vec<f64>> {
    let graph = match kind {
        "zero" => ScalarGraph::Zero,
        "linear" => ScalarGraph::Linear { slope: param },
        "abs" => ScalarGraph::Abs { weight: param },
        "indicator" => ScalarGraph::Indicator { lo: -param, hi: param },
        other => return Err(PyValueError::new_err(format!("unknown graph kind {other:?}"))),
    };
    let phi = PhiSpec::new(graph).map_err(to_py)?;
    let x = StateVector::new(values).map_err(to_py)?;
    Ok(prox_phi(&phi, tau, &x).map_err(to_py)?.into_vec())
}

/// Weak norm of a scalar piecewise-constant forcing on `[0, b]`.
#[pyfunction(name = "weak_norm")]
fn weak_norm_py(values: Vec<f64>, b: f64) -> PyResult<f64> {
    let grid = TimeGrid::new(b, values.len()).map_err(to_py)?;
    Ok(weak_norm(&scalar_forcing(grid, Some(values))?))
}

#[pyfunction]
fn hausdorff(a: Vec<Vec<f64>>, b: Vec<Vec<f64>>) -> PyResult<f64> {
    hausdorff_finite(&a, &b).map_err(to_py)
}

#[pyfunction]
fn oracle(name: &str) -> PyResult<Vec<(String, f64)>> {
    scenario::oracle(name).map_err(to_py)
}

#[pyfunction]
fn oracle_names() -> Vec<&'static str> {
    scenario::oracle_names().to_vec()
}

#[pyfunction]
fn builtin_names() -> Vec<&'static str> {
    scenario::builtin_names()
}

#[pyfunction]
fn stationary_heat(nodes: usize, extent: f64, f0: f64) -> Vec<f64> {
    scenario::stationary_heat(nodes, extent, f0)
}

#[pymodule]
fn periodic_inclusions_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("SolverError", m.py().get_type::<SolverError>())?;
    m.add_class::<PyTimeGrid>()?;
    m.add_class::<PyScenario>()?;
    m.add_class::<PyOutcome>()?;
    m.add_function(wrap_pyfunction!(solve_cauchy_scalar, m)?)?;
    m.add_function(wrap_pyfunction!(poincare_scalar, m)?)?;
    m.add_function(wrap_pyfunction!(prox, m)?)?;
    m.add_function(wrap_pyfunction!(weak_norm_py, m)?)?;
    m.add_function(wrap_pyfunction!(hausdorff, m)?)?;
    m.add_function(wrap_pyfunction!(oracle, m)?)?;
    m.add_function(wrap_pyfunction!(oracle_names, m)?)?;
    m.add_function(wrap_pyfunction!(builtin_names, m)?)?;
    m.add_function(wrap_pyfunction!(stationary_heat, m)?)?;
    Ok(())
}
