//! Python bindings. Solver results come back as plain dicts and lists.

use pyo3::create_exception;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};
use serde::Serialize;
use serde_json::Value;

use segmarket::designer;
use segmarket::efficiency;
use segmarket::equilibrium;
use segmarket::market::{self, SurplusSplit};
use segmarket::meeting;
use segmarket::oracle::{self, PartitionMode};
use segmarket::planner;

create_exception!(_segmarket, AssumptionError, PyValueError, "A modelling assumption does not hold.");

fn py_err(e: segmarket::Error) -> PyErr {
    use segmarket::Error as E;
    match e {
        E::Assumption(_) => AssumptionError::new_err(e.to_string()),
        E::Domain(_) | E::InvalidArgument(_) | E::Size(_) | E::Unsupported(_) => PyValueError::new_err(e.to_string()),
        E::Infeasible(_) | E::Solver(_) | E::CertificateFailed { .. } => PyRuntimeError::new_err(e.to_string()),
    }
}

/// Converts a JSON value into the matching Python object.
pub fn json_to_py(py: Python<'_>, v: &Value) -> PyResult<Py<PyAny>> {
    Ok(match v {
        Value::Null => py.None(),
        Value::Bool(b) => b.into_pyobject(py)?.to_owned().into_any().unbind(),
        Value::Number(n) => match n.as_i64() {
            Some(i) => i.into_pyobject(py)?.into_any().unbind(),
            None => n.as_f64().unwrap_or(f64::NAN).into_pyobject(py)?.into_any().unbind(),
        },
        Value::String(s) => s.into_pyobject(py)?.into_any().unbind(),
        Value::Array(items) => {
            let list = PyList::empty(py);
            for item in items {
                list.append(json_to_py(py, item)?)?;
            }
            list.into_any().unbind()
        }
        Value::Object(map) => {
            let dict = PyDict::new(py);
            for (k, item) in map {
                dict.set_item(k, json_to_py(py, item)?)?;
            }
            dict.into_any().unbind()
        }
    })
}

fn to_py<T: Serialize>(py: Python<'_>, x: &T) -> PyResult<Py<PyAny>> {
    let v = serde_json::to_value(x).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    json_to_py(py, &v)
}

fn split(ell: Option<f64>, table: Option<Vec<f64>>) -> PyResult<SurplusSplit> {
    match (ell, table) {
        (Some(_), Some(_)) => Err(PyValueError::new_err("pass either ell or table, not both")),
        (_, Some(values)) => SurplusSplit::table(values).map_err(py_err),
        (ell, None) => SurplusSplit::constant(ell.unwrap_or(1.0)).map_err(py_err),
    }
}

#[pyclass(name = "MeetingFunction", frozen)]
pub struct PyMeetingFunction(meeting::MeetingFunction);

#[pymethods]
impl PyMeetingFunction {
    #[staticmethod]
    fn ces(alpha: f64, beta: f64, rho: f64) -> PyResult<Self> {
        meeting::MeetingFunction::ces(alpha, beta, rho).map(Self).map_err(py_err)
    }

    #[staticmethod]
    fn urn_ball(alpha: f64, beta: f64) -> PyResult<Self> {
        meeting::MeetingFunction::urn_ball(alpha, beta).map(Self).map_err(py_err)
    }

    #[getter]
    fn alpha(&self) -> f64 {
        self.0.alpha()
    }

    #[getter]
    fn beta(&self) -> f64 {
        self.0.beta()
    }

    fn m(&self, t: f64) -> PyResult<f64> {
        self.0.m(t).map_err(py_err)
    }

    fn m_prime(&self, t: f64) -> PyResult<f64> {
        self.0.m_prime(t).map_err(py_err)
    }

    fn elasticity(&self, t: f64) -> PyResult<f64> {
        self.0.elasticity(t).map_err(py_err)
    }

    fn odds(&self, t: f64) -> PyResult<f64> {
        self.0.odds(t).map_err(py_err)
    }

    fn f(&self, y: f64) -> PyResult<f64> {
        self.0.f(y).map_err(py_err)
    }

    fn g(&self, y: f64) -> PyResult<f64> {
        self.0.g(y).map_err(py_err)
    }

    /// Curvature class of the odds map: "concave", "convex", "affine" or "neither".
    fn curvature(&self) -> PyResult<String> {
        let c = self.0.classify_odds(&meeting::MeetingFunction::default_probe_grid()).map_err(py_err)?;
        Ok(serde_json::to_value(c.class).ok().and_then(|v| v.as_str().map(str::to_owned)).unwrap_or_default())
    }

    fn __repr__(&self) -> String {
        serde_json::to_string(&self.0).unwrap_or_default()
    }
}

#[pyclass(name = "Prior", frozen)]
pub struct PyPrior(market::Prior);

#[pymethods]
impl PyPrior {
    #[new]
    fn new(grid: Vec<f64>, weights: Vec<f64>) -> PyResult<Self> {
        market::Prior::new(grid, weights).map(Self).map_err(py_err)
    }

    #[staticmethod]
    fn uniform(n: usize) -> PyResult<Self> {
        market::Prior::uniform(n).map(Self).map_err(py_err)
    }

    #[getter]
    fn grid(&self) -> Vec<f64> {
        self.0.grid().to_vec()
    }

    #[getter]
    fn weights(&self) -> Vec<f64> {
        self.0.weights().to_vec()
    }

    fn mean(&self) -> f64 {
        self.0.mean()
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }
}

#[pyclass(name = "Segmentation", frozen)]
pub struct PySegmentation(market::Segmentation);

#[pymethods]
impl PySegmentation {
    #[staticmethod]
    fn perfect(prior: &PyPrior) -> Self {
        Self(market::perfect_segmentation(&prior.0))
    }

    #[staticmethod]
    fn pooled(prior: &PyPrior) -> Self {
        Self(market::pooled_segmentation(&prior.0))
    }

    /// Types `1..cutoff_index` go low; an optional `split` sends that share of the cutoff type low too.
    #[staticmethod]
    #[pyo3(signature = (prior, cutoff_index, split=None))]
    fn binary(prior: &PyPrior, cutoff_index: usize, split: Option<f64>) -> PyResult<Self> {
        market::binary_segmentation(&prior.0, cutoff_index, split).map(|b| Self(b.segmentation)).map_err(py_err)
    }

    #[staticmethod]
    fn from_partition(prior: &PyPrior, blocks: Vec<Vec<usize>>) -> PyResult<Self> {
        market::Segmentation::from_partition(&prior.0, &blocks).map(Self).map_err(py_err)
    }

    #[staticmethod]
    fn from_kernel(prior: &PyPrior, kernel: Vec<Vec<f64>>) -> PyResult<Self> {
        market::Segmentation::from_kernel(&prior.0, &kernel).map(Self).map_err(py_err)
    }

    #[getter]
    fn weights(&self) -> Vec<f64> {
        self.0.weights()
    }

    fn posterior_means(&self, prior: &PyPrior) -> PyResult<Vec<f64>> {
        self.0.posterior_means(&prior.0).map_err(py_err)
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }
}

#[pyfunction]
#[pyo3(signature = (prior, segmentation, mf, k=1.0, ell=None, table=None))]
fn solve_equilibrium(
    py: Python<'_>,
    prior: &PyPrior,
    segmentation: &PySegmentation,
    mf: &PyMeetingFunction,
    k: f64,
    ell: Option<f64>,
    table: Option<Vec<f64>>,
) -> PyResult<Py<PyAny>> {
    let s = split(ell, table)?;
    let out = equilibrium::solve_equilibrium(&prior.0, &segmentation.0, &mf.0, k, &s).map_err(py_err)?;
    to_py(py, &out)
}

#[pyfunction]
#[pyo3(signature = (prior, segmentation, mf, k=1.0))]
fn solve_first_best(
    py: Python<'_>,
    prior: &PyPrior,
    segmentation: &PySegmentation,
    mf: &PyMeetingFunction,
    k: f64,
) -> PyResult<Py<PyAny>> {
    to_py(py, &planner::solve_first_best(&prior.0, &segmentation.0, &mf.0, k).map_err(py_err)?)
}

#[pyfunction]
#[pyo3(signature = (prior, mf, k=1.0, ell=None, table=None, tol=efficiency::HOSIOS_TOL))]
fn check_hosios(
    py: Python<'_>,
    prior: &PyPrior,
    mf: &PyMeetingFunction,
    k: f64,
    ell: Option<f64>,
    table: Option<Vec<f64>>,
    tol: f64,
) -> PyResult<Py<PyAny>> {
    let s = split(ell, table)?;
    to_py(py, &efficiency::check_hosios_with_tol(&prior.0, &mf.0, k, &s, tol).map_err(py_err)?)
}

/// Share table `λ(θ)` that decentralizes the first best, given its value at the cutoff.
#[pyfunction]
#[pyo3(signature = (prior, mf, lambda_at_cutoff, k=1.0))]
fn hosios_split(prior: &PyPrior, mf: &PyMeetingFunction, lambda_at_cutoff: f64, k: f64) -> PyResult<Vec<f64>> {
    let h = efficiency::hosios_compatible_split(&prior.0, &mf.0, k, lambda_at_cutoff).map_err(py_err)?;
    h.split.values_on(&prior.0).map_err(py_err)
}

#[pyfunction]
#[pyo3(signature = (prior, mf, k=1.0, ell=1.0))]
fn design(py: Python<'_>, prior: &PyPrior, mf: &PyMeetingFunction, k: f64, ell: f64) -> PyResult<Py<PyAny>> {
    to_py(py, &designer::design(&prior.0, &mf.0, k, ell).map_err(py_err)?)
}

#[pyfunction]
#[pyo3(signature = (mf, prior, u, ell=1.0, mesh=None))]
fn lp_value(
    py: Python<'_>,
    mf: &PyMeetingFunction,
    prior: &PyPrior,
    u: f64,
    ell: f64,
    mesh: Option<usize>,
) -> PyResult<Py<PyAny>> {
    let mesh = mesh.unwrap_or(4 * prior.0.len());
    to_py(py, &oracle::lp_value(&mf.0, &prior.0, ell, u, mesh).map_err(py_err)?)
}

#[pyfunction]
#[pyo3(signature = (mf, prior, k=1.0, ell=1.0, mesh=None))]
fn find_u_bar(mf: &PyMeetingFunction, prior: &PyPrior, k: f64, ell: f64, mesh: Option<usize>) -> PyResult<f64> {
    let mesh = mesh.unwrap_or(4 * prior.0.len());
    oracle::find_u_bar_scaled(&mf.0, &prior.0, k, ell, mesh).map_err(py_err)
}

#[pyfunction]
#[pyo3(signature = (prior, mf, k=1.0, ell=None, table=None, exhaustive=false))]
fn enumerate_bp(
    py: Python<'_>,
    prior: &PyPrior,
    mf: &PyMeetingFunction,
    k: f64,
    ell: Option<f64>,
    table: Option<Vec<f64>>,
    exhaustive: bool,
) -> PyResult<Py<PyAny>> {
    let s = split(ell, table)?;
    let mode = if exhaustive { PartitionMode::Exhaustive } else { PartitionMode::Interval };
    to_py(py, &oracle::enumerate_bp(&prior.0, &mf.0, k, &s, mode).map_err(py_err)?)
}

#[pymodule]
fn _segmarket(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyMeetingFunction>()?;
    m.add_class::<PyPrior>()?;
    m.add_class::<PySegmentation>()?;
    m.add("AssumptionError", m.py().get_type::<AssumptionError>())?;
    m.add_function(wrap_pyfunction!(solve_equilibrium, m)?)?;
    m.add_function(wrap_pyfunction!(solve_first_best, m)?)?;
    m.add_function(wrap_pyfunction!(check_hosios, m)?)?;
    m.add_function(wrap_pyfunction!(hosios_split, m)?)?;
    m.add_function(wrap_pyfunction!(design, m)?)?;
    m.add_function(wrap_pyfunction!(lp_value, m)?)?;
    m.add_function(wrap_pyfunction!(find_u_bar, m)?)?;
    m.add_function(wrap_pyfunction!(enumerate_bp, m)?)?;
    Ok(())
}
