//! Python bindings. Structured results cross the boundary as plain dicts and
//! lists built from the Rust types' JSON form.

use pyo3::exceptions::{PyKeyError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;
use serde::Serialize;

use ocsched::guarantees::check_guarantees;
use ocsched::harness::{compare, run_scheme_with, run_sweep, ExperimentPlan, RecordMeta, Scheme};
use ocsched::lp::solve_instance;
use ocsched::model::{Coflow, DemandMatrix, Instance, NetworkConfig};
use ocsched::oracle::{brute_force_best, OracleLimits};
use ocsched::sim::{check_feasibility, read_schedule_log, write_schedule_log};
use ocsched::trace::{parse_canonical, synth_generate, write_canonical, SynthParams, SynthRelease, WeightPolicy};

fn err<E: std::fmt::Display>(e: E) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_py<T: Serialize>(py: Python<'_>, value: &T) -> PyResult<PyObject> {
    let text = serde_json::to_string(value).map_err(err)?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

fn scheme(name: &str) -> PyResult<Scheme> {
    name.parse().map_err(|_| PyKeyError::new_err(format!("unknown scheme {name:?}")))
}

fn network(num_ports: usize, rates: Vec<f64>, delay: f64, mode: &str) -> PyResult<NetworkConfig> {
    match mode.to_ascii_lowercase().as_str() {
        "ocs" => Ok(NetworkConfig::ocs(num_ports, rates, delay)),
        "eps" => Ok(NetworkConfig::eps(num_ports, rates)),
        _ => Err(PyValueError::new_err(format!("mode must be 'ocs' or 'eps', got {mode:?}"))),
    }
}

/// A scheduling instance: network parameters plus coflows in input order.
#[pyclass(name = "Instance", module = "ocsched")]
#[derive(Clone)]
struct PyInstance {
    inner: Instance,
}

#[pymethods]
impl PyInstance {
    /// `coflows` holds dicts with keys `flows` (list of `(i, j, volume)`),
    /// and optional `id`, `weight` (default 1) and `release` (default 0).
    #[new]
    #[pyo3(signature = (num_ports, rates, delay, coflows, mode = "ocs"))]
    fn new(num_ports: usize, rates: Vec<f64>, delay: f64, coflows: Vec<Bound<'_, PyDict>>, mode: &str) -> PyResult<Self> {
        let config = network(num_ports, rates, delay, mode)?;
        let mut list = Vec::with_capacity(coflows.len());
        for (m, c) in coflows.iter().enumerate() {
            let flows: Vec<(usize, usize, f64)> = c
                .get_item("flows")?
                .ok_or_else(|| PyKeyError::new_err(format!("coflow {m} has no 'flows'")))?
                .extract()?;
            if let Some(&(i, j, _)) = flows.iter().find(|&&(i, j, _)| i >= num_ports || j >= num_ports) {
                return Err(PyValueError::new_err(format!("coflow {m}: port ({i}, {j}) out of range")));
            }
            let get = |key: &str, default: f64| -> PyResult<f64> {
                c.get_item(key)?.map_or(Ok(default), |v| v.extract())
            };
            let id: u64 = c.get_item("id")?.map_or(Ok(m as u64), |v| v.extract())?;
            let mut d = DemandMatrix::zeros(num_ports);
            for (i, j, v) in flows {
                d.add(i, j, v);
            }
            list.push(Coflow::new(id, d, get("weight", 1.0)?, get("release", 0.0)?));
        }
        let inner = Instance::new(config, list);
        inner.ensure_valid().map_err(err)?;
        Ok(Self { inner })
    }

    /// Parses the canonical JSON form.
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        parse_canonical(text).map(|inner| Self { inner }).map_err(err)
    }

    fn to_json(&self) -> PyResult<String> {
        write_canonical(&self.inner).map_err(err)
    }

    #[getter]
    fn num_ports(&self) -> usize {
        self.inner.config.num_ports
    }

    #[getter]
    fn num_cores(&self) -> usize {
        self.inner.config.num_cores()
    }

    #[getter]
    fn num_coflows(&self) -> usize {
        self.inner.num_coflows()
    }

    #[getter]
    fn rates(&self) -> Vec<f64> {
        self.inner.config.core_rates.clone()
    }

    #[getter]
    fn delay(&self) -> f64 {
        self.inner.config.effective_delay()
    }

    fn __repr__(&self) -> String {
        let c = &self.inner.config;
        format!(
            "Instance(ports={}, rates={:?}, delay={}, mode={:?}, coflows={})",
            c.num_ports,
            c.core_rates,
            c.effective_delay(),
            c.mode,
            self.inner.num_coflows()
        )
    }
}

/// Solves the ordering LP; returns its JSON form as a dict.
#[pyfunction]
fn solve_lp(py: Python<'_>, instance: &PyInstance) -> PyResult<PyObject> {
    let sol = py.allow_threads(|| solve_instance(&instance.inner)).map_err(err)?;
    to_py(py, &sol)
}

/// Runs one scheme and returns its schedule log (events, completions,
/// objective), the same form `check_schedule` accepts.
#[pyfunction]
fn run_scheme(py: Python<'_>, instance: &PyInstance, scheme_name: &str) -> PyResult<PyObject> {
    let s = scheme(scheme_name)?;
    let run = py
        .allow_threads(|| {
            let lp = if s.uses_lp_order() { Some(solve_instance(&instance.inner).map_err(|e| e.to_string())?) } else { None };
            run_scheme_with(&instance.inner, s, lp.as_ref()).map_err(|e| e.to_string())
        })
        .map_err(PyValueError::new_err)?;
    let mut buf = Vec::new();
    write_schedule_log(&run.result, &mut buf).map_err(err)?;
    Ok(py.import("json")?.call_method1("loads", (String::from_utf8(buf).map_err(err)?,))?.unbind())
}

/// Runs several schemes (all by default) and returns one record per scheme.
#[pyfunction]
#[pyo3(signature = (instance, schemes = None, seed = 0))]
fn compare_schemes(py: Python<'_>, instance: &PyInstance, schemes: Option<Vec<String>>, seed: u64) -> PyResult<PyObject> {
    let list = match schemes {
        Some(names) => names.iter().map(|n| scheme(n)).collect::<PyResult<Vec<_>>>()?,
        None => Scheme::ALL.to_vec(),
    };
    let meta = RecordMeta::for_instance(&instance.inner, seed, "given");
    let records = py.allow_threads(|| compare(&instance.inner, &list, &meta, true));
    to_py(py, &records)
}

/// Checks the main algorithm's prefix bounds and approximation guarantee.
#[pyfunction]
fn guarantees(py: Python<'_>, instance: &PyInstance) -> PyResult<PyObject> {
    let inst = &instance.inner;
    let lp = solve_instance(inst).map_err(err)?;
    let run = run_scheme_with(inst, Scheme::Ours, Some(&lp)).map_err(err)?;
    to_py(py, &check_guarantees(inst, &lp, &run.allocation, &run.result))
}

/// Audits a schedule (as returned by `run_scheme`); returns the issue list.
#[pyfunction]
fn check_schedule(py: Python<'_>, instance: &PyInstance, schedule: Bound<'_, PyAny>) -> PyResult<PyObject> {
    let text: String = py.import("json")?.call_method1("dumps", (schedule,))?.extract()?;
    let log = read_schedule_log(text.as_bytes()).map_err(err)?;
    to_py(py, &check_feasibility(&log, &instance.inner, None).issues)
}

/// Exhaustive search on tiny instances (at most 6 flows, 2 cores, 3 coflows).
#[pyfunction]
fn oracle_best(py: Python<'_>, instance: &PyInstance) -> PyResult<PyObject> {
    let r = brute_force_best(&instance.inner, OracleLimits::default()).map_err(err)?;
    to_py(py, &r)
}

/// Random instance with independent entries.
#[pyfunction]
#[pyo3(signature = (num_ports, num_coflows, rates, delay, density = 0.3, volume_min = 1.0, volume_max = 100.0, seed = 0, mode = "ocs"))]
#[allow(clippy::too_many_arguments)]
fn generate(
    num_ports: usize,
    num_coflows: usize,
    rates: Vec<f64>,
    delay: f64,
    density: f64,
    volume_min: f64,
    volume_max: f64,
    seed: u64,
    mode: &str,
) -> PyResult<PyInstance> {
    let params = SynthParams {
        num_coflows,
        density,
        volume_min,
        volume_max,
        seed,
        weights: WeightPolicy::Unit,
        releases: SynthRelease::Zero,
    };
    let inner = synth_generate(&params, network(num_ports, rates, delay, mode)?).map_err(err)?;
    Ok(PyInstance { inner })
}

/// Runs an experiment plan given as JSON text; returns the records.
#[pyfunction]
fn sweep(py: Python<'_>, plan_json: &str) -> PyResult<PyObject> {
    let plan: ExperimentPlan = serde_json::from_str(plan_json).map_err(err)?;
    let records = py.allow_threads(|| run_sweep(&plan)).map_err(err)?;
    to_py(py, &records)
}

#[pymodule]
#[pyo3(name = "ocsched")]
fn ocsched_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyInstance>()?;
    m.add("SCHEMES", Scheme::ALL.iter().map(|s| s.name()).collect::<Vec<_>>())?;
    m.add_function(wrap_pyfunction!(solve_lp, m)?)?;
    m.add_function(wrap_pyfunction!(run_scheme, m)?)?;
    m.add_function(wrap_pyfunction!(compare_schemes, m)?)?;
    m.add_function(wrap_pyfunction!(guarantees, m)?)?;
    m.add_function(wrap_pyfunction!(check_schedule, m)?)?;
    m.add_function(wrap_pyfunction!(oracle_best, m)?)?;
    m.add_function(wrap_pyfunction!(generate, m)?)?;
    m.add_function(wrap_pyfunction!(sweep, m)?)?;
    Ok(())
}
