//! Python bindings: configuration, mesh statistics, the rotation operator,
//! Wiener paths, single-path runs, ensembles and the self-check suites.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use mllg_core::check::run_checks;
use mllg_core::ensemble::{convergence_study, run_ensemble as core_run_ensemble};
use mllg_core::fem::Vec3;
use mllg_core::mesh::{build_cube_mesh, verify_offdiagonal_condition, Aabb};
use mllg_core::noise::{apply_exp_sg as core_exp_sg, path_seed, sample_wiener_path as core_wiener};
use mllg_core::stepper::{
    run_path as core_run_path, Discretization, EnergyTrace, InitialData, RunOptions,
};
use mllg_core::{Error, SimConfig};

fn to_py(e: Error) -> PyErr {
    match e.exit_code() {
        2 => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

/// Simulation configuration. `text` uses the `key = value` file format;
/// `overrides` are `KEY=VALUE` strings applied afterwards.
#[pyclass(name = "Config", from_py_object)]
#[derive(Clone)]
struct PyConfig {
    inner: SimConfig,
}

#[pymethods]
impl PyConfig {
    #[new]
    #[pyo3(signature = (text = "", overrides = Vec::new()))]
    fn new(text: &str, overrides: Vec<String>) -> PyResult<Self> {
        SimConfig::parse_with_overrides(text, &overrides)
            .map(|inner| Self { inner })
            .map_err(to_py)
    }

    /// Returns a copy with `KEY=VALUE` overrides applied and revalidated.
    fn with_overrides(&self, overrides: Vec<String>) -> PyResult<Self> {
        Self::new(&self.inner.to_text(), overrides)
    }

    fn to_text(&self) -> String {
        self.inner.to_text()
    }

    #[getter]
    fn k(&self) -> f64 {
        self.inner.k()
    }

    #[getter]
    fn h(&self) -> f64 {
        self.inner.h()
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n
    }

    #[getter]
    fn steps(&self) -> usize {
        self.inner.steps
    }

    #[getter]
    fn paths(&self) -> usize {
        self.inner.paths
    }

    #[getter]
    fn theta(&self) -> f64 {
        self.inner.theta
    }

    fn __repr__(&self) -> String {
        let c = &self.inner;
        format!(
            "Config(n={}, J={}, theta={}, L={})",
            c.n, c.steps, c.theta, c.paths
        )
    }
}

fn trace_rows(trace: &EnergyTrace) -> Vec<(f64, f64, f64, f64)> {
    trace
        .iter()
        .map(|r| (r.t, r.exchange_sq, r.field_sq, r.curl_sq))
        .collect()
}

/// Vertex, edge and tet counts of the Kuhn mesh with `n` cells per side.
#[pyfunction]
fn mesh_info(py: Python<'_>, n: usize) -> PyResult<Bound<'_, PyDict>> {
    let mesh = build_cube_mesh(n, Aabb::unit_cube(), None).map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("vertices", mesh.num_vertices())?;
    d.set_item("edges", mesh.num_edges())?;
    d.set_item("tets", mesh.num_tets())?;
    d.set_item("h", mesh.h)?;
    d.set_item("offdiagonal_ok", verify_offdiagonal_condition(&mesh).pass)?;
    Ok(d)
}

/// `exp(sG) u` with `G u = u x g`.
#[pyfunction]
fn apply_exp_sg(u: [f64; 3], g: [f64; 3], s: f64) -> [f64; 3] {
    let r = core_exp_sg(&Vec3::from(u), &Vec3::from(g), s);
    [r[0], r[1], r[2]]
}

/// Brownian values `W(t_j)`, `j = 0..=steps`.
#[pyfunction]
fn sample_wiener_path(steps: usize, k: f64, seed: u64) -> PyResult<Vec<f64>> {
    core_wiener(steps, k, seed).map(|p| p.values).map_err(to_py)
}

/// Runs path `index` of the ensemble described by `config`.
#[pyfunction]
#[pyo3(signature = (config, index = 0))]
fn run_path<'py>(py: Python<'py>, config: &PyConfig, index: u64) -> PyResult<Bound<'py, PyDict>> {
    let cfg = &config.inner;
    let seed = path_seed(cfg.base_seed, index);
    let res = py
        .detach(|| -> mllg_core::Result<_> {
            let disc = Discretization::from_config(cfg)?;
            let init = InitialData::vortex(&disc, cfg.h_s)?;
            let path = core_wiener(cfg.steps, cfg.k(), seed)?;
            let opts = RunOptions {
                energy_guard: cfg.energy_guard,
                ..RunOptions::default()
            };
            core_run_path(&disc, &init, &path, &opts)
        })
        .map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("seed", res.seed)?;
    d.set_item("trace", trace_rows(&res.trace))?;
    d.set_item("sphere_error_sq", res.sphere_error_sq)?;
    d.set_item("max_unit_deviation", res.max_unit_deviation)?;
    d.set_item("max_tangency", res.max_tangency)?;
    Ok(d)
}

/// Runs all `L` paths; traces are `(t, exchange_sq, field_sq, curl_sq)` rows.
#[pyfunction]
fn run_ensemble<'py>(py: Python<'py>, config: &PyConfig) -> PyResult<Bound<'py, PyDict>> {
    let cfg = config.inner.clone();
    let res = py.detach(|| core_run_ensemble(&cfg)).map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("paths", res.paths)?;
    d.set_item("mean_trace", trace_rows(&res.mean_trace))?;
    d.set_item(
        "sample_paths",
        res.sample_paths
            .iter()
            .map(|(_, t)| trace_rows(t))
            .collect::<Vec<_>>(),
    )?;
    d.set_item("mean_sphere_error_sq", res.mean_sphere_error_sq)?;
    d.set_item("seeds", res.seeds())?;
    d.set_item(
        "sphere_error_sq",
        res.summaries
            .iter()
            .map(|s| s.sphere_error_sq)
            .collect::<Vec<_>>(),
    )?;
    Ok(d)
}

/// `(n, k, mean_sphere_error_sq, wallclock_s)` for every `(n, k ratio)` pair.
#[pyfunction]
fn convergence(py: Python<'_>, config: &PyConfig) -> PyResult<Vec<(usize, f64, f64, f64)>> {
    let cfg = config.inner.clone();
    let rows = py.detach(|| convergence_study(&cfg)).map_err(to_py)?;
    Ok(rows
        .iter()
        .map(|r| (r.n, r.k, r.mean_sphere_error_sq, r.wallclock_s))
        .collect())
}

/// `(suite, passed, detail)` for each self-check suite.
#[pyfunction]
#[pyo3(signature = (config, suite = None))]
fn check(
    py: Python<'_>,
    config: &PyConfig,
    suite: Option<String>,
) -> PyResult<Vec<(String, bool, String)>> {
    let cfg = config.inner.clone();
    let reports = py
        .detach(|| run_checks(&cfg, suite.as_deref()))
        .map_err(to_py)?;
    Ok(reports
        .into_iter()
        .map(|r| (r.name.to_string(), r.passed, r.detail))
        .collect())
}

#[pymodule]
fn mllg(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyConfig>()?;
    m.add_function(wrap_pyfunction!(mesh_info, m)?)?;
    m.add_function(wrap_pyfunction!(apply_exp_sg, m)?)?;
    m.add_function(wrap_pyfunction!(sample_wiener_path, m)?)?;
    m.add_function(wrap_pyfunction!(run_path, m)?)?;
    m.add_function(wrap_pyfunction!(run_ensemble, m)?)?;
    m.add_function(wrap_pyfunction!(convergence, m)?)?;
    m.add_function(wrap_pyfunction!(check, m)?)?;
    Ok(())
}
