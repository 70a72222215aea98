//! Python module `blocksim`.
//!
//! Distributions can be passed either as `Distribution` objects or as flag
//! strings such as `"exp:1"` or `"gamma:0.5:2"`.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use blocksim::montecarlo::{self, McOptions};
use blocksim::{
    DistKind, DistributionSpec, Engine, EngineConfig, InfSimConfig, McEstimate, NetSimConfig, SampleStream,
    SimOutcome,
};

fn to_py(e: blocksim::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// A production-time or delay distribution.
#[pyclass(name = "Distribution", module = "blocksim", frozen, eq, from_py_object)]
#[derive(Clone, Copy, PartialEq)]
pub struct PyDistribution {
    inner: DistributionSpec,
}

#[pymethods]
impl PyDistribution {
    /// `kind` is one of exponential, gamma, chi_squared, constant. Gamma takes
    /// a shape; chi-squared takes its degrees of freedom as `mean` or `shape`.
    #[new]
    #[pyo3(signature = (kind, mean, shape=None))]
    fn new(kind: &str, mean: f64, shape: Option<f64>) -> PyResult<Self> {
        let inner = match kind {
            "exponential" | "exp" => DistributionSpec::exponential(mean),
            "gamma" => DistributionSpec::gamma(shape.ok_or_else(|| PyValueError::new_err("gamma needs a shape"))?, mean),
            "chi_squared" | "chi2" => DistributionSpec::chi_squared(shape.unwrap_or(mean)),
            "constant" | "const" => DistributionSpec::constant(mean),
            other => return Err(PyValueError::new_err(format!("unknown distribution kind {other:?}"))),
        }
        .map_err(to_py)?;
        Ok(Self { inner })
    }

    /// Parses the flag syntax, e.g. `Distribution.parse("gamma:0.5:2")`.
    #[staticmethod]
    fn parse(text: &str) -> PyResult<Self> {
        Ok(Self { inner: text.parse().map_err(to_py)? })
    }

    #[getter]
    fn kind(&self) -> &'static str {
        match self.inner.kind() {
            DistKind::Exponential => "exponential",
            DistKind::Gamma => "gamma",
            DistKind::ChiSquared => "chi_squared",
            DistKind::Constant => "constant",
        }
    }

    #[getter]
    fn mean(&self) -> f64 {
        self.inner.mean()
    }

    #[getter]
    fn shape(&self) -> Option<f64> {
        self.inner.shape()
    }

    #[getter]
    fn variance(&self) -> f64 {
        self.inner.variance()
    }

    fn cdf(&self, r: f64) -> f64 {
        self.inner.cdf(r)
    }

    /// `count` draws from substream `stream_id` of `seed`.
    #[pyo3(signature = (count, seed=0, stream_id=0))]
    fn sample(&self, count: usize, seed: u64, stream_id: u64) -> PyResult<Vec<f64>> {
        let sampler = self.inner.sampler().map_err(to_py)?;
        let mut stream = SampleStream::new(seed, stream_id);
        Ok((0..count).map(|_| sampler.sample(&mut stream)).collect())
    }

    fn __str__(&self) -> String {
        self.inner.to_string()
    }

    fn __repr__(&self) -> String {
        format!("Distribution.parse({:?})", self.inner.to_string())
    }
}

#[derive(FromPyObject)]
enum DistArg {
    Spec(PyDistribution),
    Text(String),
}

impl DistArg {
    fn spec(self) -> PyResult<DistributionSpec> {
        match self {
            DistArg::Spec(d) => Ok(d.inner),
            DistArg::Text(s) => s.parse().map_err(to_py),
        }
    }
}

/// Result of one simulation.
#[pyclass(name = "Outcome", module = "blocksim", frozen)]
pub struct PyOutcome {
    inner: SimOutcome,
}

#[pymethods]
impl PyOutcome {
    #[getter]
    fn p_n(&self) -> f64 {
        self.inner.p_n
    }

    #[getter]
    fn height(&self) -> usize {
        self.inner.final_height
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n
    }

    /// `h_k` per block, when recorded.
    #[getter]
    fn height_series(&self) -> Option<Vec<usize>> {
        self.inner.height_series.clone()
    }

    /// Parent of each block `1..n`, when the tree was recorded.
    #[getter]
    fn parents(&self) -> Option<Vec<usize>> {
        self.inner.tree.as_ref().map(|t| t.parents().to_vec())
    }

    /// The tree in JSON or DOT form, when recorded.
    #[pyo3(signature = (format="json"))]
    fn tree(&self, format: &str) -> PyResult<Option<String>> {
        let Some(tree) = &self.inner.tree else { return Ok(None) };
        let format = format.parse().map_err(to_py)?;
        Ok(Some(String::from_utf8_lossy(&tree.export(format)).into_owned()))
    }

    /// Closed-gap histogram of invalid blocks as a `{gap: count}` dict.
    fn gap_histogram<'py>(&self, py: Python<'py>) -> PyResult<Option<Bound<'py, PyDict>>> {
        let Some(tree) = &self.inner.tree else { return Ok(None) };
        let dict = PyDict::new(py);
        for (gap, count) in tree.invalid_gap_histogram().counts {
            dict.set_item(gap, count)?;
        }
        Ok(Some(dict))
    }

    /// Mean number of earlier blocks inspected per height computation.
    #[getter]
    fn mean_scan_window(&self) -> Option<f64> {
        self.inner.scan.map(|s| s.mean_window())
    }

    fn __repr__(&self) -> String {
        format!("Outcome(p_n={}, height={}, n={})", self.inner.p_n, self.inner.final_height, self.inner.n)
    }
}

#[pyfunction]
#[pyo3(signature = (m, n, alpha, beta, seed=0, record_tree=false, record_series=false))]
fn simulate_network(
    py: Python<'_>,
    m: usize,
    n: usize,
    alpha: DistArg,
    beta: DistArg,
    seed: u64,
    record_tree: bool,
    record_series: bool,
) -> PyResult<PyOutcome> {
    let cfg = NetSimConfig { record_tree, record_series, ..NetSimConfig::new(m, n, alpha.spec()?, beta.spec()?, seed) };
    let inner = py.detach(|| blocksim::simulate_network(&cfg)).map_err(to_py)?;
    Ok(PyOutcome { inner })
}

#[pyfunction]
#[pyo3(signature = (m, n, alpha, beta, seed=0, record_series=false))]
fn simulate_matrix(
    py: Python<'_>,
    m: usize,
    n: usize,
    alpha: DistArg,
    beta: DistArg,
    seed: u64,
    record_series: bool,
) -> PyResult<PyOutcome> {
    let cfg = NetSimConfig { record_series, ..NetSimConfig::new(m, n, alpha.spec()?, beta.spec()?, seed) };
    let inner = py.detach(|| blocksim::simulate_matrix(&cfg)).map_err(to_py)?;
    Ok(PyOutcome { inner })
}

#[pyfunction]
#[pyo3(signature = (n, alpha, beta, seed=0, pruning=true, record_series=false))]
fn simulate_infinite(
    py: Python<'_>,
    n: usize,
    alpha: DistArg,
    beta: DistArg,
    seed: u64,
    pruning: bool,
    record_series: bool,
) -> PyResult<PyOutcome> {
    let cfg = InfSimConfig {
        use_pruning: pruning,
        record_series,
        ..InfSimConfig::new(n, alpha.spec()?, beta.spec()?, seed)
    };
    let inner = py.detach(|| blocksim::simulate_infinite(&cfg)).map_err(to_py)?;
    Ok(PyOutcome { inner })
}

fn estimate_dict<'py>(py: Python<'py>, e: &McEstimate) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("mean", e.mean)?;
    d.set_item("std_error", e.std_error)?;
    d.set_item("q25", e.quantiles.q25)?;
    d.set_item("q50", e.quantiles.q50)?;
    d.set_item("q75", e.quantiles.q75)?;
    d.set_item("min", e.min)?;
    d.set_item("max", e.max)?;
    d.set_item("replications", e.replications)?;
    d.set_item("values", e.per_rep_values.clone())?;
    Ok(d)
}

/// Replicated estimate of `p_n`. `engine` is network, matrix or infinite;
/// the first two need `m`.
#[pyfunction]
#[pyo3(signature = (engine, n, alpha, beta, replications, seed=0, m=None, jobs=None, keep_values=false))]
#[allow(clippy::too_many_arguments)]
fn run_replications<'py>(
    py: Python<'py>,
    engine: &str,
    n: usize,
    alpha: DistArg,
    beta: DistArg,
    replications: usize,
    seed: u64,
    m: Option<usize>,
    jobs: Option<usize>,
    keep_values: bool,
) -> PyResult<Bound<'py, PyDict>> {
    let need_m = || m.ok_or_else(|| PyValueError::new_err(format!("the {engine} engine needs m")));
    let engine = match engine {
        "network" => Engine::Network { m: need_m()? },
        "matrix" => Engine::Matrix { m: need_m()? },
        "infinite" => Engine::Infinite { pruning: true },
        other => return Err(PyValueError::new_err(format!("unknown engine {other:?}"))),
    };
    let cfg = EngineConfig::new(engine, n, alpha.spec()?, beta.spec()?);
    let est = py
        .detach(|| montecarlo::run_replications(&cfg, replications, seed, McOptions { jobs, keep_values }))
        .map_err(to_py)?;
    estimate_dict(py, &est)
}

/// `alpha_mean / (alpha_mean + beta_mean)`.
#[pyfunction]
fn predicted_p(alpha_mean: f64, beta_mean: f64) -> PyResult<f64> {
    if !(alpha_mean > 0.0 && beta_mean >= 0.0) {
        return Err(PyValueError::new_err("need alpha_mean > 0 and beta_mean >= 0"));
    }
    Ok(montecarlo::predicted_p(alpha_mean, beta_mean).p)
}

#[pyfunction]
fn mixture_cdf(beta: DistArg, m: usize, r: f64) -> PyResult<f64> {
    if m == 0 {
        return Err(PyValueError::new_err("m must be at least 1"));
    }
    Ok(blocksim::mixture_cdf(&beta.spec()?, m, r))
}

#[pyfunction]
fn sup_gap_bound(m: usize) -> PyResult<f64> {
    if m == 0 {
        return Err(PyValueError::new_err("m must be at least 1"));
    }
    Ok(blocksim::sup_gap_bound(m))
}

/// "slow", "fast" or "chaotic".
#[pyfunction]
fn classify(alpha_mean: f64, beta_mean: f64) -> PyResult<String> {
    if !(alpha_mean > 0.0 && beta_mean >= 0.0) {
        return Err(PyValueError::new_err("need alpha_mean > 0 and beta_mean >= 0"));
    }
    Ok(blocksim::classify(alpha_mean, beta_mean).to_string())
}

#[pyfunction]
fn derived_metrics<'py>(py: Python<'py>, p_mean: f64, alpha_mean: f64) -> PyResult<Bound<'py, PyDict>> {
    if !(p_mean > 0.0 && p_mean <= 1.0 && alpha_mean > 0.0) {
        return Err(PyValueError::new_err("need 0 < p_mean <= 1 and alpha_mean > 0"));
    }
    let d = montecarlo::derived_metrics(p_mean, alpha_mean);
    let out = PyDict::new(py);
    out.set_item("growth_rate", d.growth_rate)?;
    out.set_item("invalid_rate", d.invalid_rate)?;
    out.set_item("confirmation_time", d.confirmation_time)?;
    Ok(out)
}

/// Runs the consistency checks; returns `{check_name: passed}`.
#[pyfunction]
#[pyo3(signature = (quick=true, configs=20, seed=0))]
fn validate<'py>(py: Python<'py>, quick: bool, configs: usize, seed: u64) -> PyResult<Bound<'py, PyDict>> {
    let opts = blocksim::validate::ValidationOptions { quick, configs, seed, fault: None };
    let report = py.detach(|| blocksim::validate::run_validation(&opts)).map_err(to_py)?;
    let out = PyDict::new(py);
    for check in &report.checks {
        out.set_item(check.name, check.passed())?;
    }
    Ok(out)
}

#[pymodule]
#[pyo3(name = "blocksim")]
pub fn blocksim_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyDistribution>()?;
    m.add_class::<PyOutcome>()?;
    m.add_function(wrap_pyfunction!(simulate_network, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_matrix, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_infinite, m)?)?;
    m.add_function(wrap_pyfunction!(run_replications, m)?)?;
    m.add_function(wrap_pyfunction!(predicted_p, m)?)?;
    m.add_function(wrap_pyfunction!(mixture_cdf, m)?)?;
    m.add_function(wrap_pyfunction!(sup_gap_bound, m)?)?;
    m.add_function(wrap_pyfunction!(classify, m)?)?;
    m.add_function(wrap_pyfunction!(derived_metrics, m)?)?;
    m.add_function(wrap_pyfunction!(validate, m)?)?;
    Ok(())
}
