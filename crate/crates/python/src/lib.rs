//! Python bindings. Data is passed as a sequence of rows (a list of lists or
//! a 2-D numpy array); partitions are zero-based lists.

use ndarray::Array2;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use sugsvarsel as core;
use sugsvarsel::{BetaGrid, Criterion, PmlMode, SearchConfig};

fn to_py(e: core::Error) -> PyErr {
    use core::Error::*;
    match e {
        InvalidHyperparameter(_)
        | DimensionMismatch { .. }
        | InvalidArgument(_)
        | InvalidPartition(_) => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn to_array(rows: Vec<Vec<f64>>) -> PyResult<Array2<f64>> {
    let n = rows.len();
    let d = rows.first().map_or(0, Vec::len);
    if n == 0 || d == 0 {
        return Err(PyValueError::new_err(
            "data must have at least one row and column",
        ));
    }
    if let Some(i) = rows.iter().position(|r| r.len() != d) {
        return Err(PyValueError::new_err(format!(
            "row {i} has {} values, expected {d}",
            rows[i].len()
        )));
    }
    if rows.iter().flatten().any(|v| !v.is_finite()) {
        return Err(PyValueError::new_err("data contains non-finite values"));
    }
    Ok(
        Array2::from_shape_vec((n, d), rows.into_iter().flatten().collect())
            .expect("shape checked"),
    )
}

fn rows_of(a: &Array2<f64>) -> Vec<Vec<f64>> {
    a.rows().into_iter().map(|r| r.to_vec()).collect()
}

/// Normal-inverse-chi-squared prior shared by every variable.
#[pyclass(frozen, from_py_object, module = "sugsvarsel")]
#[derive(Clone)]
struct Hyperparameters {
    inner: core::Hyperparameters,
}

#[pymethods]
impl Hyperparameters {
    #[new]
    fn new(mu0: Vec<f64>, lambda0: f64, nu0: f64, s0: f64) -> PyResult<Self> {
        let inner = core::Hyperparameters::new(mu0, lambda0, nu0, s0).map_err(to_py)?;
        Ok(Self { inner })
    }

    /// Default prior: per-variable means, nu0 = number of variables.
    #[staticmethod]
    fn from_data(data: Vec<Vec<f64>>) -> PyResult<Self> {
        let a = to_array(data)?;
        let inner = core::Hyperparameters::from_data(a.view()).map_err(to_py)?;
        Ok(Self { inner })
    }

    #[getter]
    fn mu0(&self) -> Vec<f64> {
        self.inner.mu0.clone()
    }

    #[getter]
    fn lambda0(&self) -> f64 {
        self.inner.lambda0
    }

    #[getter]
    fn nu0(&self) -> f64 {
        self.inner.nu0
    }

    #[getter]
    fn s0(&self) -> f64 {
        self.inner.s0
    }

    fn __repr__(&self) -> String {
        format!(
            "Hyperparameters(d={}, lambda0={}, nu0={}, s0={})",
            self.inner.n_vars(),
            self.inner.lambda0,
            self.inner.nu0,
            self.inner.s0
        )
    }
}

/// One fitted model from the restart search.
#[pyclass(frozen, get_all, skip_from_py_object, module = "sugsvarsel")]
#[derive(Clone)]
struct Model {
    z: Vec<usize>,
    gamma: Vec<bool>,
    log_ml: f64,
    log_pml: Option<f64>,
    n_clusters: usize,
    task_id: usize,
    subsample: usize,
    ordering: usize,
    seed: u64,
    degenerate_gamma: bool,
}

impl From<&core::FittedModel> for Model {
    fn from(m: &core::FittedModel) -> Self {
        Self {
            z: m.z.clone(),
            gamma: m.gamma.clone(),
            log_ml: m.log_ml,
            log_pml: m.log_pml,
            n_clusters: m.n_clusters(),
            task_id: m.provenance.task_id,
            subsample: m.provenance.subsample,
            ordering: m.provenance.ordering,
            seed: m.provenance.seed,
            degenerate_gamma: m.degenerate_gamma,
        }
    }
}

#[pymethods]
impl Model {
    fn __repr__(&self) -> String {
        format!(
            "Model(n_clusters={}, relevant={}, log_ml={:.4})",
            self.n_clusters,
            self.gamma.iter().filter(|g| **g).count(),
            self.log_ml
        )
    }
}

/// Output of `cluster`: every model plus the averaged summary.
#[pyclass(frozen, get_all, module = "sugsvarsel")]
struct ClusterResult {
    /// Partition summarised from the averaged co-clustering matrix.
    partition: Vec<usize>,
    /// Model chosen by the selection criterion.
    best: Model,
    /// All models, best marginal likelihood first.
    models: Vec<Model>,
    /// Indices into `models` kept in Occam's window.
    window: Vec<usize>,
    weights: Vec<f64>,
    coclustering: Vec<Vec<f64>>,
    variable_scores: Vec<f64>,
    n_failures: usize,
}

#[pymethods]
impl ClusterResult {
    fn __repr__(&self) -> String {
        format!(
            "ClusterResult(n_models={}, window={}, n_clusters={})",
            self.models.len(),
            self.window.len(),
            self.partition.iter().max().map_or(0, |k| k + 1)
        )
    }
}

fn parse_criterion(s: &str) -> PyResult<Criterion> {
    match s {
        "ml" => Ok(Criterion::Ml),
        "pml" => Ok(Criterion::Pml),
        _ => Err(PyValueError::new_err(format!("unknown criterion {s:?}"))),
    }
}

fn parse_pml_mode(s: &str) -> PyResult<PmlMode> {
    match s {
        "exact-loo" => Ok(PmlMode::ExactLoo),
        "full-data-approx" => Ok(PmlMode::FullDataApprox),
        _ => Err(PyValueError::new_err(format!("unknown pml_mode {s:?}"))),
    }
}

/// Cluster `data` with sub-sampled restarts and average the models.
#[pyfunction]
#[pyo3(signature = (
    data, *, hyper=None, standardize=false, seed=0, subsamples=None, orderings=30,
    iterations=2, p1_fraction=0.1, prior_on=0.5, criterion="ml", pml_mode="exact-loo",
    window_k=20.0, cut_height=0.5, threads=None
))]
#[allow(clippy::too_many_arguments)]
fn cluster(
    py: Python<'_>,
    data: Vec<Vec<f64>>,
    hyper: Option<Hyperparameters>,
    standardize: bool,
    seed: u64,
    subsamples: Option<usize>,
    orderings: usize,
    iterations: usize,
    p1_fraction: f64,
    prior_on: f64,
    criterion: &str,
    pml_mode: &str,
    window_k: f64,
    cut_height: f64,
    threads: Option<usize>,
) -> PyResult<ClusterResult> {
    let mut a = to_array(data)?;
    if standardize {
        core::data::standardize(&mut a);
    }
    let criterion = parse_criterion(criterion)?;
    let config = SearchConfig {
        prior_on,
        iterations,
        subsamples: subsamples.unwrap_or_else(|| core::default_subsamples(a.ncols())),
        orderings,
        p1_fraction,
        seed,
        threads,
        pml_mode: Some(parse_pml_mode(pml_mode)?),
        ..SearchConfig::default()
    };
    let hyper = match hyper {
        Some(h) => h.inner,
        None => core::Hyperparameters::from_data(a.view()).map_err(to_py)?,
    };
    py.detach(|| {
        let set = core::full_search(a.view(), &config, &hyper, &BetaGrid::default())?;
        let best = core::select_best(&set.models, criterion)?;
        let summary = core::average_models(&set.models, window_k, cut_height)?;
        Ok(ClusterResult {
            partition: summary.partition,
            best: best.into(),
            models: set.models.iter().map(Model::from).collect(),
            weights: summary.weights.weights(),
            window: summary.weights.window,
            coclustering: rows_of(summary.coclustering.as_array()),
            variable_scores: summary.variable_scores.0,
            n_failures: set.failures.len(),
        })
    })
    .map_err(to_py)
}

/// Synthetic data with known clusters and relevant variables.
#[pyclass(frozen, get_all, module = "sugsvarsel")]
struct Simulation {
    data: Vec<Vec<f64>>,
    z: Vec<usize>,
    gamma: Vec<bool>,
}

fn simulation(spec: core::ScenarioSpec) -> PyResult<Simulation> {
    let sim = core::simulate(&spec).map_err(to_py)?;
    Ok(Simulation {
        data: rows_of(&sim.data),
        z: sim.true_z,
        gamma: sim.true_gamma,
    })
}

/// Three components (weights 0.5/0.3/0.2, means 0, 2, -2) on the first
/// `relevant_fraction` of the variables, standard normal noise elsewhere.
#[pyfunction]
#[pyo3(signature = (n=100, d=200, relevant_fraction=0.5, seed=0))]
fn simulate_high_dimensional(
    n: usize,
    d: usize,
    relevant_fraction: f64,
    seed: u64,
) -> PyResult<Simulation> {
    simulation(core::ScenarioSpec::high_dimensional(
        n,
        d,
        relevant_fraction,
        seed,
    ))
}

/// 30 observations, two relevant and two noise variables, one of the three
/// components correlated.
#[pyfunction]
#[pyo3(signature = (seed=0))]
fn simulate_correlated_component(seed: u64) -> PyResult<Simulation> {
    simulation(core::ScenarioSpec::correlated_component(seed))
}

#[pyfunction]
fn adjusted_rand_index(a: Vec<usize>, b: Vec<usize>) -> PyResult<f64> {
    core::adjusted_rand_index(&a, &b).map_err(to_py)
}

/// Fractions of truly relevant and truly irrelevant variables recovered.
#[pyfunction]
fn variable_recovery(gamma: Vec<bool>, truth: Vec<bool>) -> PyResult<(f64, f64)> {
    core::variable_recovery(&gamma, &truth).map_err(to_py)
}

/// Log marginal likelihood of a partition and switch vector.
#[pyfunction]
#[pyo3(signature = (data, z, gamma, hyper=None))]
fn log_marginal_likelihood(
    data: Vec<Vec<f64>>,
    z: Vec<usize>,
    gamma: Vec<bool>,
    hyper: Option<Hyperparameters>,
) -> PyResult<f64> {
    let a = to_array(data)?;
    let hyper = match hyper {
        Some(h) => h.inner,
        None => core::Hyperparameters::from_data(a.view()).map_err(to_py)?,
    };
    core::log_marginal_likelihood_model(a.view(), &z, &gamma, &hyper).map_err(to_py)
}

/// Average-linkage summary of a co-clustering matrix.
#[pyfunction]
#[pyo3(signature = (coclustering, cut_height=0.5))]
fn summarize(coclustering: Vec<Vec<f64>>, cut_height: f64) -> PyResult<Vec<usize>> {
    let s = core::CoClusterMatrix::new(to_array(coclustering)?).map_err(to_py)?;
    Ok(core::summarize(&s, cut_height))
}

#[pymodule]
#[pyo3(name = "sugsvarsel")]
fn sugsvarsel_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<Hyperparameters>()?;
    m.add_class::<Model>()?;
    m.add_class::<ClusterResult>()?;
    m.add_class::<Simulation>()?;
    m.add_function(wrap_pyfunction!(cluster, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_high_dimensional, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_correlated_component, m)?)?;
    m.add_function(wrap_pyfunction!(adjusted_rand_index, m)?)?;
    m.add_function(wrap_pyfunction!(variable_recovery, m)?)?;
    m.add_function(wrap_pyfunction!(log_marginal_likelihood, m)?)?;
    m.add_function(wrap_pyfunction!(summarize, m)?)?;
    Ok(())
}
