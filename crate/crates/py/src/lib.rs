//! Python bindings: datasets, neighbor graphs, the greedy selectors and the
//! verification helpers.

use std::path::PathBuf;

use nbprune_core::dataset::{self as ds, ConfidenceMetric, ConfidenceVector, Matrix, MatrixFormat};
use nbprune_core::objective::{objective_of, GainMode, Utility};
use nbprune_core::selectors::{self, Budget, GreedyOptions, Method, SelectionInputs, SelectorConfig};
use nbprune_core::similarity::{self, GraphBuilder, DEFAULT_EDGE_CAP};
use nbprune_core::verify::{self, NoiseModel, SynthConfig};
use nbprune_core::{AuxScoreKind, AuxScores, Error, ErrorKind};
use pyo3::exceptions::{PyOSError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn to_py(e: Error) -> PyErr {
    match (&e, e.kind()) {
        (Error::Io { .. }, _) => PyOSError::new_err(e.to_string()),
        (_, ErrorKind::Guard) => PyRuntimeError::new_err(format!("E_GUARD: {e}")),
        (_, ErrorKind::Argument) => PyValueError::new_err(format!("E_ARG: {e}")),
        (_, ErrorKind::Format) => PyValueError::new_err(format!("E_FORMAT: {e}")),
    }
}

fn parse<T: std::str::FromStr<Err = Error>>(value: &str) -> PyResult<T> {
    value.parse().map_err(to_py)
}

fn matrix(rows: Vec<Vec<f32>>) -> PyResult<Matrix> {
    if rows.is_empty() {
        return Err(PyValueError::new_err("E_FORMAT: matrix has no rows"));
    }
    Matrix::from_rows(&rows).map_err(to_py)
}

fn rows(m: &Matrix) -> Vec<Vec<f32>> {
    m.iter_rows().map(<[f32]>::to_vec).collect()
}

fn json_to_py(py: Python<'_>, value: &serde_json::Value) -> PyResult<PyObject> {
    let json = py.import("json")?;
    Ok(json.call_method1("loads", (value.to_string(),))?.unbind())
}

#[pyclass(name = "Dataset", module = "nbprune")]
struct PyDataset {
    inner: ds::Dataset,
}

#[pymethods]
impl PyDataset {
    #[new]
    #[pyo3(signature = (embeddings, noisy_labels=None, num_classes=None, probabilities=None, ground_truth_labels=None))]
    fn new(
        embeddings: Vec<Vec<f32>>,
        noisy_labels: Option<Vec<usize>>,
        num_classes: Option<usize>,
        probabilities: Option<Vec<Vec<f32>>>,
        ground_truth_labels: Option<Vec<usize>>,
    ) -> PyResult<Self> {
        let probabilities = probabilities.map(matrix).transpose()?;
        let inner = ds::Dataset::new(matrix(embeddings)?, noisy_labels, num_classes, probabilities, ground_truth_labels)
            .map_err(to_py)?;
        Ok(Self { inner })
    }

    /// Loads a dataset from files (binary matrices, or CSV by extension).
    #[staticmethod]
    #[pyo3(signature = (embeddings, labels=None, probs=None, true_labels=None))]
    fn load(
        embeddings: PathBuf,
        labels: Option<PathBuf>,
        probs: Option<PathBuf>,
        true_labels: Option<PathBuf>,
    ) -> PyResult<Self> {
        let e = ds::load_matrix(&embeddings, MatrixFormat::from_path(&embeddings)).map_err(to_py)?;
        let l = labels.map(|p| ds::load_labels(&p)).transpose().map_err(to_py)?;
        let p = probs
            .map(|p| ds::load_matrix(&p, MatrixFormat::from_path(&p)))
            .transpose()
            .map_err(to_py)?;
        let t = true_labels.map(|p| ds::load_labels(&p)).transpose().map_err(to_py)?;
        let inner = ds::Dataset::new(e, l, None, p, t).map_err(to_py)?;
        Ok(Self { inner })
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    #[getter]
    fn num_classes(&self) -> usize {
        self.inner.num_classes()
    }

    #[getter]
    fn embeddings(&self) -> Vec<Vec<f32>> {
        rows(self.inner.embeddings())
    }

    #[getter]
    fn probabilities(&self) -> Option<Vec<Vec<f32>>> {
        self.inner.probabilities().map(rows)
    }

    #[getter]
    fn noisy_labels(&self) -> Option<Vec<usize>> {
        self.inner.noisy_labels().map(<[usize]>::to_vec)
    }

    #[getter]
    fn ground_truth_labels(&self) -> Option<Vec<usize>> {
        self.inner.ground_truth_labels().map(<[usize]>::to_vec)
    }

    /// Indices whose noisy label differs from the ground truth.
    fn noisy_indices(&self) -> Option<Vec<usize>> {
        self.inner.noisy_indices()
    }

    /// Per-example confidence from the class probabilities.
    #[pyo3(signature = (metric="max_prob"))]
    fn confidence(&self, metric: &str) -> PyResult<Vec<f64>> {
        let probs = self
            .inner
            .probabilities()
            .ok_or_else(|| PyValueError::new_err("E_ARG: dataset has no probabilities"))?;
        Ok(ds::compute_confidence(probs, parse(metric)?).map_err(to_py)?.values().to_vec())
    }

    fn __repr__(&self) -> String {
        format!(
            "Dataset(len={}, dim={}, num_classes={})",
            self.inner.len(),
            self.inner.embeddings().cols(),
            self.inner.num_classes()
        )
    }
}

#[pyclass(name = "NeighborGraph", module = "nbprune")]
struct PyGraph {
    inner: similarity::NeighborGraph,
}

#[pymethods]
impl PyGraph {
    /// Thresholded cosine-similarity graph with self edges.
    #[staticmethod]
    #[pyo3(signature = (embeddings, tau, max_edges=DEFAULT_EDGE_CAP))]
    fn build(embeddings: Vec<Vec<f32>>, tau: f64, max_edges: u64) -> PyResult<Self> {
        let inner = GraphBuilder::default()
            .edge_cap(max_edges)
            .build(&matrix(embeddings)?, tau)
            .map_err(to_py)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    #[pyo3(signature = (dataset, tau, max_edges=DEFAULT_EDGE_CAP))]
    fn from_dataset(dataset: &PyDataset, tau: f64, max_edges: u64) -> PyResult<Self> {
        let inner = GraphBuilder::default()
            .edge_cap(max_edges)
            .build(dataset.inner.embeddings(), tau)
            .map_err(to_py)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self {
            inner: similarity::load_graph(&path).map_err(to_py)?,
        })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        similarity::save_graph(&path, &self.inner).map_err(to_py)
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    #[getter]
    fn tau(&self) -> f64 {
        self.inner.tau()
    }

    #[getter]
    fn num_edges(&self) -> usize {
        self.inner.num_edges()
    }

    fn degree(&self, i: usize) -> PyResult<usize> {
        self.check(i)?;
        Ok(self.inner.degree(i))
    }

    /// `(index, weight)` pairs, self included, in index order.
    fn neighbors(&self, i: usize) -> PyResult<Vec<(usize, f32)>> {
        self.check(i)?;
        Ok(self.inner.neighbors(i).collect())
    }

    fn weight(&self, i: usize, j: usize) -> PyResult<Option<f32>> {
        self.check(i)?;
        self.check(j)?;
        Ok(self.inner.weight(i, j))
    }

    fn __repr__(&self) -> String {
        format!(
            "NeighborGraph(len={}, tau={}, edges={})",
            self.inner.len(),
            self.inner.tau(),
            self.inner.num_edges()
        )
    }
}

impl PyGraph {
    fn check(&self, i: usize) -> PyResult<()> {
        if i >= self.inner.len() {
            return Err(to_py(Error::IndexOutOfRange {
                index: i,
                len: self.inner.len(),
            }));
        }
        Ok(())
    }
}

fn greedy_options(gain_mode: &str, utility: &str, lazy: bool) -> PyResult<GreedyOptions> {
    Ok(GreedyOptions {
        gain_mode: parse::<GainMode>(gain_mode)?,
        utility: parse::<Utility>(utility)?,
        lazy,
    })
}

fn selection_dict<'py>(
    py: Python<'py>,
    state: &nbprune_core::SelectionState<'_>,
    utility: Utility,
) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("selected", state.selected().to_vec())?;
    d.set_item("nbr_conf", state.nbr_conf().to_vec())?;
    d.set_item("objective", state.total_objective(utility))?;
    Ok(d)
}

/// Greedy maximization of the neighborhood-confidence objective. Returns
/// the selection order, the reduced neighborhood confidences and the
/// objective.
#[pyfunction]
#[pyo3(signature = (graph, confidence, s, gain_mode="paper", utility="tanh", lazy=true))]
fn greedy<'py>(
    py: Python<'py>,
    graph: &PyGraph,
    confidence: Vec<f64>,
    s: usize,
    gain_mode: &str,
    utility: &str,
    lazy: bool,
) -> PyResult<Bound<'py, PyDict>> {
    let opts = greedy_options(gain_mode, utility, lazy)?;
    let state = py
        .allow_threads(|| selectors::greedy(&graph.inner, &confidence, s, opts))
        .map_err(to_py)?;
    selection_dict(py, &state, opts.utility)
}

/// Class-balanced greedy: classes take turns, each adding its best member.
#[pyfunction]
#[pyo3(signature = (graph, confidence, labels, num_classes, s, gain_mode="paper", utility="tanh", lazy=true))]
#[allow(clippy::too_many_arguments)]
fn greedy_balanced<'py>(
    py: Python<'py>,
    graph: &PyGraph,
    confidence: Vec<f64>,
    labels: Vec<usize>,
    num_classes: usize,
    s: usize,
    gain_mode: &str,
    utility: &str,
    lazy: bool,
) -> PyResult<Bound<'py, PyDict>> {
    let opts = greedy_options(gain_mode, utility, lazy)?;
    let state = py
        .allow_threads(|| selectors::greedy_balanced(&graph.inner, &confidence, &labels, num_classes, s, opts))
        .map_err(to_py)?;
    selection_dict(py, &state, opts.utility)
}

#[pyfunction]
#[pyo3(signature = (graph, confidence, subset, utility="tanh"))]
fn objective(graph: &PyGraph, confidence: Vec<f64>, subset: Vec<usize>, utility: &str) -> PyResult<f64> {
    objective_of(&graph.inner, &confidence, &subset, parse(utility)?).map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (probabilities, metric="max_prob"))]
fn compute_confidence(probabilities: Vec<Vec<f32>>, metric: &str) -> PyResult<Vec<f64>> {
    Ok(ds::compute_confidence(&matrix(probabilities)?, parse(metric)?)
        .map_err(to_py)?
        .values()
        .to_vec())
}

/// Runs any selector by name and returns its report as a dict, including
/// the selected indices.
#[pyfunction]
#[pyo3(signature = (
    dataset, method, size=None, ratio=None, graph=None, confidence=None, scores=None,
    utility="tanh", gain_mode="paper", lazy=true, seed=0
))]
#[allow(clippy::too_many_arguments)]
fn select(
    py: Python<'_>,
    dataset: &PyDataset,
    method: &str,
    size: Option<usize>,
    ratio: Option<f64>,
    graph: Option<&PyGraph>,
    confidence: Option<Vec<f64>>,
    scores: Option<Vec<f64>>,
    utility: &str,
    gain_mode: &str,
    lazy: bool,
    seed: u64,
) -> PyResult<PyObject> {
    let method: Method = parse(method)?;
    let budget = match (size, ratio) {
        (Some(n), None) => Budget::Size(n),
        (None, Some(r)) => Budget::Ratio(r),
        _ => return Err(PyValueError::new_err("E_ARG: give exactly one of size or ratio")),
    };
    let mut config = SelectorConfig::new(method, budget);
    config.utility = parse(utility)?;
    config.gain_mode = parse(gain_mode)?;
    config.lazy = lazy;
    config.seed = seed;
    let confidence = confidence
        .map(|c| ConfidenceVector::new(c, ConfidenceMetric::External))
        .transpose()
        .map_err(to_py)?;
    let kind = match method {
        Method::SmallLoss => AuxScoreKind::Loss,
        Method::Forgetting => AuxScoreKind::ForgettingEvents,
        Method::Ssp => AuxScoreKind::SspPrototypicality,
        _ => AuxScoreKind::GradNorm,
    };
    let scores = scores.map(|s| AuxScores::new(s, kind)).transpose().map_err(to_py)?;
    let mut inputs = SelectionInputs::new(&dataset.inner);
    if let Some(g) = graph {
        config.tau = Some(g.inner.tau());
        inputs = inputs.graph(&g.inner);
    }
    if let Some(c) = &confidence {
        inputs = inputs.confidence(c);
    }
    if let Some(s) = &scores {
        inputs = inputs.scores(s);
    }
    let report = py
        .allow_threads(|| selectors::run_selector(&config, &inputs))
        .map_err(to_py)?;
    let mut json = report.to_json();
    json["selected"] = serde_json::json!(report.selected);
    json_to_py(py, &json)
}

/// Clustered synthetic data with per-class label flips.
#[pyfunction]
#[pyo3(signature = (
    classes=10, per_class=100, dim=32, concentration=20.0, separation=2.0, noise=0.2,
    symmetric=false, seed=0
))]
#[allow(clippy::too_many_arguments)]
fn generate_synthetic(
    classes: usize,
    per_class: usize,
    dim: usize,
    concentration: f64,
    separation: f64,
    noise: f64,
    symmetric: bool,
    seed: u64,
) -> PyResult<PyDataset> {
    let cfg = SynthConfig {
        num_classes: classes,
        points_per_class: per_class,
        embedding_dim: dim,
        within_class_concentration: concentration,
        between_class_separation: separation,
        noise_rate: noise,
        noise_model: if symmetric {
            NoiseModel::Symmetric
        } else {
            NoiseModel::AsymmetricNextClass
        },
        seed,
        ..Default::default()
    };
    Ok(PyDataset {
        inner: verify::generate_synthetic(&cfg).map_err(to_py)?,
    })
}

/// `(alpha, beta)`: mean neighbor count and mean cross-class neighbor
/// fraction.
#[pyfunction]
fn measure_expansion_separation(dataset: &PyDataset, graph: &PyGraph) -> PyResult<(f64, f64)> {
    verify::measure_expansion_separation(&dataset.inner, &graph.inner).map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (graph, confidence, s, utility="tanh"))]
fn brute_force_optimum(graph: &PyGraph, confidence: Vec<f64>, s: usize, utility: &str) -> PyResult<(Vec<usize>, f64)> {
    verify::brute_force_optimum(&graph.inner, &confidence, s, parse(utility)?).map_err(to_py)
}

#[pyfunction]
fn relabel_proxy(dataset: &PyDataset, graph: &PyGraph, confidence: Vec<f64>, selected: Vec<usize>) -> PyResult<Vec<bool>> {
    let conf = ConfidenceVector::new(confidence, ConfidenceMetric::External).map_err(to_py)?;
    verify::relabel_proxy(&dataset.inner, &graph.inner, &conf, &selected).map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (nbr_conf, corrected, num_bins=verify::DEFAULT_BINS))]
fn correlation_report(py: Python<'_>, nbr_conf: Vec<f64>, corrected: Vec<bool>, num_bins: usize) -> PyResult<PyObject> {
    let report = verify::correlation_report(&nbr_conf, &corrected, num_bins).map_err(to_py)?;
    json_to_py(py, &serde_json::to_value(report).expect("serializable"))
}

#[pyfunction]
fn tau_preset(name: &str) -> Option<f64> {
    selectors::tau_preset(name)
}

#[pymodule]
fn _nbprune(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyDataset>()?;
    m.add_class::<PyGraph>()?;
    m.add_function(wrap_pyfunction!(greedy, m)?)?;
    m.add_function(wrap_pyfunction!(greedy_balanced, m)?)?;
    m.add_function(wrap_pyfunction!(objective, m)?)?;
    m.add_function(wrap_pyfunction!(compute_confidence, m)?)?;
    m.add_function(wrap_pyfunction!(select, m)?)?;
    m.add_function(wrap_pyfunction!(generate_synthetic, m)?)?;
    m.add_function(wrap_pyfunction!(measure_expansion_separation, m)?)?;
    m.add_function(wrap_pyfunction!(brute_force_optimum, m)?)?;
    m.add_function(wrap_pyfunction!(relabel_proxy, m)?)?;
    m.add_function(wrap_pyfunction!(correlation_report, m)?)?;
    m.add_function(wrap_pyfunction!(tau_preset, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
