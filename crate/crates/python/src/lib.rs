//! Python bindings: graphs, labelings, noise, the tree and graph
//! recoverers, baselines, bounds and experiment sweeps.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use serde::Serialize;

use catrec::baselines::{self, BpOptions};
use catrec::bounds;
use catrec::datagen::{self, NoiseParams};
use catrec::decomposition::{self, Heuristic};
use catrec::error::Error;
use catrec::experiment::{self, ExperimentConfig};
use catrec::global::{self, RecoveryOptions};
use catrec::graph::{self, EdgeSigns, LabeledGraph, NodeLabeling, Sign};
use catrec::local::{LocalOptions, Matcher};
use catrec::tree_solver;

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Io(_) => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

trait OrPy<T> {
    fn py(self) -> PyResult<T>;
}

impl<T> OrPy<T> for catrec::error::Result<T> {
    fn py(self) -> PyResult<T> {
        self.map_err(py_err)
    }
}

/// Serializable value as a Python object, through JSON. A top-level
/// `labels` labeling is flattened to its label list.
fn to_py<'py>(py: Python<'py>, value: &impl Serialize) -> PyResult<Bound<'py, PyAny>> {
    let mut value = serde_json::to_value(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    if let Some(labels) = value.get_mut("labels") {
        if let Some(inner) = labels.get("labels").cloned() {
            *labels = inner;
        }
    }
    py.import("json")?.call_method1("loads", (value.to_string(),))
}

fn labeling(labels: Vec<u32>, k: u32) -> PyResult<NodeLabeling> {
    NodeLabeling::new(labels, k).py()
}

fn signs(x: Vec<Sign>) -> PyResult<EdgeSigns> {
    EdgeSigns::new(x).py()
}

/// Undirected simple graph on vertices `0..n`.
#[pyclass(name = "Graph", module = "catrec", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyGraph {
    inner: LabeledGraph,
}

#[pymethods]
impl PyGraph {
    #[new]
    fn new(n: usize, edges: Vec<(usize, usize)>) -> PyResult<Self> {
        Ok(Self { inner: LabeledGraph::new(n, edges).py()? })
    }

    #[staticmethod]
    fn grid(rows: usize, cols: usize) -> PyResult<Self> {
        Ok(Self { inner: LabeledGraph::grid(rows, cols).py()? })
    }

    #[staticmethod]
    fn path(n: usize) -> PyResult<Self> {
        Ok(Self { inner: LabeledGraph::path(n).py()? })
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn m(&self) -> usize {
        self.inner.m()
    }

    #[getter]
    fn edges(&self) -> Vec<(usize, usize)> {
        self.inner.edges().to_vec()
    }

    fn is_tree(&self) -> bool {
        self.inner.is_tree()
    }

    fn is_connected(&self) -> bool {
        self.inner.is_connected()
    }

    fn max_degree(&self) -> usize {
        self.inner.max_degree()
    }

    fn __repr__(&self) -> String {
        format!("Graph(n={}, m={})", self.inner.n(), self.inner.m())
    }
}

/// Random tree with `n` vertices and labels covering `0..k`.
#[pyfunction]
fn gen_random_tree(n: usize, k: u32, seed: u64) -> PyResult<(PyGraph, Vec<u32>)> {
    let (g, y) = datagen::gen_random_tree(n, k, seed).py()?;
    Ok((PyGraph { inner: g }, y.into_labels()))
}

/// Random connected graph: spanning tree plus `extra` edges.
#[pyfunction]
fn gen_random_connected(n: usize, extra: usize, seed: u64) -> PyResult<PyGraph> {
    Ok(PyGraph { inner: datagen::gen_random_connected(n, extra, seed).py()? })
}

/// Grid graph and labels quantized from a random mosaic image.
#[pyfunction]
#[pyo3(signature = (rows, cols, k, seed, cells = 6))]
fn gen_grid(rows: usize, cols: usize, k: u32, seed: u64, cells: usize) -> PyResult<(PyGraph, Vec<u32>)> {
    let inst = datagen::quantize_image(&datagen::mosaic_image(rows, cols, cells, seed).py()?, k).py()?;
    Ok((PyGraph { inner: inst.graph }, inst.truth.into_labels()))
}

/// Observed labels `z` and edge signs `x` drawn from the noise channels.
#[pyfunction]
fn apply_noise(graph: &PyGraph, truth: Vec<u32>, k: u32, p: f64, q: f64, seed: u64) -> PyResult<(Vec<u32>, Vec<Sign>)> {
    let y = labeling(truth, k)?;
    let (z, x) = datagen::apply_noise(&graph.inner, &y, &NoiseParams::new(p, q, k, seed).py()?).py()?;
    Ok((z.into_labels(), x.signs().to_vec()))
}

#[pyfunction]
fn induce_edge_signs(graph: &PyGraph, labels: Vec<u32>, k: u32) -> PyResult<Vec<Sign>> {
    Ok(graph::induce_edge_signs(&graph.inner, &labeling(labels, k)?).py()?.signs().to_vec())
}

#[pyfunction]
fn edge_disagreement(graph: &PyGraph, labels: Vec<u32>, x: Vec<Sign>, k: u32) -> PyResult<usize> {
    graph::edge_disagreement(&graph.inner, &labeling(labels, k)?, &signs(x)?).py()
}

#[pyfunction]
fn hamming(a: Vec<u32>, b: Vec<u32>, k: u32) -> PyResult<usize> {
    graph::hamming(&labeling(a, k)?, &labeling(b, k)?).py()
}

/// High-probability bound `t` on flipped tree edges and its floor.
#[pyfunction]
#[pyo3(signature = (n, p, delta = 0.1))]
fn edge_budget(py: Python<'_>, n: usize, p: f64, delta: f64) -> PyResult<Bound<'_, PyAny>> {
    to_py(py, &tree_solver::edge_budget(n, p, delta).py()?)
}

/// Exact budgeted recovery on a tree.
#[pyfunction]
fn solve_tree<'py>(
    py: Python<'py>,
    graph: &PyGraph,
    x: Vec<Sign>,
    z: Vec<u32>,
    k: u32,
    budget: usize,
) -> PyResult<Bound<'py, PyAny>> {
    to_py(py, &tree_solver::solve_tree(&graph.inner, &signs(x)?, &labeling(z, k)?, k, budget).py()?)
}

/// Tree decomposition: bags, bag-tree edges, extended bags and statistics.
#[pyfunction]
#[pyo3(signature = (graph, heuristic = "min-fill"))]
fn decompose<'py>(py: Python<'py>, graph: &PyGraph, heuristic: &str) -> PyResult<Bound<'py, PyAny>> {
    let td = decomposition::decompose(&graph.inner, heuristic.parse::<Heuristic>().py()?).py()?;
    let valid = decomposition::validate_decomposition(&graph.inner, &td).is_valid();
    let out = serde_json::json!({
        "bags": td.bags,
        "tree_edges": td.tree_edges,
        "extended_bags": td.extended_bags,
        "stats": td.stats,
        "valid": valid,
    });
    to_py(py, &out)
}

/// Decomposition-based recovery; returns the full report as a dict.
#[pyfunction]
#[pyo3(signature = (graph, x, z, k, p = None, delta = 0.1, matcher = "greedy", restarts = 4, heuristic = "min-fill", use_p_prime = false, seed = 0, truth = None))]
#[allow(clippy::too_many_arguments)]
fn recover_graph<'py>(
    py: Python<'py>,
    graph: &PyGraph,
    x: Vec<Sign>,
    z: Vec<u32>,
    k: u32,
    p: Option<f64>,
    delta: f64,
    matcher: &str,
    restarts: usize,
    heuristic: &str,
    use_p_prime: bool,
    seed: u64,
    truth: Option<Vec<u32>>,
) -> PyResult<Bound<'py, PyAny>> {
    let opts = RecoveryOptions {
        heuristic: heuristic.parse().py()?,
        local: LocalOptions { matcher: matcher.parse::<Matcher>().py()?, restarts, seed },
        delta,
        p,
        use_p_prime,
    };
    let truth = truth.map(|t| labeling(t, k)).transpose()?;
    let x = signs(x)?;
    let z = labeling(z, k)?;
    let rep = py.detach(|| global::recover_graph(&graph.inner, &x, &z, k, &opts, truth.as_ref())).py()?;
    to_py(py, &rep)
}

#[pyfunction]
fn majority_vote(graph: &PyGraph, x: Vec<Sign>, z: Vec<u32>, k: u32) -> PyResult<Vec<u32>> {
    Ok(baselines::majority_vote(&graph.inner, &signs(x)?, &labeling(z, k)?, k).py()?.into_labels())
}

#[pyfunction]
#[pyo3(signature = (graph, x, z, p, q, k, max_iters = 50, damping = 0.5, tolerance = 1e-6))]
#[allow(clippy::too_many_arguments)]
fn loopy_bp(
    graph: &PyGraph,
    x: Vec<Sign>,
    z: Vec<u32>,
    p: f64,
    q: f64,
    k: u32,
    max_iters: usize,
    damping: f64,
    tolerance: f64,
) -> PyResult<Vec<u32>> {
    let opts = BpOptions { max_iters, damping, tolerance };
    Ok(baselines::loopy_bp(&graph.inner, &signs(x)?, &labeling(z, k)?, p, q, k, &opts).py()?.into_labels())
}

#[pyfunction]
#[pyo3(signature = (n, k, p, q, delta = 0.1))]
fn tree_bound(py: Python<'_>, n: usize, k: u32, p: f64, q: f64, delta: f64) -> PyResult<Bound<'_, PyAny>> {
    to_py(py, &bounds::tree_bound(n, k, p, q, delta).py()?)
}

#[pyfunction]
#[pyo3(signature = (graph, k, p, q, delta = 0.1, heuristic = "min-fill"))]
fn graph_bound<'py>(
    py: Python<'py>,
    graph: &PyGraph,
    k: u32,
    p: f64,
    q: f64,
    delta: f64,
    heuristic: &str,
) -> PyResult<Bound<'py, PyAny>> {
    let td = decomposition::decompose(&graph.inner, heuristic.parse::<Heuristic>().py()?).py()?;
    to_py(py, &bounds::graph_bound(&td, graph.inner.n(), k, p, q, delta).py()?)
}

#[pyfunction]
fn threshold(py: Python<'_>, q: f64, k: u32, max_degree: usize) -> PyResult<Bound<'_, PyAny>> {
    to_py(py, &bounds::threshold_report(q, k, max_degree).py()?)
}

#[pyfunction]
fn separation_constant(k: u32, q: f64) -> f64 {
    bounds::separation_constant(k, q)
}

/// Runs an experiment from its JSON config; returns per-trial records and
/// the summary as lists of dicts.
#[pyfunction]
fn run_experiment<'py>(py: Python<'py>, config_json: &str) -> PyResult<(Bound<'py, PyAny>, Bound<'py, PyAny>)> {
    let cfg = ExperimentConfig::from_json(config_json).py()?;
    let out = py.detach(|| experiment::run_sweep(&cfg)).py()?;
    Ok((to_py(py, &out.records)?, to_py(py, &out.summary)?))
}

#[pymodule(name = "catrec")]
fn catrec_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGraph>()?;
    m.add_function(wrap_pyfunction!(gen_random_tree, m)?)?;
    m.add_function(wrap_pyfunction!(gen_random_connected, m)?)?;
    m.add_function(wrap_pyfunction!(gen_grid, m)?)?;
    m.add_function(wrap_pyfunction!(apply_noise, m)?)?;
    m.add_function(wrap_pyfunction!(induce_edge_signs, m)?)?;
    m.add_function(wrap_pyfunction!(edge_disagreement, m)?)?;
    m.add_function(wrap_pyfunction!(hamming, m)?)?;
    m.add_function(wrap_pyfunction!(edge_budget, m)?)?;
    m.add_function(wrap_pyfunction!(solve_tree, m)?)?;
    m.add_function(wrap_pyfunction!(decompose, m)?)?;
    m.add_function(wrap_pyfunction!(recover_graph, m)?)?;
    m.add_function(wrap_pyfunction!(majority_vote, m)?)?;
    m.add_function(wrap_pyfunction!(loopy_bp, m)?)?;
    m.add_function(wrap_pyfunction!(tree_bound, m)?)?;
    m.add_function(wrap_pyfunction!(graph_bound, m)?)?;
    m.add_function(wrap_pyfunction!(threshold, m)?)?;
    m.add_function(wrap_pyfunction!(separation_constant, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    Ok(())
}
