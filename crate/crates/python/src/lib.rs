//! Python bindings for lmnet.

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;
use rand::SeedableRng;

use lmnet_core::inference::{infer, infer_batch, BBConfig, InferMethod, InferenceResult};
use lmnet_core::io::{read_multilabel_svmlight, ModelFile, SvmlightOptions, TrainMeta};
use lmnet_core::ordering::{order_strategy, OrderKind};
use lmnet_core::synth::{random_weights, sample_bm, sample_sbn, InputModel, SynthConfig};
use lmnet_core::{Dataset, GraphKind, GraphSpec, Instance, Label, Potentials, TrainConfig};

fn to_py(e: lmnet_core::Error) -> PyErr {
    match e {
        lmnet_core::Error::Io(io) => PyIOError::new_err(io.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn parse_kind(kind: &str) -> PyResult<GraphKind> {
    match kind {
        "lmsbn" | "sbn" | "directed" => Ok(GraphKind::Directed),
        "lmbm" | "bm" | "undirected" => Ok(GraphKind::Undirected),
        other => Err(PyValueError::new_err(format!("unknown model kind '{other}'"))),
    }
}

fn build_graph(kind: GraphKind, shape: &str, k: usize, d: usize, order: Vec<usize>) -> PyResult<GraphSpec> {
    match shape {
        "full" => GraphSpec::full(kind, k, d, order),
        "chain" => GraphSpec::chain(kind, k, d, order),
        "independent" => GraphSpec::independent(kind, k, d),
        other => return Err(PyValueError::new_err(format!("unknown graph '{other}'"))),
    }
    .map_err(to_py)
}

fn to_labels(y: &[i64]) -> PyResult<Vec<Label>> {
    y.iter()
        .map(|&v| match v {
            1 => Ok(1),
            -1 => Ok(-1),
            other => Err(PyValueError::new_err(format!("labels must be +1 or -1, got {other}"))),
        })
        .collect()
}

fn to_dataset(x: Vec<Vec<f64>>, y: Vec<Vec<i64>>) -> PyResult<Dataset> {
    if x.len() != y.len() {
        return Err(PyValueError::new_err(format!("{} inputs but {} label vectors", x.len(), y.len())));
    }
    let (Some(x0), Some(y0)) = (x.first(), y.first()) else {
        return Err(PyValueError::new_err("dataset is empty"));
    };
    let (k, d) = (y0.len(), x0.len());
    let instances =
        x.into_iter().zip(&y).map(|(x, y)| Ok(Instance { x, y: to_labels(y)? })).collect::<PyResult<Vec<_>>>()?;
    Dataset::new(k, d, instances).map_err(to_py)
}

/// Inputs and ±1 label vectors as plain lists.
type Samples = (Vec<Vec<f64>>, Vec<Vec<i64>>);

fn from_dataset(data: Dataset) -> Samples {
    data.instances.into_iter().map(|i| (i.x, i.y.into_iter().map(i64::from).collect())).unzip()
}

fn result_dict<'py>(py: Python<'py>, r: &InferenceResult) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("y", r.y_hat.iter().map(|&v| i64::from(v)).collect::<Vec<_>>())?;
    d.set_item("loss", r.objective)?;
    d.set_item("states", r.states_visited)?;
    d.set_item("status", r.status.as_str())?;
    Ok(d)
}

/// A trained (or planted) model: graph, weights and training metadata.
#[pyclass(name = "Model", module = "lmnet")]
struct PyModel {
    inner: ModelFile,
}

impl PyModel {
    fn method(&self, method: &str, s: f64, max_states: Option<u64>, max_sweeps: usize) -> PyResult<InferMethod> {
        match method {
            "bb" => Ok(InferMethod::BranchAndBound(BBConfig { s, max_states, ..BBConfig::default() })),
            "exhaustive" => Ok(InferMethod::Exhaustive),
            "icm" => Ok(InferMethod::Icm { max_sweeps }),
            other => Err(PyValueError::new_err(format!("unknown inference method '{other}'"))),
        }
    }

    fn scaled(&self, x: &[f64]) -> Vec<f64> {
        let mut x = x.to_vec();
        if let Some(sc) = &self.inner.scaler {
            if sc.d() == x.len() {
                sc.transform_x(&mut x);
            }
        }
        x
    }
}

#[pymethods]
impl PyModel {
    /// Train on inputs `x` (N lists of D floats) and labels `y` (N lists of K values in {+1, -1}).
    #[staticmethod]
    #[pyo3(signature = (x, y, kind="lmsbn", graph="full", order="index", lam=1e-3, eta0=0.0, epochs=1000, tol=1e-4, seed=0))]
    #[allow(clippy::too_many_arguments)]
    fn train(
        py: Python<'_>,
        x: Vec<Vec<f64>>,
        y: Vec<Vec<i64>>,
        kind: &str,
        graph: &str,
        order: &str,
        lam: f64,
        eta0: f64,
        epochs: usize,
        tol: f64,
        seed: u64,
    ) -> PyResult<Self> {
        let data = to_dataset(x, y)?;
        let kind = parse_kind(kind)?;
        let order: OrderKind = order.parse().map_err(to_py)?;
        let config =
            TrainConfig { lambda: lam, eta0, max_epochs: epochs, tolerance: tol, shuffle_seed: seed, shuffle: true };
        let inner = py.detach(|| -> PyResult<ModelFile> {
            let strategy = order_strategy(order, &data, &config).map_err(to_py)?;
            let g = build_graph(kind, graph, data.k, data.d, strategy.order)?;
            let trained = match kind {
                GraphKind::Directed => lmnet_core::train_lmsbn(&data, &g, &config),
                GraphKind::Undirected => lmnet_core::train_lmbm(&data, &g, &config),
            }
            .map_err(to_py)?;
            let r = trained.report;
            let meta = TrainMeta { epochs: r.epochs, final_gap: r.final_gap, converged: r.converged };
            Ok(ModelFile { graph: g, weights: trained.weights, meta, scaler: None })
        })?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(Self { inner: ModelFile::load(path).map_err(to_py)? })
    }

    fn save(&self, path: &str) -> PyResult<()> {
        self.inner.save(path).map_err(to_py)
    }

    fn to_text(&self) -> PyResult<String> {
        self.inner.to_text().map_err(to_py)
    }

    #[getter]
    fn k(&self) -> usize {
        self.inner.graph.k()
    }

    #[getter]
    fn d(&self) -> usize {
        self.inner.graph.d()
    }

    #[getter]
    fn kind(&self) -> String {
        self.inner.graph.kind().to_string()
    }

    #[getter]
    fn order(&self) -> Vec<usize> {
        self.inner.graph.order().to_vec()
    }

    #[getter]
    fn weights(&self) -> Vec<f64> {
        self.inner.weights.w.clone()
    }

    /// Cliques as `(outputs, input)` pairs, `input` being `None` for constant features.
    fn cliques(&self) -> Vec<(Vec<usize>, Option<usize>)> {
        self.inner.graph.cliques().iter().map(|c| (c.outputs().to_vec(), c.input())).collect()
    }

    #[getter]
    fn final_gap(&self) -> f64 {
        self.inner.meta.final_gap
    }

    #[getter]
    fn converged(&self) -> bool {
        self.inner.meta.converged
    }

    /// Summed hinge loss of label vector `y` for input `x`.
    fn loss(&self, x: Vec<f64>, y: Vec<i64>) -> PyResult<f64> {
        let x = self.scaled(&x);
        let y = to_labels(&y)?;
        let pot = Potentials::new(&self.inner.graph, &self.inner.weights, &x).map_err(to_py)?;
        if y.len() != self.inner.graph.k() {
            return Err(PyValueError::new_err(format!("expected {} labels", self.inner.graph.k())));
        }
        Ok(pot.loss(&y))
    }

    /// MAP prediction for one input; returns a dict with `y`, `loss`, `states` and `status`.
    #[pyo3(signature = (x, method="bb", s=1e9, max_states=None, max_sweeps=100))]
    fn predict<'py>(
        &self,
        py: Python<'py>,
        x: Vec<f64>,
        method: &str,
        s: f64,
        max_states: Option<u64>,
        max_sweeps: usize,
    ) -> PyResult<Bound<'py, PyDict>> {
        let m = self.method(method, s, max_states, max_sweeps)?;
        let r = infer(&self.inner.graph, &self.inner.weights, &self.scaled(&x), &m).map_err(to_py)?;
        result_dict(py, &r)
    }

    #[pyo3(signature = (xs, method="bb", s=1e9, max_states=None, max_sweeps=100))]
    fn predict_batch<'py>(
        &self,
        py: Python<'py>,
        xs: Vec<Vec<f64>>,
        method: &str,
        s: f64,
        max_states: Option<u64>,
        max_sweeps: usize,
    ) -> PyResult<Vec<Bound<'py, PyDict>>> {
        let m = self.method(method, s, max_states, max_sweeps)?;
        let xs: Vec<Vec<f64>> = xs.iter().map(|x| self.scaled(x)).collect();
        let results = py.detach(|| infer_batch(&self.inner.graph, &self.inner.weights, &xs, &m)).map_err(to_py)?;
        results.iter().map(|r| result_dict(py, r)).collect()
    }

    fn __repr__(&self) -> String {
        let g = &self.inner.graph;
        format!("Model(kind={}, k={}, d={}, cliques={})", g.kind(), g.k(), g.d(), g.num_cliques())
    }
}

/// Exact-match, Hamming and F measures for label vectors in {+1, -1}.
#[pyfunction]
fn evaluate<'py>(py: Python<'py>, truths: Vec<Vec<i64>>, preds: Vec<Vec<i64>>) -> PyResult<Bound<'py, PyDict>> {
    let conv = |v: &[Vec<i64>]| v.iter().map(|y| to_labels(y)).collect::<PyResult<Vec<_>>>();
    let r = lmnet_core::evaluate(&conv(&truths)?, &conv(&preds)?).map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("E", r.exact_match)?;
    d.set_item("H", r.hamming)?;
    d.set_item("Fsam", r.f_sample)?;
    d.set_item("Fmac", r.f_macro)?;
    d.set_item("Fmic", r.f_micro)?;
    d.set_item("per_label_f", r.per_label_f)?;
    Ok(d)
}

/// Read a multi-label svmlight file into `(x, y)` lists.
#[pyfunction]
#[pyo3(signature = (path, k=None, d=None, label_base="1"))]
fn read_svmlight(path: &str, k: Option<usize>, d: Option<usize>, label_base: &str) -> PyResult<Samples> {
    let opts = SvmlightOptions { k, d, label_base: label_base.parse().map_err(to_py)? };
    Ok(from_dataset(read_multilabel_svmlight(path, &opts).map_err(to_py)?))
}

/// Sample `(x, y)` from a random planted model with standard-normal inputs.
#[pyfunction]
#[pyo3(signature = (kind, k, d, n, seed=0, weight_scale=1.0, weight_seed=0, graph="full"))]
#[allow(clippy::too_many_arguments)]
fn sample(
    kind: &str,
    k: usize,
    d: usize,
    n: usize,
    seed: u64,
    weight_scale: f64,
    weight_seed: u64,
    graph: &str,
) -> PyResult<Samples> {
    let kind = parse_kind(kind)?;
    let g = build_graph(kind, graph, k, d, (0..k).collect())?;
    if !(weight_scale >= 0.0 && weight_scale.is_finite()) {
        return Err(PyValueError::new_err("weight_scale must be finite and non-negative"));
    }
    let weights = random_weights(&g, weight_scale, &mut rand_chacha::ChaCha8Rng::seed_from_u64(weight_seed));
    let input = if d == 0 { InputModel::None } else { InputModel::StandardNormal };
    let config = SynthConfig { seed, n, input, graph: g, weights };
    let data = match kind {
        GraphKind::Directed => sample_sbn(&config),
        GraphKind::Undirected => sample_bm(&config),
    }
    .map_err(to_py)?;
    Ok(from_dataset(data))
}

/// `(log(1 + e^-z), [1 - z]_+ + b)` for the log-loss surrogate bound.
#[pyfunction]
fn surrogate_bound_check(z: f64) -> (f64, f64) {
    lmnet_core::surrogate_bound_check(z)
}

#[pymodule]
fn lmnet(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyModel>()?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(read_svmlight, m)?)?;
    m.add_function(wrap_pyfunction!(sample, m)?)?;
    m.add_function(wrap_pyfunction!(surrogate_bound_check, m)?)?;
    Ok(())
}
