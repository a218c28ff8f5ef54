//! Python module `netsig`: graphs, structured images, features, learners and
//! the experiment runners of netsig-core.

use std::collections::BTreeMap;
use std::path::PathBuf;

use pyo3::exceptions::{PyOSError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyBytes, PyDict};

use netsig_core::eval::{
    self, precision_recall_f1, ConfusionMatrix, ExperimentResult, SupervisedConfig, TransferConfig,
};
use netsig_core::features::{self, WlDictionary};
use netsig_core::learn::{self, Dataset, Learner, Representation, TrainConfig};
use netsig_core::manifest::{DatasetManifest, SyntheticSource};
use netsig_core::ordering;
use netsig_core::rng::rng_from_seed;
use netsig_core::sampler::{self, SampleSpec};
use netsig_core::transfer::{self, LabelVector};
use netsig_core::Error;

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Io(io) => PyOSError::new_err(io.to_string()),
        Error::Sampling(_) | Error::Numerical(_) => PyRuntimeError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

trait IntoPyResult<T> {
    fn py(self) -> PyResult<T>;
}

impl<T> IntoPyResult<T> for netsig_core::Result<T> {
    fn py(self) -> PyResult<T> {
        self.map_err(py_err)
    }
}

/// Simple undirected graph on nodes `0..n`.
#[pyclass(name = "Graph", module = "netsig", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyGraph {
    inner: netsig_core::Graph,
}

#[pymethods]
impl PyGraph {
    #[new]
    fn new(n: usize, edges: Vec<(usize, usize)>) -> PyResult<Self> {
        Ok(PyGraph {
            inner: netsig_core::Graph::from_edges(n, edges).py()?,
        })
    }

    /// Parses a whitespace-separated edge list; ids are compacted in order of
    /// first appearance.
    #[staticmethod]
    fn from_edge_list(text: &str) -> PyResult<Self> {
        Ok(PyGraph {
            inner: netsig_core::graph::parse_edge_list_str(text).py()?,
        })
    }

    /// Synthetic parent graph, e.g. `Graph.synthetic("erdos_renyi", {"n": 100, "p": 0.1}, seed=1)`.
    #[staticmethod]
    #[pyo3(signature = (family, params, seed=0))]
    fn synthetic(family: &str, params: BTreeMap<String, f64>, seed: u64) -> PyResult<Self> {
        let source = SyntheticSource {
            family: family.to_string(),
            params,
            seed,
        };
        let family = source.to_family().py()?;
        Ok(PyGraph {
            inner: netsig_core::graph::generate_synthetic(&family, seed).py()?,
        })
    }

    fn to_edge_list(&self) -> String {
        self.inner.to_edge_list()
    }

    fn node_count(&self) -> usize {
        self.inner.node_count()
    }

    fn edge_count(&self) -> usize {
        self.inner.edge_count()
    }

    fn edges(&self) -> Vec<(usize, usize)> {
        self.inner.edges().collect()
    }

    fn degree(&self, v: usize) -> PyResult<usize> {
        self.check(v)?;
        Ok(self.inner.degree(v))
    }

    fn neighbors(&self, v: usize) -> PyResult<Vec<usize>> {
        self.check(v)?;
        Ok(self.inner.neighbors(v).to_vec())
    }

    /// Node `v` becomes `mapping[v]`.
    fn relabel(&self, mapping: Vec<usize>) -> PyResult<Self> {
        Ok(PyGraph {
            inner: self.inner.relabel(&mapping).py()?,
        })
    }

    fn is_connected(&self) -> bool {
        netsig_core::graph::is_connected(&self.inner)
    }

    /// Connected subgraph of `n` nodes found by a seeded random walk.
    fn random_walk_sample(&self, py: Python<'_>, n: usize, seed: u64) -> PyResult<(Vec<usize>, Self)> {
        let g = &self.inner;
        py.detach(|| {
            let walk = sampler::random_walk_sample(g, n, &mut rng_from_seed(seed))?;
            let sub = sampler::induced_subgraph(g, &walk.nodes)?;
            Ok((walk.nodes, PyGraph { inner: sub }))
        })
        .py()
    }

    fn __len__(&self) -> usize {
        self.inner.node_count()
    }

    fn __eq__(&self, other: &Self) -> bool {
        self.inner == other.inner
    }

    fn __repr__(&self) -> String {
        format!("Graph(nodes={}, edges={})", self.inner.node_count(), self.inner.edge_count())
    }
}

impl PyGraph {
    fn check(&self, v: usize) -> PyResult<()> {
        if v >= self.inner.node_count() {
            return Err(PyValueError::new_err(format!("node {v} out of range")));
        }
        Ok(())
    }
}

/// Vertex order; `permutation[position]` is the node placed there.
#[pyclass(name = "Ordering", module = "netsig", frozen, skip_from_py_object, get_all)]
#[derive(Clone)]
struct PyOrdering {
    permutation: Vec<usize>,
    fully_disambiguated: bool,
}

impl PyOrdering {
    fn core(&self) -> ordering::Ordering {
        ordering::Ordering {
            permutation: self.permutation.clone(),
            fully_disambiguated: self.fully_disambiguated,
        }
    }
}

#[pymethods]
impl PyOrdering {
    fn positions(&self) -> Vec<usize> {
        self.core().positions()
    }

    fn __repr__(&self) -> String {
        format!(
            "Ordering({:?}, fully_disambiguated={})",
            self.permutation, self.fully_disambiguated
        )
    }
}

/// Binary adjacency image under some vertex order.
#[pyclass(name = "StructuredImage", module = "netsig", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyImage {
    inner: ordering::StructuredImage,
}

#[pymethods]
impl PyImage {
    #[new]
    fn new(side: usize, pixels: Vec<u8>) -> PyResult<Self> {
        Ok(PyImage {
            inner: ordering::StructuredImage::from_pixels(side, pixels).py()?,
        })
    }

    #[getter]
    fn side(&self) -> usize {
        self.inner.side()
    }

    /// Row-major 0/1 pixels.
    fn pixels(&self) -> Vec<u8> {
        self.inner.pixels().to_vec()
    }

    fn rows(&self) -> Vec<Vec<u8>> {
        self.inner.pixels().chunks(self.inner.side()).map(<[u8]>::to_vec).collect()
    }

    fn ones(&self) -> usize {
        self.inner.ones()
    }

    fn padded(&self, side: usize) -> PyResult<Self> {
        Ok(PyImage {
            inner: self.inner.padded(side).py()?,
        })
    }

    /// The graph whose adjacency matrix is this image.
    fn to_graph(&self) -> PyGraph {
        PyGraph {
            inner: self.inner.to_graph(),
        }
    }

    /// Binary PGM bytes; edges black, each pixel a `scale x scale` block.
    #[pyo3(signature = (scale=1))]
    fn to_pgm<'py>(&self, py: Python<'py>, scale: usize) -> PyResult<Bound<'py, PyBytes>> {
        Ok(PyBytes::new(py, &ordering::write_image(&self.inner, scale).py()?))
    }

    #[staticmethod]
    #[pyo3(signature = (data, scale=1))]
    fn from_pgm(data: &[u8], scale: usize) -> PyResult<Self> {
        Ok(PyImage {
            inner: ordering::read_image(data, scale).py()?,
        })
    }

    fn __eq__(&self, other: &Self) -> bool {
        self.inner == other.inner
    }

    fn __repr__(&self) -> String {
        format!("StructuredImage(side={}, ones={})", self.inner.side(), self.inner.ones())
    }
}

/// Permutation-invariant ordering and the image it induces.
#[pyfunction]
fn structured_image(py: Python<'_>, graph: &PyGraph) -> PyResult<(PyImage, PyOrdering)> {
    let (image, o) = py.detach(|| ordering::structured_image(&graph.inner)).py()?;
    Ok((
        PyImage { inner: image },
        PyOrdering {
            permutation: o.permutation,
            fully_disambiguated: o.fully_disambiguated,
        },
    ))
}

#[pyfunction]
fn order_vertices(graph: &PyGraph) -> PyResult<PyOrdering> {
    let o = ordering::order_vertices(&graph.inner).py()?;
    Ok(PyOrdering {
        permutation: o.permutation,
        fully_disambiguated: o.fully_disambiguated,
    })
}

/// Image of `graph` under an arbitrary vertex order.
#[pyfunction]
fn embed_image(graph: &PyGraph, permutation: Vec<usize>) -> PyResult<PyImage> {
    let o = ordering::Ordering {
        permutation,
        fully_disambiguated: false,
    };
    Ok(PyImage {
        inner: ordering::embed_image(&graph.inner, &o).py()?,
    })
}

/// Original graph from an image and the ordering that produced it.
#[pyfunction]
fn reconstruct(image: &PyImage, ordering: &PyOrdering) -> PyResult<PyGraph> {
    Ok(PyGraph {
        inner: ordering::reconstruct(&image.inner, &ordering.core()).py()?,
    })
}

/// The fifteen classical features as a dict, plus `degenerate`.
#[pyfunction]
fn classical_features<'py>(py: Python<'py>, graph: &PyGraph) -> PyResult<Bound<'py, PyDict>> {
    let f = py.detach(|| features::classical_features(&graph.inner)).py()?;
    let dict = PyDict::new(py);
    for (name, value) in features::ClassicalFeatures::NAMES.iter().zip(f.to_vec()) {
        dict.set_item(name, value)?;
    }
    dict.set_item("degenerate", f.degenerate)?;
    Ok(dict)
}

#[pyfunction]
fn top_two_eigenvalues(graph: &PyGraph) -> PyResult<(f64, f64)> {
    features::top_two_eigenvalues(&graph.inner).py()
}

/// Shared WL label compression table; vectors are only comparable when they
/// come from the same dictionary.
#[pyclass(name = "WlDictionary", module = "netsig", frozen)]
struct PyWlDictionary {
    inner: WlDictionary,
}

#[pymethods]
impl PyWlDictionary {
    #[new]
    fn new() -> Self {
        PyWlDictionary {
            inner: WlDictionary::new(),
        }
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }
}

/// WL subtree histogram `{(iteration, label): count}`.
#[pyclass(name = "WlFeatures", module = "netsig", frozen)]
struct PyWlFeatures {
    inner: features::WlFeatureVector,
}

#[pymethods]
impl PyWlFeatures {
    #[getter]
    fn h(&self) -> usize {
        self.inner.h
    }

    fn counts(&self) -> BTreeMap<(usize, u64), u64> {
        self.inner.counts.clone()
    }

    fn total_at(&self, iteration: usize) -> u64 {
        self.inner.total_at(iteration)
    }
}

#[pyfunction]
fn wl_features(graph: &PyGraph, h: usize, dictionary: &PyWlDictionary) -> PyWlFeatures {
    PyWlFeatures {
        inner: features::wl_features(&graph.inner, h, &dictionary.inner),
    }
}

#[pyfunction]
fn wl_kernel(a: &PyWlFeatures, b: &PyWlFeatures) -> PyResult<f64> {
    features::wl_kernel(&a.inner, &b.inner).py()
}

#[pyfunction]
fn jaccard_similarity(a: Vec<String>, b: Vec<String>) -> PyResult<f64> {
    transfer::jaccard_similarity(&LabelVector::new(a, None).py()?, &LabelVector::new(b, None).py()?).py()
}

/// Majority vote of the `k` most Jaccard-similar training label sets; vote
/// ties break uniformly at random from `seed`.
#[pyfunction]
#[pyo3(signature = (train, test, k=transfer::DEFAULT_K, seed=0))]
fn knn_classify(train: Vec<(Vec<String>, usize)>, test: Vec<String>, k: usize, seed: u64) -> PyResult<usize> {
    let train = train
        .into_iter()
        .map(|(labels, class)| LabelVector::new(labels, Some(class)))
        .collect::<netsig_core::Result<Vec<_>>>()
        .py()?;
    let test = LabelVector::new(test, None).py()?;
    transfer::knn_classify(&train, &test, k, &mut rng_from_seed(seed)).py()
}

/// Deterministic stand-in recognizer: `[(label, probability), ...]`.
#[pyfunction]
fn stub_recognizer(image_id: &str, image: &PyImage) -> Vec<(String, f64)> {
    transfer::stub_recognizer(image_id, &image.inner).labels
}

/// Trained classifier.
#[pyclass(name = "Model", module = "netsig", frozen)]
struct PyModel {
    inner: learn::Model,
}

#[pymethods]
impl PyModel {
    /// Class probabilities for one input vector.
    fn predict(&self, x: Vec<f64>) -> PyResult<Vec<f64>> {
        self.inner.predict(&x).py()
    }

    fn classify(&self, x: Vec<f64>) -> PyResult<usize> {
        self.inner.classify(&x).py()
    }

    #[getter]
    fn classes(&self) -> usize {
        self.inner.classes()
    }

    #[getter]
    fn representation(&self) -> String {
        self.inner.representation.to_string()
    }

    fn to_bytes<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyBytes>> {
        Ok(PyBytes::new(py, &self.inner.to_bytes().py()?))
    }

    #[staticmethod]
    fn from_bytes(data: &[u8]) -> PyResult<Self> {
        Ok(PyModel {
            inner: learn::Model::from_bytes(data).py()?,
        })
    }
}

/// Trains `learner` ("linear", "mlp" or "cnn") on row vectors. CNN inputs
/// must be flattened square images.
#[pyfunction]
#[pyo3(signature = (learner, inputs, targets, classes, representation="image", epochs=50, learning_rate=0.01, seed=0))]
#[allow(clippy::too_many_arguments)]
fn train(
    py: Python<'_>,
    learner: &str,
    inputs: Vec<Vec<f64>>,
    targets: Vec<usize>,
    classes: usize,
    representation: &str,
    epochs: usize,
    learning_rate: f64,
    seed: u64,
) -> PyResult<PyModel> {
    let learner: Learner = learner.parse().py()?;
    let representation: Representation = representation.parse().py()?;
    let n = match representation {
        r if r.is_image() => inputs.first().map_or(0, |x| (x.len() as f64).sqrt().round() as usize),
        _ => 0,
    };
    let data = Dataset::new(inputs, targets, classes, representation, n).py()?;
    let config = TrainConfig {
        epochs,
        learning_rate,
        seed,
        ..TrainConfig::default()
    };
    let inner = py.detach(|| learn::train(learner, &data, None, &config)).py()?;
    Ok(PyModel { inner })
}

/// Top principal component of a set of equally sized images:
/// `(values, variance)` with values row-major.
#[pyfunction]
fn pca_top_component(images: Vec<PyRef<'_, PyImage>>) -> PyResult<(Vec<f64>, f64)> {
    let images: Vec<_> = images.iter().map(|im| im.inner.clone()).collect();
    let c = learn::pca_top_component(&images).py()?;
    Ok((c.values, c.variance))
}

/// Accuracy and per-class metrics of a confusion matrix (rows = truth).
#[pyfunction]
fn confusion_metrics<'py>(py: Python<'py>, counts: Vec<Vec<u64>>) -> PyResult<Bound<'py, PyDict>> {
    let cm = ConfusionMatrix::from_rows(counts).py()?;
    let dict = PyDict::new(py);
    dict.set_item("accuracy", eval::accuracy(&cm).py()?)?;
    let per_class = (0..cm.classes())
        .map(|c| precision_recall_f1(&cm, c).map(|m| (m.precision, m.recall, m.f1)))
        .collect::<netsig_core::Result<Vec<_>>>()
        .py()?;
    dict.set_item("per_class", per_class)?;
    Ok(dict)
}

fn result_dict<'py>(py: Python<'py>, r: &ExperimentResult) -> PyResult<Bound<'py, PyDict>> {
    let dict = PyDict::new(py);
    dict.set_item("experiment", &r.experiment)?;
    dict.set_item("class_names", &r.class_names)?;
    dict.set_item("accuracy", r.accuracy)?;
    dict.set_item("confusion", &r.confusion.counts)?;
    dict.set_item(
        "per_class",
        r.per_class.iter().map(|m| (m.precision, m.recall, m.f1)).collect::<Vec<_>>(),
    )?;
    dict.set_item("seeds", &r.seeds)?;
    dict.set_item("params", &r.params)?;
    Ok(dict)
}

fn load_manifest(path: PathBuf) -> PyResult<Vec<netsig_core::manifest::ClassGraph>> {
    DatasetManifest::load(&path).and_then(|m| m.load_graphs()).py()
}

/// Samples, embeds, trains and tests one configuration from a manifest file.
#[pyfunction]
#[pyo3(signature = (manifest, n, samples_per_class, representation="image", learner="linear", seed=0))]
fn run_supervised<'py>(
    py: Python<'py>,
    manifest: PathBuf,
    n: usize,
    samples_per_class: usize,
    representation: &str,
    learner: &str,
    seed: u64,
) -> PyResult<Bound<'py, PyDict>> {
    let config = SupervisedConfig::new(
        n,
        samples_per_class,
        representation.parse().py()?,
        learner.parse().py()?,
        seed,
    );
    let classes = load_manifest(manifest)?;
    let result = py.detach(|| eval::run_supervised_experiment(&classes, &config)).py()?;
    result_dict(py, &result)
}

/// Label transfer with the stub recognizer and Jaccard k-NN.
#[pyfunction]
#[pyo3(signature = (manifest, n, samples_per_class, k=transfer::DEFAULT_K, fraction=0.5, seed=0))]
fn run_transfer<'py>(
    py: Python<'py>,
    manifest: PathBuf,
    n: usize,
    samples_per_class: usize,
    k: usize,
    fraction: f64,
    seed: u64,
) -> PyResult<Bound<'py, PyDict>> {
    let spec = SampleSpec::new(n, samples_per_class, seed).py()?;
    let classes = load_manifest(manifest)?;
    let config = TransferConfig::new(k, fraction, seed);
    let result = py
        .detach(|| eval::run_stub_transfer_experiment(&classes, &spec, &config))
        .py()?;
    result_dict(py, &result)
}

/// `[(class_id, sample_index, Graph), ...]` sampled from a manifest file.
#[pyfunction]
fn sample_dataset(
    py: Python<'_>,
    manifest: PathBuf,
    n: usize,
    samples_per_class: usize,
    seed: u64,
) -> PyResult<Vec<(usize, usize, PyGraph)>> {
    let spec = SampleSpec::new(n, samples_per_class, seed).py()?;
    let classes = load_manifest(manifest)?;
    let samples = py.detach(|| sampler::build_dataset(&classes, &spec)).py()?;
    Ok(samples
        .into_iter()
        .map(|s| (s.class_id, s.sample_index, PyGraph { inner: s.subgraph }))
        .collect())
}

#[pymodule]
fn netsig(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGraph>()?;
    m.add_class::<PyOrdering>()?;
    m.add_class::<PyImage>()?;
    m.add_class::<PyWlDictionary>()?;
    m.add_class::<PyWlFeatures>()?;
    m.add_class::<PyModel>()?;
    m.add_function(wrap_pyfunction!(structured_image, m)?)?;
    m.add_function(wrap_pyfunction!(order_vertices, m)?)?;
    m.add_function(wrap_pyfunction!(embed_image, m)?)?;
    m.add_function(wrap_pyfunction!(reconstruct, m)?)?;
    m.add_function(wrap_pyfunction!(classical_features, m)?)?;
    m.add_function(wrap_pyfunction!(top_two_eigenvalues, m)?)?;
    m.add_function(wrap_pyfunction!(wl_features, m)?)?;
    m.add_function(wrap_pyfunction!(wl_kernel, m)?)?;
    m.add_function(wrap_pyfunction!(jaccard_similarity, m)?)?;
    m.add_function(wrap_pyfunction!(knn_classify, m)?)?;
    m.add_function(wrap_pyfunction!(stub_recognizer, m)?)?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    m.add_function(wrap_pyfunction!(pca_top_component, m)?)?;
    m.add_function(wrap_pyfunction!(confusion_metrics, m)?)?;
    m.add_function(wrap_pyfunction!(run_supervised, m)?)?;
    m.add_function(wrap_pyfunction!(run_transfer, m)?)?;
    m.add_function(wrap_pyfunction!(sample_dataset, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
