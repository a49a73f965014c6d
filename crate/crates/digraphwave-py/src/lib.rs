//! Python bindings: graphs, the embedding pipeline, reachability columns,
//! the diffusion-theory utilities and the alignment helpers.

use numpy::ndarray::Array2 as NpArray2;
use numpy::{IntoPyArray, PyArray2, PyReadonlyArray2};
use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;

use digraphwave::align as dalign;
use digraphwave::embed::{set_hyperparameters, standardize};
use digraphwave::error::DgwError;
use digraphwave::graph;
use digraphwave::matexp::{expm_batch, taylor_coefficients};
use digraphwave::pipeline;
use digraphwave::synth;
use digraphwave::theory;

fn to_py_err(e: DgwError) -> PyErr {
    match e {
        DgwError::Io(_) => PyIOError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn matrix_to_numpy<'py>(
    py: Python<'py>,
    rows: usize,
    cols: usize,
    data: Vec<f64>,
) -> PyResult<Bound<'py, PyArray2<f64>>> {
    let arr = NpArray2::from_shape_vec((rows, cols), data)
        .map_err(|e| PyValueError::new_err(e.to_string()))?;
    Ok(arr.into_pyarray(py))
}

/// An immutable directed weighted graph.
#[pyclass(name = "Graph", from_py_object)]
#[derive(Clone)]
struct PyGraph {
    inner: graph::Graph,
}

#[pymethods]
impl PyGraph {
    /// Build from an edge triple list `[(src, dst, weight), ...]`.
    #[new]
    #[pyo3(signature = (edges, n=None))]
    fn new(edges: Vec<(u32, u32, f64)>, n: Option<usize>) -> PyResult<Self> {
        let (g, _) = graph::Graph::from_edges(n, &edges).map_err(to_py_err)?;
        Ok(PyGraph { inner: g })
    }

    /// Load a TSV edge list (`src<TAB>dst[<TAB>weight]`, `#` comments).
    #[staticmethod]
    #[pyo3(signature = (path, weighted=false, n=None))]
    fn from_edge_list(path: &str, weighted: bool, n: Option<usize>) -> PyResult<Self> {
        let f = std::fs::File::open(path).map_err(|e| PyIOError::new_err(e.to_string()))?;
        let (g, _) = graph::load_edge_list(std::io::BufReader::new(f), weighted, n)
            .map_err(to_py_err)?;
        Ok(PyGraph { inner: g })
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn m(&self) -> usize {
        self.inner.m()
    }

    fn transpose(&self) -> PyGraph {
        PyGraph { inner: self.inner.transpose() }
    }

    fn edges(&self) -> Vec<(u32, u32, f64)> {
        self.inner.edge_triples()
    }

    fn out_degrees(&self) -> Vec<u64> {
        self.inner.degrees().out_unweighted
    }

    fn in_degrees(&self) -> Vec<u64> {
        self.inner.degrees().in_unweighted
    }

    fn __repr__(&self) -> String {
        format!("Graph(n={}, m={})", self.inner.n(), self.inner.m())
    }
}

/// Extract Digraphwave embeddings as an `(n, dims)` float64 array.
#[pyfunction]
#[pyo3(signature = (g, radius=3, dim=128, transposition=true, aggregation=true,
                    standardize_output=true, order=None, batch_size=None))]
#[allow(clippy::too_many_arguments)]
fn embed<'py>(
    py: Python<'py>,
    g: &PyGraph,
    radius: u32,
    dim: usize,
    transposition: bool,
    aggregation: bool,
    standardize_output: bool,
    order: Option<usize>,
    batch_size: Option<usize>,
) -> PyResult<Bound<'py, PyArray2<f64>>> {
    let mut config = set_hyperparameters(&g.inner, radius, dim, transposition, aggregation)
        .map_err(to_py_err)?;
    if let Some(k) = order {
        config.order = k;
    }
    if let Some(nb) = batch_size {
        config.n_batch = nb.max(1);
    }
    let mut emb = pipeline::digraphwave(&g.inner, &config).map_err(to_py_err)?;
    if standardize_output {
        emb = standardize(&emb).0;
    }
    let (rows, cols) = (emb.rows(), emb.cols());
    // logical row-major iteration; the matrix may not be C-contiguous
    matrix_to_numpy(py, rows, cols, emb.data.iter().copied().collect())
}

/// Heat-kernel columns `Ψ(τ)[:, sources]`, one `(n, len(sources))` array per τ.
#[pyfunction]
#[pyo3(signature = (g, sources, taus, order=40))]
fn reachability<'py>(
    py: Python<'py>,
    g: &PyGraph,
    sources: Vec<u32>,
    taus: Vec<f64>,
    order: usize,
) -> PyResult<Vec<Bound<'py, PyArray2<f64>>>> {
    let op = g.inner.build_operator();
    let coeffs = taylor_coefficients(&taus, order);
    let batch = expm_batch(&op, &sources, &coeffs).map_err(to_py_err)?;
    batch
        .data
        .into_iter()
        .map(|mat| {
            let (rows, cols) = (mat.nrows(), mat.ncols());
            matrix_to_numpy(py, rows, cols, mat.iter().copied().collect())
        })
        .collect()
}

/// Universal lower bound `Q(R+1, τ)` on heat contained in the R-ball.
#[pyfunction]
fn heat_containment_bound(radius: u32, tau: f64) -> f64 {
    theory::heat_containment_bound(radius, tau)
}

/// Regularized upper incomplete gamma function at integer order.
#[pyfunction]
fn gamma_q(a: u32, tau: f64) -> f64 {
    theory::regularized_upper_gamma_q(a, tau)
}

/// Regularized lower incomplete gamma function at integer order.
#[pyfunction]
fn gamma_p(a: u32, tau: f64) -> f64 {
    theory::regularized_lower_gamma_p(a, tau)
}

/// Source-star graph with centre degree `d`, branch factor `beta`, depth `ell`.
#[pyfunction]
#[pyo3(signature = (d, beta, ell, isolated=0))]
fn source_star(d: u64, beta: u64, ell: u32, isolated: u64) -> PyResult<PyGraph> {
    let spec = theory::SourceStarSpec::new(d, beta, ell, isolated).map_err(to_py_err)?;
    Ok(PyGraph { inner: theory::make_source_star(&spec) })
}

/// Analytic per-layer heat values of a source-star diffusion at time `tau`.
#[pyfunction]
fn source_star_heat(d: u64, beta: u64, ell: u32, tau: f64) -> PyResult<Vec<f64>> {
    let spec = theory::SourceStarSpec::new(d, beta, ell, 0).map_err(to_py_err)?;
    Ok(theory::source_star_heat(&spec, tau))
}

/// Barabási–Albert preferential attachment graph.
#[pyfunction]
fn barabasi_albert(n: usize, edges_per_node: usize, seed: u64) -> PyResult<PyGraph> {
    Ok(PyGraph { inner: synth::barabasi_albert(n, edges_per_node, seed).map_err(to_py_err)? })
}

/// Exact k-nearest-neighbour candidates by Euclidean distance, ties broken by
/// lower id. Returns an `(n2, k)` int64 array of graph-1 row indices.
#[pyfunction]
fn greedy_match<'py>(
    py: Python<'py>,
    emb1: PyReadonlyArray2<'py, f64>,
    emb2: PyReadonlyArray2<'py, f64>,
    k: usize,
) -> PyResult<Bound<'py, PyArray2<i64>>> {
    let a1 = emb1.as_array();
    let a2 = emb2.as_array();
    let e1 = digraphwave::EmbeddingMatrix {
        data: ndarray15_from(a1.nrows(), a1.ncols(), a1.iter().copied().collect()),
        tags: vec![],
    };
    let e2 = digraphwave::EmbeddingMatrix {
        data: ndarray15_from(a2.nrows(), a2.ncols(), a2.iter().copied().collect()),
        tags: vec![],
    };
    let truth = vec![0u32; e2.rows()];
    let task = dalign::AlignmentTask {
        emb1: e1.data.view(),
        emb2: e2.data.view(),
        ground_truth: &truth,
        k,
    };
    let cands = dalign::greedy_match(&task).map_err(to_py_err)?;
    let kk = cands.first().map(|c| c.len()).unwrap_or(0);
    let flat: Vec<i64> = cands.iter().flat_map(|c| c.iter().map(|&v| v as i64)).collect();
    let arr = numpy::ndarray::Array2::from_shape_vec((cands.len(), kk), flat)
        .map_err(|e| PyValueError::new_err(e.to_string()))?;
    Ok(arr.into_pyarray(py))
}

// the core crate's ndarray version differs from the one numpy re-exports, so
// matrices cross the boundary as flat vecs
fn ndarray15_from(rows: usize, cols: usize, data: Vec<f64>) -> digraphwave::ndarray::Array2<f64> {
    digraphwave::ndarray::Array2::from_shape_vec((rows, cols), data).expect("shape matches data")
}

/// Permute node ids, add noise to both sides, embed, match and score.
/// Returns `(top1, top10)`.
#[pyfunction]
#[pyo3(signature = (g, radius=2, dim=128, noise=0.0, seed=0))]
fn permuted_self_alignment(
    g: &PyGraph,
    radius: u32,
    dim: usize,
    noise: f64,
    seed: u64,
) -> PyResult<(f64, f64)> {
    let pt = dalign::permuted_self_alignment(&g.inner, radius, dim, noise, seed)
        .map_err(to_py_err)?;
    Ok((pt.top1, pt.top10))
}

#[pymodule]
fn digraphwave_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGraph>()?;
    m.add_function(wrap_pyfunction!(embed, m)?)?;
    m.add_function(wrap_pyfunction!(reachability, m)?)?;
    m.add_function(wrap_pyfunction!(heat_containment_bound, m)?)?;
    m.add_function(wrap_pyfunction!(gamma_q, m)?)?;
    m.add_function(wrap_pyfunction!(gamma_p, m)?)?;
    m.add_function(wrap_pyfunction!(source_star, m)?)?;
    m.add_function(wrap_pyfunction!(source_star_heat, m)?)?;
    m.add_function(wrap_pyfunction!(barabasi_albert, m)?)?;
    m.add_function(wrap_pyfunction!(greedy_match, m)?)?;
    m.add_function(wrap_pyfunction!(permuted_self_alignment, m)?)?;
    Ok(())
}
