//! Python bindings for `lvtensor`.
//!
//! Tensors cross the boundary as `(dims, flat row-major values)`; matrices as
//! lists of rows. With numpy: `Tensor(list(a.shape), a.ravel().tolist())` and
//! `np.array(t.values()).reshape(t.dims)`.

use pyo3::exceptions::{PyArithmeticError, PyOSError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use lvtensor::clustering::{cluster_mode as cluster_mode_rs, kmeans as kmeans_rs, ClusterParams};
use lvtensor::estimators::cv::select_rank_cv as select_rank_cv_rs;
use lvtensor::estimators::{
    approx_lse as approx_lse_rs, dse as dse_rs, hooi as hooi_rs, hosvd as hosvd_rs, HooiParams, RankRule,
    TuckerFactorization,
};
use lvtensor::experiments::cell_signal;
use lvtensor::generators::{
    add_noise as add_noise_rs, noise_sigma_for_level, planted_blocks as planted_blocks_rs, ModelId, NoiseSpec,
};
use lvtensor::io::{read_dtf1 as read_dtf1_rs, write_dtf1 as write_dtf1_rs};
use lvtensor::rank_analysis::epsilon_rank as epsilon_rank_rs;
use lvtensor::{DenseTensor, Error, Matrix};

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Argument(_) => PyValueError::new_err(e.to_string()),
        Error::Numerical(_) => PyArithmeticError::new_err(e.to_string()),
        _ => PyOSError::new_err(e.to_string()),
    }
}

fn matrix_from_rows(rows: Vec<Vec<f64>>) -> PyResult<Matrix> {
    let r = rows.len();
    let c = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|row| row.len() != c) {
        return Err(PyValueError::new_err("matrix rows must have equal length"));
    }
    Matrix::new(r, c, rows.into_iter().flatten().collect()).map_err(to_py)
}

fn matrix_rows(m: &Matrix) -> Vec<Vec<f64>> {
    (0..m.rows()).map(|i| m.row(i).to_vec()).collect()
}

/// Dense row-major tensor of float64 values.
#[pyclass(name = "Tensor", module = "pylvtensor", frozen)]
struct PyTensor {
    inner: DenseTensor,
}

impl From<DenseTensor> for PyTensor {
    fn from(inner: DenseTensor) -> Self {
        PyTensor { inner }
    }
}

#[pymethods]
impl PyTensor {
    #[new]
    fn new(dims: Vec<usize>, values: Vec<f64>) -> PyResult<Self> {
        Ok(DenseTensor::new(dims, values).map_err(to_py)?.into())
    }

    #[staticmethod]
    fn zeros(dims: Vec<usize>) -> PyResult<Self> {
        Ok(DenseTensor::zeros(&dims).map_err(to_py)?.into())
    }

    #[getter]
    fn dims(&self) -> Vec<usize> {
        self.inner.dims().to_vec()
    }

    fn values(&self) -> Vec<f64> {
        self.inner.values().to_vec()
    }

    fn get(&self, index: Vec<usize>) -> PyResult<f64> {
        if index.len() != self.inner.order() || index.iter().zip(self.inner.dims()).any(|(i, d)| i >= d) {
            return Err(PyValueError::new_err(format!("index {index:?} out of bounds")));
        }
        Ok(self.inner.get(&index))
    }

    /// Mode-`mode` unfolding as a list of rows (0-based mode).
    fn unfold(&self, mode: usize) -> PyResult<Vec<Vec<f64>>> {
        Ok(matrix_rows(&self.inner.unfold(mode).map_err(to_py)?))
    }

    fn mode_product(&self, mode: usize, matrix: Vec<Vec<f64>>) -> PyResult<Self> {
        let u = matrix_from_rows(matrix)?;
        Ok(self.inner.mode_product(mode, &u).map_err(to_py)?.into())
    }

    fn frobenius_norm(&self) -> f64 {
        self.inner.frobenius_norm()
    }

    fn mse(&self, other: &PyTensor) -> PyResult<f64> {
        lvtensor::mse(&self.inner, &other.inner).map_err(to_py)
    }

    fn __sub__(&self, other: &PyTensor) -> PyResult<Self> {
        Ok(self.inner.sub(&other.inner).map_err(to_py)?.into())
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!("Tensor(dims={:?})", self.inner.dims())
    }
}

/// Tucker factorization: `core ×_1 U_1 .. ×_m U_m`.
#[pyclass(name = "Factorization", module = "pylvtensor", frozen)]
struct PyFactorization {
    inner: TuckerFactorization,
}

#[pymethods]
impl PyFactorization {
    #[getter]
    fn core(&self) -> PyTensor {
        self.inner.core().clone().into()
    }

    #[getter]
    fn factors(&self) -> Vec<Vec<Vec<f64>>> {
        self.inner.factors().iter().map(matrix_rows).collect()
    }

    #[getter]
    fn ranks(&self) -> Vec<usize> {
        self.inner.ranks()
    }

    fn reconstruct(&self) -> PyTensor {
        self.inner.reconstruct().into()
    }

    fn __repr__(&self) -> String {
        format!("Factorization(dims={:?}, ranks={:?})", self.inner.dims(), self.inner.ranks())
    }
}

fn fact(inner: TuckerFactorization) -> PyFactorization {
    PyFactorization { inner }
}

/// Noise-free signal. `s` is the latent dimension for model1..3, the rank for
/// cp/tucker, the block count for chc and the blob count for smooth.
#[pyfunction]
#[pyo3(signature = (model, dims, s = 2, seed = 0))]
fn generate(py: Python<'_>, model: &str, dims: Vec<usize>, s: usize, seed: u64) -> PyResult<PyTensor> {
    let model: ModelId = model.parse().map_err(to_py)?;
    py.detach(|| cell_signal(model, s, &dims, seed)).map(Into::into).map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (planted_dims, amplitudes, seed = 0))]
fn planted_blocks(planted_dims: Vec<usize>, amplitudes: Vec<f64>, seed: u64) -> PyResult<(PyTensor, Vec<usize>)> {
    let p = planted_blocks_rs(&planted_dims, &amplitudes, seed).map_err(to_py)?;
    Ok((p.signal.into(), p.labels))
}

#[pyfunction]
#[pyo3(signature = (theta, sigma, seed = 0))]
fn add_noise(theta: &PyTensor, sigma: f64, seed: u64) -> PyResult<PyTensor> {
    let spec = NoiseSpec::gaussian(sigma, seed).map_err(to_py)?;
    Ok(add_noise_rs(&theta.inner, &spec).map_err(to_py)?.into())
}

/// `γ · sqrt(‖Θ‖_F² / d_*)`.
#[pyfunction]
fn noise_sigma(theta: &PyTensor, gamma: f64) -> PyResult<f64> {
    noise_sigma_for_level(&theta.inner, gamma).map_err(to_py)
}

#[pyfunction]
fn hosvd(py: Python<'_>, y: &PyTensor, ranks: Vec<usize>) -> PyResult<(PyTensor, PyFactorization)> {
    let e = py.detach(|| hosvd_rs(&y.inner, &ranks)).map_err(to_py)?;
    Ok((e.estimate.into(), fact(e.factorization)))
}

/// Double-projection spectral estimate.
#[pyfunction]
fn dse(py: Python<'_>, y: &PyTensor, ranks: Vec<usize>) -> PyResult<(PyTensor, PyFactorization)> {
    let e = py.detach(|| dse_rs(&y.inner, &ranks)).map_err(to_py)?;
    Ok((e.estimate.into(), fact(e.factorization)))
}

/// Returns `(estimate, factorization, iterations, fit_history)`.
#[pyfunction]
#[pyo3(signature = (y, ranks, max_iters = 50, tol = 1e-7))]
fn hooi(
    py: Python<'_>,
    y: &PyTensor,
    ranks: Vec<usize>,
    max_iters: usize,
    tol: f64,
) -> PyResult<(PyTensor, PyFactorization, usize, Vec<f64>)> {
    let params = HooiParams { max_iters, tol };
    let o = py.detach(|| hooi_rs(&y.inner, &ranks, params)).map_err(to_py)?;
    Ok((o.estimate.into(), fact(o.factorization), o.iterations, o.fit_history))
}

/// Best-of-restarts HOOI; returns `(estimate, factorization, residual)`.
#[pyfunction]
#[pyo3(signature = (y, ranks, restarts = 5, seed = 0))]
fn approx_lse(
    py: Python<'_>,
    y: &PyTensor,
    ranks: Vec<usize>,
    restarts: usize,
    seed: u64,
) -> PyResult<(PyTensor, PyFactorization, f64)> {
    let rule = RankRule::Explicit(ranks);
    let o = py
        .detach(|| approx_lse_rs(&y.inner, &rule, restarts, seed, HooiParams::default()))
        .map_err(to_py)?;
    Ok((o.estimate.into(), fact(o.factorization), o.residual))
}

/// Ranks `ceil(c · ln^exponent(max extent))`, clamped to the extents.
#[pyfunction]
fn log_rank(dims: Vec<usize>, c: f64, exponent: u32) -> PyResult<Vec<usize>> {
    RankRule::log(c, exponent)
        .and_then(|r| r.resolve(&dims))
        .map_err(to_py)
}

/// Returns `(best_c, ranks, table)`; table rows are dicts.
#[pyfunction]
#[pyo3(signature = (y, c_grid, exponent = 1, folds = 5, seed = 0))]
fn select_rank_cv<'py>(
    py: Python<'py>,
    y: &PyTensor,
    c_grid: Vec<f64>,
    exponent: u32,
    folds: usize,
    seed: u64,
) -> PyResult<(f64, Vec<usize>, Vec<Bound<'py, PyDict>>)> {
    let out = py
        .detach(|| select_rank_cv_rs(&y.inner, &c_grid, exponent, folds, seed))
        .map_err(to_py)?;
    let mut table = Vec::new();
    for row in &out.table {
        let d = PyDict::new(py);
        d.set_item("c", row.c)?;
        d.set_item("ranks", row.ranks.clone())?;
        d.set_item("fold_scores", row.fold_scores.clone())?;
        d.set_item("mean_score", row.mean_score)?;
        d.set_item("note", row.note.as_str())?;
        table.push(d);
    }
    Ok((out.best_c, out.ranks, table))
}

/// Returns `(rank or None, [(r, relative_error), ..])`.
#[pyfunction]
#[pyo3(signature = (theta, epsilon, r_max, max_iters = 50, tol = 1e-7))]
fn epsilon_rank(
    py: Python<'_>,
    theta: &PyTensor,
    epsilon: f64,
    r_max: usize,
    max_iters: usize,
    tol: f64,
) -> PyResult<(Option<usize>, Vec<(usize, f64)>)> {
    let params = HooiParams { max_iters, tol };
    let e = py
        .detach(|| epsilon_rank_rs(&theta.inner, epsilon, r_max, params))
        .map_err(to_py)?;
    Ok((e.rank, e.curve))
}

/// Returns `(labels, centroids, wcss)`.
#[pyfunction]
#[pyo3(signature = (data, k, restarts = 10, max_iters = 300, seed = 0))]
fn kmeans(
    py: Python<'_>,
    data: Vec<Vec<f64>>,
    k: usize,
    restarts: usize,
    max_iters: usize,
    seed: u64,
) -> PyResult<(Vec<usize>, Vec<Vec<f64>>, f64)> {
    let m = matrix_from_rows(data)?;
    let a = py.detach(|| kmeans_rs(&m, k, restarts, max_iters, seed)).map_err(to_py)?;
    Ok((a.labels, matrix_rows(&a.centroids), a.wcss))
}

/// Tucker-PCA clustering of the rows of mode `mode` (0-based); returns
/// `(labels, wcss)`.
#[pyfunction]
#[pyo3(signature = (y, ranks, mode, k, seed = 0, refine = true))]
fn cluster_mode(
    py: Python<'_>,
    y: &PyTensor,
    ranks: Vec<usize>,
    mode: usize,
    k: usize,
    seed: u64,
    refine: bool,
) -> PyResult<(Vec<usize>, f64)> {
    let params = ClusterParams {
        seed,
        refine,
        ..ClusterParams::default()
    };
    let rule = RankRule::Explicit(ranks);
    let out = py
        .detach(|| cluster_mode_rs(&y.inner, &rule, mode, k, params))
        .map_err(to_py)?;
    Ok((out.assignment.labels, out.assignment.wcss))
}

#[pyfunction]
fn read_dtf1(path: std::path::PathBuf) -> PyResult<PyTensor> {
    Ok(read_dtf1_rs(path).map_err(to_py)?.into())
}

#[pyfunction]
fn write_dtf1(path: std::path::PathBuf, tensor: &PyTensor) -> PyResult<()> {
    write_dtf1_rs(path, &tensor.inner).map_err(to_py)
}

#[pymodule]
fn pylvtensor(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyTensor>()?;
    m.add_class::<PyFactorization>()?;
    m.add_function(wrap_pyfunction!(generate, m)?)?;
    m.add_function(wrap_pyfunction!(planted_blocks, m)?)?;
    m.add_function(wrap_pyfunction!(add_noise, m)?)?;
    m.add_function(wrap_pyfunction!(noise_sigma, m)?)?;
    m.add_function(wrap_pyfunction!(hosvd, m)?)?;
    m.add_function(wrap_pyfunction!(dse, m)?)?;
    m.add_function(wrap_pyfunction!(hooi, m)?)?;
    m.add_function(wrap_pyfunction!(approx_lse, m)?)?;
    m.add_function(wrap_pyfunction!(log_rank, m)?)?;
    m.add_function(wrap_pyfunction!(select_rank_cv, m)?)?;
    m.add_function(wrap_pyfunction!(epsilon_rank, m)?)?;
    m.add_function(wrap_pyfunction!(kmeans, m)?)?;
    m.add_function(wrap_pyfunction!(cluster_mode, m)?)?;
    m.add_function(wrap_pyfunction!(read_dtf1, m)?)?;
    m.add_function(wrap_pyfunction!(write_dtf1, m)?)?;
    Ok(())
}
