//! Python bindings. Images cross the boundary as flat row-major lists of
//! floats; emitters as `(x_nm, y_nm, intensity)` tuples.

use pyo3::exceptions::{PyArithmeticError, PyOSError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use smlm_core::cel0::{self, Cel0Params, SolverConfig};
use smlm_core::eval::{self, MatchTolerance};
use smlm_core::reconstruct::{reconstruct_frame, FrameScaling};
use smlm_core::simulate::{make_scenario, simulate_frame, Emitter};
use smlm_core::{Error, Image, ImageGrid, PsfModel, Sampling};

fn py_err(e: Error) -> PyErr {
    match e.exit_code() {
        3 => PyArithmeticError::new_err(e.to_string()),
        4 => PyOSError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn image(grid: ImageGrid, values: Vec<f64>) -> PyResult<Image> {
    Image::from_vec(grid, values).map_err(py_err)
}

fn emitters(points: &[(f64, f64, f64)]) -> Vec<Emitter> {
    points
        .iter()
        .map(|&(x, y, i)| Emitter::new(x, y, i))
        .collect()
}

fn tuples(list: &[Emitter]) -> Vec<(f64, f64, f64)> {
    list.iter().map(|e| (e.x_nm, e.y_nm, e.intensity)).collect()
}

/// Gaussian blur followed by downsampling from a `width x height` fine grid.
#[pyclass(name = "ForwardOperator", frozen)]
struct PyOperator {
    inner: smlm_core::ForwardOperator,
}

#[pymethods]
impl PyOperator {
    #[new]
    #[pyo3(signature = (width, height, pixel_nm, factor, sigma_nm, sampling = "decimate"))]
    fn new(
        width: usize,
        height: usize,
        pixel_nm: f64,
        factor: usize,
        sigma_nm: f64,
        sampling: &str,
    ) -> PyResult<Self> {
        let sampling: Sampling = sampling.parse().map_err(py_err)?;
        let grid = ImageGrid::new(width, height, pixel_nm).map_err(py_err)?;
        let psf = PsfModel::with_default_radius(sigma_nm, pixel_nm).map_err(py_err)?;
        let inner = smlm_core::ForwardOperator::with_sampling(grid, factor, psf, sampling)
            .map_err(py_err)?;
        Ok(Self { inner })
    }

    /// `(width, height)` of the fine grid.
    #[getter]
    fn hr_shape(&self) -> (usize, usize) {
        let g = self.inner.hr_grid();
        (g.width, g.height)
    }

    /// `(width, height)` of the coarse grid.
    #[getter]
    fn lr_shape(&self) -> (usize, usize) {
        let g = self.inner.lr_grid();
        (g.width, g.height)
    }

    fn forward(&self, x: Vec<f64>) -> PyResult<Vec<f64>> {
        let x = image(*self.inner.hr_grid(), x)?;
        Ok(self.inner.apply_forward(&x).map_err(py_err)?.into_values())
    }

    fn adjoint(&self, y: Vec<f64>) -> PyResult<Vec<f64>> {
        let y = image(*self.inner.lr_grid(), y)?;
        Ok(self.inner.apply_adjoint(&y).map_err(py_err)?.into_values())
    }

    fn column_norms(&self) -> Vec<f64> {
        self.inner.column_norms().to_vec()
    }

    fn lipschitz(&self) -> PyResult<f64> {
        self.inner.lipschitz().map_err(py_err)
    }
}

#[pyfunction]
fn cel0_penalty(x: Vec<f64>, norms: Vec<f64>, lam: f64) -> PyResult<f64> {
    cel0::cel0_penalty(&x, &norms, lam).map_err(py_err)
}

#[pyfunction]
fn irl1_weights(x: Vec<f64>, norms: Vec<f64>, lam: f64) -> PyResult<Vec<f64>> {
    cel0::irl1_weights(&x, &norms, lam).map_err(py_err)
}

/// CEL0 reconstruction of one coarse frame. Returns a dict with `solution`,
/// `objective_trace`, `outer_iterations`, `inner_iterations` and `converged`.
#[pyfunction]
#[pyo3(signature = (op, y, lam, outer_iters = 40, inner_iters = 200, scaling = "peak"))]
fn solve_cel0<'py>(
    py: Python<'py>,
    op: &PyOperator,
    y: Vec<f64>,
    lam: f64,
    outer_iters: usize,
    inner_iters: usize,
    scaling: &str,
) -> PyResult<Bound<'py, PyDict>> {
    let scaling = match scaling {
        "peak" => FrameScaling::Peak,
        "none" => FrameScaling::None,
        other => return Err(PyValueError::new_err(format!("unknown scaling '{other}'"))),
    };
    Cel0Params::new(lam).map_err(py_err)?;
    let y = image(*op.inner.lr_grid(), y)?;
    let config = SolverConfig {
        outer_iters,
        inner_iters,
        ..Default::default()
    };
    let report = py
        .detach(|| reconstruct_frame(&y, &op.inner, lam, &config, scaling))
        .map_err(py_err)?;
    let out = PyDict::new(py);
    out.set_item("solution", report.solution.into_values())?;
    out.set_item("objective_trace", report.objective_trace)?;
    out.set_item("outer_iterations", report.outer_iterations_used)?;
    out.set_item("inner_iterations", report.inner_iterations_total)?;
    out.set_item("converged", report.converged)?;
    Ok(out)
}

/// One noisy frame of a built-in scenario (`Test1a`, `Test2a`, `Test3a`).
#[pyfunction]
#[pyo3(signature = (name, seed = 7))]
fn simulate_scenario<'py>(py: Python<'py>, name: &str, seed: u64) -> PyResult<Bound<'py, PyDict>> {
    let spec = make_scenario(name).map_err(py_err)?;
    let frame = simulate_frame(&spec, seed).map_err(py_err)?;
    let out = PyDict::new(py);
    out.set_item("hr_shape", (spec.fov.width, spec.fov.height))?;
    out.set_item("pixel_nm", spec.fov.pixel_size)?;
    out.set_item("factor", spec.factor)?;
    out.set_item("sigma_nm", spec.psf.sigma_nm)?;
    out.set_item("snr_db", spec.snr_db)?;
    out.set_item("emitters", tuples(&spec.emitters.emitters))?;
    out.set_item("lr_clean", frame.lr_clean.into_values())?;
    out.set_item("lr", frame.lr.into_values())?;
    Ok(out)
}

#[pyfunction]
fn snr_db(clean: Vec<f64>, noisy: Vec<f64>) -> PyResult<f64> {
    let grid = ImageGrid::new(clean.len().max(1), 1, 1.0).map_err(py_err)?;
    let snr = smlm_core::snr_db(&image(grid, clean)?, &image(grid, noisy)?).map_err(py_err)?;
    Ok(snr.db().unwrap_or(f64::INFINITY))
}

/// Local maxima of a fine-grid image above `threshold_rel` times its peak.
#[pyfunction]
#[pyo3(signature = (x, width, height, pixel_nm, threshold_rel = 0.1, min_distance = 1))]
fn extract_emitters(
    x: Vec<f64>,
    width: usize,
    height: usize,
    pixel_nm: f64,
    threshold_rel: f64,
    min_distance: usize,
) -> PyResult<Vec<(f64, f64, f64)>> {
    let grid = ImageGrid::new(width, height, pixel_nm).map_err(py_err)?;
    let list = eval::extract_emitters(&image(grid, x)?, threshold_rel, min_distance, 1);
    Ok(tuples(&list.emitters))
}

/// Match estimates to ground truth within `delta` fine pixels and score the
/// result. `n_pixels` is the fine-grid size used for true negatives.
#[pyfunction]
fn evaluate<'py>(
    py: Python<'py>,
    gt: Vec<(f64, f64, f64)>,
    est: Vec<(f64, f64, f64)>,
    pixel_nm: f64,
    delta: f64,
    n_pixels: usize,
) -> PyResult<Bound<'py, PyDict>> {
    let tol = MatchTolerance::new(delta).map_err(py_err)?;
    let counts =
        eval::match_emitters(&emitters(&gt), &emitters(&est), tol, pixel_nm).counts(n_pixels);
    let m = eval::metrics(&counts);
    let out = PyDict::new(py);
    out.set_item("tp", counts.tp)?;
    out.set_item("fp", counts.fp)?;
    out.set_item("fn", counts.fn_)?;
    out.set_item("tn", counts.tn)?;
    out.set_item("jaccard", m.jaccard)?;
    out.set_item("sensitivity", m.sensitivity)?;
    out.set_item("specificity", m.specificity)?;
    Ok(out)
}

/// Read a raw stack; returns `(frames, width, height, pixel_nm)`.
#[pyfunction]
fn read_stack(path: &str) -> PyResult<(Vec<Vec<f64>>, usize, usize, f64)> {
    let stack = smlm_core::io::read_stack(path).map_err(py_err)?;
    let g = stack.grid;
    Ok((
        stack.frames.into_iter().map(Image::into_values).collect(),
        g.width,
        g.height,
        g.pixel_size,
    ))
}

#[pyfunction]
fn write_stack(
    path: &str,
    frames: Vec<Vec<f64>>,
    width: usize,
    height: usize,
    pixel_nm: f64,
) -> PyResult<()> {
    let grid = ImageGrid::new(width, height, pixel_nm).map_err(py_err)?;
    let frames = frames
        .into_iter()
        .map(|f| image(grid, f))
        .collect::<PyResult<_>>()?;
    let stack = smlm_core::ImageStack::new(grid, frames).map_err(py_err)?;
    smlm_core::io::write_stack(path, &stack).map_err(py_err)
}

#[pymodule]
fn pysmlm(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyOperator>()?;
    m.add_function(wrap_pyfunction!(cel0_penalty, m)?)?;
    m.add_function(wrap_pyfunction!(irl1_weights, m)?)?;
    m.add_function(wrap_pyfunction!(solve_cel0, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_scenario, m)?)?;
    m.add_function(wrap_pyfunction!(snr_db, m)?)?;
    m.add_function(wrap_pyfunction!(extract_emitters, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(read_stack, m)?)?;
    m.add_function(wrap_pyfunction!(write_stack, m)?)?;
    Ok(())
}
