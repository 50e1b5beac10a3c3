//! Python bindings: simulation, solvers, baselines, metrics, movie I/O and the
//! unfolded network. Movies cross the boundary as complex128 arrays of shape (T, H, W).

use std::path::PathBuf;

use corona_core::baselines::{self, SvdFilterConfig, WallFilterConfig};
use corona_core::io::{self, ComplexDtype};
use corona_core::metrics::{self, Image, RoiBox};
use corona_core::net::{self, CoronaNetwork};
use corona_core::prox::RegWeights;
use corona_core::sim::{self, SimConfig, VesselConfig};
use corona_core::solver::{self, MeasurementOps, SolverConfig, Variant};
use corona_core::{Error, MovieTensor, C64};
use numpy::{AllowTypeChange, PyArray1, PyArray2, PyArray3, PyArrayLike2, PyArrayLike3, PyArrayMethods};
use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn err(e: Error) -> PyErr {
    match e {
        Error::Io { .. } | Error::Format { .. } | Error::Corrupt(_) | Error::Version { .. } => PyIOError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

type MovieIn<'py> = PyArrayLike3<'py, C64, AllowTypeChange>;

fn to_movie(a: &MovieIn<'_>) -> PyResult<MovieTensor> {
    let v = a.as_array();
    let dims = v.dim();
    MovieTensor::new(dims, v.iter().copied().collect()).map_err(err)
}

fn from_movie<'py>(py: Python<'py>, m: MovieTensor) -> PyResult<Bound<'py, PyArray3<C64>>> {
    let (t, h, w) = m.shape().as_tuple();
    PyArray1::from_vec(py, m.into_data()).reshape([t, h, w])
}

fn from_image<'py>(py: Python<'py>, img: Image) -> PyResult<Bound<'py, PyArray2<f64>>> {
    PyArray1::from_vec(py, img.data).reshape([img.height, img.width])
}

fn to_image(a: &PyArrayLike2<'_, f64, AllowTypeChange>) -> PyResult<Image> {
    let v = a.as_array();
    let (h, w) = v.dim();
    Image::new(h, w, v.iter().copied().collect()).map_err(err)
}

fn roi(b: (usize, usize, usize, usize)) -> RoiBox {
    RoiBox::new(b.0, b.1, b.2, b.3)
}

/// Simulated CEUS movie; returns a dict with complex arrays `d`, `l`, `s`, `n`.
/// `vessel` is `(row_start, row_end, speed, inflow)`.
#[pyfunction]
#[pyo3(signature = (seed, height=128, width=128, frames=300, vessel=None, free_bubbles=true, noise_scale=0.01, tissue_to_mb_db=30.0))]
#[allow(clippy::too_many_arguments)]
fn simulate<'py>(
    py: Python<'py>,
    seed: u64,
    height: usize,
    width: usize,
    frames: usize,
    vessel: Option<(usize, usize, f64, usize)>,
    free_bubbles: bool,
    noise_scale: f64,
    tissue_to_mb_db: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let cfg = SimConfig {
        seed,
        height,
        width,
        frames,
        vessel: vessel.map(|(row_start, row_end, speed, inflow)| VesselConfig {
            row_start,
            row_end,
            speed,
            inflow,
        }),
        free_bubbles,
        noise_scale,
        tissue_to_mb_db,
        ..Default::default()
    };
    let s = py.detach(|| sim::simulate(&cfg)).map_err(err)?;
    let out = PyDict::new(py);
    out.set_item("d", from_movie(py, s.d)?)?;
    out.set_item("l", from_movie(py, s.l)?)?;
    out.set_item("s", from_movie(py, s.s)?)?;
    out.set_item("n", from_movie(py, s.n)?)?;
    out.set_item("bubble_counts", s.bubble_counts)?;
    Ok(out)
}

/// L+S decomposition with identity measurements; returns `(L, S, objective_history)`.
#[pyfunction]
#[pyo3(signature = (d, lambda1=0.02, lambda2=0.001, max_iters=30000, rel_tol=1e-7, variant="fista", lipschitz=None))]
#[allow(clippy::too_many_arguments)]
#[allow(clippy::type_complexity)]
fn solve<'py>(
    py: Python<'py>,
    d: MovieIn<'py>,
    lambda1: f64,
    lambda2: f64,
    max_iters: usize,
    rel_tol: f64,
    variant: &str,
    lipschitz: Option<f64>,
) -> PyResult<(Bound<'py, PyArray3<C64>>, Bound<'py, PyArray3<C64>>, Vec<f64>)> {
    let m = to_movie(&d)?;
    let cfg = SolverConfig {
        weights: RegWeights::new(lambda1, lambda2).map_err(err)?,
        max_iters,
        rel_tol,
        lipschitz,
        variant: match variant {
            "ista" => Variant::Ista,
            "fista" => Variant::Fista,
            other => return Err(PyValueError::new_err(format!("variant must be 'ista' or 'fista', got '{other}'"))),
        },
    };
    let shape = m.shape();
    let st = py
        .detach(|| solver::solve(&m.unfold(), &MeasurementOps::identity(), &cfg, |_, _, _| {}))
        .map_err(err)?;
    let l = st.l.fold(shape).map_err(err)?;
    let s = st.s.fold(shape).map_err(err)?;
    Ok((from_movie(py, l)?, from_movie(py, s)?, st.objective_history))
}

/// Removes the `cut_rank` leading singular components.
#[pyfunction]
fn svd_filter<'py>(py: Python<'py>, d: MovieIn<'py>, cut_rank: usize) -> PyResult<Bound<'py, PyArray3<C64>>> {
    let m = to_movie(&d)?;
    let out = py.detach(|| baselines::svd_filter(&m, &SvdFilterConfig { cut_rank })).map_err(err)?;
    from_movie(py, out)
}

/// Zero-phase Butterworth high-pass along time; `cutoff` is a fraction of Nyquist.
#[pyfunction]
#[pyo3(signature = (d, order=6, cutoff=0.2))]
fn wall_filter<'py>(py: Python<'py>, d: MovieIn<'py>, order: usize, cutoff: f64) -> PyResult<Bound<'py, PyArray3<C64>>> {
    let m = to_movie(&d)?;
    let out = py.detach(|| baselines::wall_filter(&m, &WallFilterConfig { order, cutoff })).map_err(err)?;
    from_movie(py, out)
}

/// Per-pixel maximum magnitude over frames.
#[pyfunction]
fn mip<'py>(py: Python<'py>, d: MovieIn<'py>) -> PyResult<Bound<'py, PyArray2<f64>>> {
    from_image(py, metrics::mip(&to_movie(&d)?))
}

/// `20·log10(p / max p)` clipped at `floor_db`.
#[pyfunction]
#[pyo3(signature = (image, floor_db=-60.0))]
fn to_db<'py>(py: Python<'py>, image: PyArrayLike2<'py, f64, AllowTypeChange>, floor_db: f64) -> PyResult<Bound<'py, PyArray2<f64>>> {
    from_image(py, metrics::to_db(&to_image(&image)?, floor_db).map_err(err)?)
}

/// Contrast ratio in dB; ROIs are `(row, col, height, width)`.
#[pyfunction]
fn contrast_ratio(
    image: PyArrayLike2<'_, f64, AllowTypeChange>,
    signal: (usize, usize, usize, usize),
    background: (usize, usize, usize, usize),
) -> PyResult<f64> {
    metrics::cr(&to_image(&image)?, &roi(signal), &roi(background)).map_err(err)
}

/// Contrast-to-noise ratio in dB; ROIs are `(row, col, height, width)`.
#[pyfunction]
fn cnr(
    image: PyArrayLike2<'_, f64, AllowTypeChange>,
    signal: (usize, usize, usize, usize),
    background: (usize, usize, usize, usize),
) -> PyResult<f64> {
    metrics::cnr(&to_image(&image)?, &roi(signal), &roi(background)).map_err(err)
}

#[pyfunction]
fn read_movie<'py>(py: Python<'py>, path: PathBuf) -> PyResult<Bound<'py, PyArray3<C64>>> {
    from_movie(py, io::read_movie(&path).map_err(err)?)
}

/// Writes an NPY movie; `dtype` is `"c8"` (default) or `"c16"`.
#[pyfunction]
#[pyo3(signature = (movie, path, dtype="c8"))]
fn write_movie(movie: MovieIn<'_>, path: PathBuf, dtype: &str) -> PyResult<()> {
    let dt = match dtype {
        "c8" => ComplexDtype::C8,
        "c16" => ComplexDtype::C16,
        other => return Err(PyValueError::new_err(format!("dtype must be 'c8' or 'c16', got '{other}'"))),
    };
    io::write_movie_as(&to_movie(&movie)?, &path, dt).map_err(err)
}

/// The unfolded L+S network.
#[pyclass(name = "Network", module = "corona_py")]
struct PyNetwork {
    inner: CoronaNetwork,
}

#[pymethods]
impl PyNetwork {
    /// Network reproducing `layers` ISTA iterations with step `1/lipschitz`.
    #[staticmethod]
    #[pyo3(signature = (layers, lipschitz=2.0))]
    fn from_ista(layers: usize, lipschitz: f64) -> PyResult<Self> {
        Ok(Self {
            inner: net::init_from_ista(layers, lipschitz).map_err(err)?,
        })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self {
            inner: net::load_weights(&path).map_err(err)?,
        })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        net::save_weights(&self.inner, &path).map_err(err)
    }

    #[getter]
    fn depth(&self) -> usize {
        self.inner.depth()
    }

    #[getter]
    fn param_count(&self) -> usize {
        self.inner.param_count()
    }

    /// Flat real parameter vector.
    fn params<'py>(&self, py: Python<'py>) -> Bound<'py, PyArray1<f64>> {
        PyArray1::from_vec(py, self.inner.params_flat())
    }

    /// Pins both thresholds to fixed values instead of the learned adaptive rule.
    fn pin_thresholds(&mut self, thr_l: f64, thr_s: f64) {
        self.inner.thresholds = net::ThresholdMode::Pinned { thr_l, thr_s };
    }

    /// `(L, S)` for input `d`.
    #[allow(clippy::type_complexity)]
    fn forward<'py>(
        &self,
        py: Python<'py>,
        d: MovieIn<'py>,
    ) -> PyResult<(Bound<'py, PyArray3<C64>>, Bound<'py, PyArray3<C64>>)> {
        let m = to_movie(&d)?;
        let (l, s) = py.detach(|| net::forward(&m, &self.inner)).map_err(err)?;
        Ok((from_movie(py, l)?, from_movie(py, s)?))
    }

    fn __repr__(&self) -> String {
        format!("Network(depth={}, params={})", self.inner.depth(), self.inner.param_count())
    }
}

#[pymodule]
fn corona_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(svd_filter, m)?)?;
    m.add_function(wrap_pyfunction!(wall_filter, m)?)?;
    m.add_function(wrap_pyfunction!(mip, m)?)?;
    m.add_function(wrap_pyfunction!(to_db, m)?)?;
    m.add_function(wrap_pyfunction!(contrast_ratio, m)?)?;
    m.add_function(wrap_pyfunction!(cnr, m)?)?;
    m.add_function(wrap_pyfunction!(read_movie, m)?)?;
    m.add_function(wrap_pyfunction!(write_movie, m)?)?;
    m.add_class::<PyNetwork>()?;
    Ok(())
}
