use std::path::PathBuf;

use pyo3::exceptions::{PyFileNotFoundError, PyOSError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyBytes, PyDict};

use pap_enhance::metrics::{self, Averaging, ConfusionMatrix};
use pap_enhance::{clahe, dataset, pipeline, pmd, quality, raster, Error};

fn to_py(e: Error) -> PyErr {
    match e {
        Error::FileNotFound { .. } => PyFileNotFoundError::new_err(e.to_string()),
        e if e.is_io() => PyOSError::new_err(e.to_string()),
        e => PyValueError::new_err(e.to_string()),
    }
}

/// 8-bit image with 1 or 3 interleaved channels.
#[pyclass(name = "Image", module = "pap_enhance_py", skip_from_py_object)]
#[derive(Clone)]
struct PyImage {
    inner: raster::ImageBuffer,
}

#[pymethods]
impl PyImage {
    #[new]
    fn new(width: usize, height: usize, channels: usize, data: Vec<u8>) -> PyResult<Self> {
        raster::ImageBuffer::new(width, height, channels, data)
            .map(|inner| Self { inner })
            .map_err(to_py)
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        raster::load_image(path).map(|inner| Self { inner }).map_err(to_py)
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        raster::save_image(&self.inner, path).map_err(to_py)
    }

    #[getter]
    fn width(&self) -> usize {
        self.inner.width()
    }

    #[getter]
    fn height(&self) -> usize {
        self.inner.height()
    }

    #[getter]
    fn channels(&self) -> usize {
        self.inner.channels()
    }

    fn data<'py>(&self, py: Python<'py>) -> Bound<'py, PyBytes> {
        PyBytes::new(py, self.inner.data())
    }

    fn __eq__(&self, other: PyRef<'_, PyImage>) -> bool {
        self.inner == other.inner
    }

    fn __repr__(&self) -> String {
        format!(
            "Image(width={}, height={}, channels={})",
            self.inner.width(),
            self.inner.height(),
            self.inner.channels()
        )
    }
}

#[pyclass(name = "PmdParams", module = "pap_enhance_py", skip_from_py_object)]
#[derive(Clone)]
struct PyPmdParams {
    inner: pmd::PmdParams,
}

#[pymethods]
impl PyPmdParams {
    #[new]
    #[pyo3(signature = (iterations = 20, kappa = 20.0, lambda_ = 0.25))]
    fn new(iterations: usize, kappa: f64, lambda_: f64) -> PyResult<Self> {
        pmd::PmdParams::new(iterations, kappa, lambda_)
            .map(|inner| Self { inner })
            .map_err(to_py)
    }

    #[getter]
    fn iterations(&self) -> usize {
        self.inner.iterations
    }

    #[getter]
    fn kappa(&self) -> f64 {
        self.inner.kappa
    }

    #[getter]
    fn lambda_(&self) -> f64 {
        self.inner.lambda
    }
}

#[pyclass(name = "ClaheParams", module = "pap_enhance_py", skip_from_py_object)]
#[derive(Clone)]
struct PyClaheParams {
    inner: clahe::ClaheParams,
}

#[pymethods]
impl PyClaheParams {
    #[new]
    #[pyo3(signature = (clip_limit = 2.0, grid_cols = 8, grid_rows = 8))]
    fn new(clip_limit: f64, grid_cols: usize, grid_rows: usize) -> PyResult<Self> {
        clahe::ClaheParams::new(clip_limit, grid_cols, grid_rows)
            .map(|inner| Self { inner })
            .map_err(to_py)
    }

    #[getter]
    fn clip_limit(&self) -> f64 {
        self.inner.clip_limit
    }

    #[getter]
    fn grid(&self) -> (usize, usize) {
        (self.inner.grid_cols, self.inner.grid_rows)
    }
}

fn plane(values: Vec<f64>, width: usize, height: usize) -> PyResult<raster::ImagePlane> {
    raster::ImagePlane::new(width, height, values).map_err(to_py)
}

#[pyfunction]
fn diffusion_coefficient(gradient: f64, kappa: f64) -> f64 {
    pmd::diffusion_coefficient(gradient, kappa)
}

/// Diffuses a row-major plane of `width * height` floats.
#[pyfunction]
#[pyo3(signature = (values, width, height, params = None))]
fn pmd_filter(
    values: Vec<f64>,
    width: usize,
    height: usize,
    params: Option<PyRef<'_, PyPmdParams>>,
) -> PyResult<Vec<f64>> {
    let params = params.map(|p| p.inner).unwrap_or_default();
    Ok(pmd::pmd_filter(&plane(values, width, height)?, &params).into_data())
}

#[pyfunction]
#[pyo3(signature = (values, width, height, params = None))]
fn clahe_apply(
    values: Vec<f64>,
    width: usize,
    height: usize,
    params: Option<PyRef<'_, PyClaheParams>>,
) -> PyResult<Vec<f64>> {
    let params = params.map(|p| p.inner).unwrap_or_default();
    clahe::clahe_apply(&plane(values, width, height)?, &params)
        .map(raster::ImagePlane::into_data)
        .map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (image, mode = "hybrid", pmd = None, clahe = None))]
fn enhance(
    image: PyRef<'_, PyImage>,
    mode: &str,
    pmd: Option<PyRef<'_, PyPmdParams>>,
    clahe: Option<PyRef<'_, PyClaheParams>>,
) -> PyResult<PyImage> {
    let mut config = pipeline::PipelineConfig::with_mode(mode.parse().map_err(to_py)?);
    if let Some(p) = pmd {
        config.pmd = p.inner;
    }
    if let Some(c) = clahe {
        config.clahe = c.inner;
    }
    pipeline::enhance(&image.inner, &config)
        .map(|inner| PyImage { inner })
        .map_err(to_py)
}

#[pyfunction]
fn ceiq_features<'py>(py: Python<'py>, image: PyRef<'_, PyImage>) -> PyResult<Bound<'py, PyDict>> {
    let f = quality::ceiq_features(&image.inner).map_err(to_py)?;
    let dict = PyDict::new(py);
    for (name, value) in quality::QualityFeatures::NAMES.iter().zip(f.to_array()) {
        dict.set_item(name, value)?;
    }
    Ok(dict)
}

#[pyfunction]
#[pyo3(signature = (confusion, averaging = "macro"))]
fn compute_metrics<'py>(
    py: Python<'py>,
    confusion: Vec<Vec<u64>>,
    averaging: &str,
) -> PyResult<Bound<'py, PyDict>> {
    let averaging = match averaging {
        "macro" => Averaging::Macro,
        "weighted" => Averaging::Weighted,
        other => return Err(PyValueError::new_err(format!("unknown averaging '{other}'"))),
    };
    let cm = ConfusionMatrix::unlabeled(confusion).map_err(to_py)?;
    let m = metrics::compute_metrics(&cm, averaging).map_err(to_py)?;
    let dict = PyDict::new(py);
    dict.set_item("accuracy", m.accuracy)?;
    dict.set_item("precision", m.precision)?;
    dict.set_item("recall", m.recall)?;
    dict.set_item("f1", m.f1)?;
    Ok(dict)
}

/// Scans and splits a class-per-directory dataset; returns the manifest JSON.
#[pyfunction]
#[pyo3(signature = (root, seed = dataset::DEFAULT_SEED, ratios = dataset::DEFAULT_RATIOS))]
fn split_dataset(root: PathBuf, seed: u64, ratios: [f64; 3]) -> PyResult<String> {
    let scanned = dataset::scan_dataset(root).map_err(to_py)?;
    let manifest = dataset::split_dataset(&scanned, ratios, seed).map_err(to_py)?;
    Ok(manifest.to_json())
}

/// Compares metrics files of two modes; returns the comparison JSON.
#[pyfunction]
fn compare_metrics_files(baseline: Vec<PathBuf>, candidate: Vec<PathBuf>) -> PyResult<String> {
    let load = |files: &[PathBuf]| -> PyResult<Vec<metrics::MetricsReport>> {
        let mut all = Vec::new();
        for f in files {
            all.extend(metrics::load_metrics_file(f, Averaging::Macro).map_err(to_py)?);
        }
        Ok(all)
    };
    let report = metrics::compare_reports(&load(&baseline)?, &load(&candidate)?).map_err(to_py)?;
    serde_json::to_string(&report).map_err(|e| PyValueError::new_err(e.to_string()))
}

#[pymodule]
fn pap_enhance_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyImage>()?;
    m.add_class::<PyPmdParams>()?;
    m.add_class::<PyClaheParams>()?;
    m.add_function(wrap_pyfunction!(diffusion_coefficient, m)?)?;
    m.add_function(wrap_pyfunction!(pmd_filter, m)?)?;
    m.add_function(wrap_pyfunction!(clahe_apply, m)?)?;
    m.add_function(wrap_pyfunction!(enhance, m)?)?;
    m.add_function(wrap_pyfunction!(ceiq_features, m)?)?;
    m.add_function(wrap_pyfunction!(compute_metrics, m)?)?;
    m.add_function(wrap_pyfunction!(split_dataset, m)?)?;
    m.add_function(wrap_pyfunction!(compare_metrics_files, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
