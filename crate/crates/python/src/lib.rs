//! Python bindings for `chansim`.

use std::path::PathBuf;

use chansim::experiment::{generate_for_profile, ArraySpec, GridSpec};
use chansim::{ChannelDataset, CovarianceModel, GaussianityReport, LmmseEstimator, PcaCodec, RayMode};
use nalgebra::DMatrix;
use num_complex::Complex64;
use pyo3::exceptions::{PyArithmeticError, PyIOError, PyValueError};
use pyo3::prelude::*;

fn to_py(e: chansim::Error) -> PyErr {
    match e {
        chansim::Error::Io { .. } => PyIOError::new_err(e.to_string()),
        chansim::Error::Numerical(_) => PyArithmeticError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn rows_to_matrix(rows: &[Vec<Complex64>]) -> PyResult<DMatrix<Complex64>> {
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.is_empty() || ncols == 0 || rows.iter().any(|r| r.len() != ncols) {
        return Err(PyValueError::new_err("expected a non-empty rectangular list of rows"));
    }
    Ok(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

fn matrix_to_rows(m: &DMatrix<Complex64>) -> Vec<Vec<Complex64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

/// A set of complex channel vectors of equal dimension.
#[pyclass(frozen, name = "Dataset", module = "chansim")]
struct Dataset(ChannelDataset);

#[pymethods]
impl Dataset {
    #[new]
    #[pyo3(signature = (rows, seed=0))]
    fn new(rows: Vec<Vec<Complex64>>, seed: u64) -> PyResult<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        let flat = rows.into_iter().flatten().collect();
        ChannelDataset::new(dim, flat, seed).map(Self).map_err(to_py)
    }

    #[staticmethod]
    fn read(path: PathBuf) -> PyResult<Self> {
        ChannelDataset::read_chds(path).map(Self).map_err(to_py)
    }

    fn write(&self, path: PathBuf) -> PyResult<()> {
        self.0.write_chds(path).map_err(to_py)
    }

    #[getter]
    fn dim(&self) -> usize {
        self.0.dim()
    }

    #[getter]
    fn count(&self) -> usize {
        self.0.count()
    }

    fn __len__(&self) -> usize {
        self.0.count()
    }

    fn sample(&self, i: usize) -> PyResult<Vec<Complex64>> {
        if i >= self.0.count() {
            return Err(PyValueError::new_err(format!("sample {i} out of range")));
        }
        Ok(self.0.sample(i).to_vec())
    }

    fn rows(&self) -> Vec<Vec<Complex64>> {
        self.0.iter().map(<[Complex64]>::to_vec).collect()
    }

    fn mean_square_norm(&self) -> f64 {
        self.0.mean_square_norm()
    }

    /// Returns the rescaled dataset and the factor applied. The target
    /// defaults to the dimension.
    #[pyo3(signature = (target=None))]
    fn normalized(&self, target: Option<f64>) -> PyResult<(Self, f64)> {
        let target = target.unwrap_or(self.0.dim() as f64);
        let (ds, scale) = chansim::normalize_dataset(&self.0, target).map_err(to_py)?;
        Ok((Self(ds), scale))
    }

    fn __repr__(&self) -> String {
        format!("Dataset(count={}, dim={})", self.0.count(), self.0.dim())
    }
}

/// Mean and covariance of a channel vector.
#[pyclass(frozen, name = "Covariance", module = "chansim")]
struct Covariance(CovarianceModel);

#[pymethods]
impl Covariance {
    #[getter]
    fn dim(&self) -> usize {
        self.0.dim()
    }

    #[getter]
    fn trace(&self) -> f64 {
        self.0.covariance.trace()
    }

    #[getter]
    fn mean(&self) -> Vec<Complex64> {
        self.0.mean.iter().copied().collect()
    }

    fn matrix(&self) -> Vec<Vec<Complex64>> {
        matrix_to_rows(self.0.covariance.as_matrix())
    }

    fn centered(&self) -> Self {
        Self(self.0.centered())
    }
}

#[pyclass(frozen, name = "Pca", module = "chansim")]
struct Pca(PcaCodec);

#[pymethods]
impl Pca {
    #[getter]
    fn latent_real_dim(&self) -> usize {
        self.0.latent_real_dim
    }

    #[getter]
    fn eigenvalues(&self) -> Vec<f64> {
        self.0.eigenvalues.clone()
    }

    fn analytic_nmse(&self) -> f64 {
        self.0.analytic_nmse()
    }

    fn encode(&self, h: Vec<Complex64>) -> PyResult<Vec<Complex64>> {
        Ok(self.0.encode(&h).map_err(to_py)?.iter().copied().collect())
    }

    fn decode(&self, z: Vec<Complex64>) -> PyResult<Vec<Complex64>> {
        let z = nalgebra::DVector::from_vec(z);
        Ok(self.0.decode(&z).map_err(to_py)?.iter().copied().collect())
    }

    fn roundtrip(&self, py: Python<'_>, data: &Dataset) -> PyResult<Dataset> {
        py.detach(|| chansim::pca_roundtrip(&self.0, &data.0)).map(Dataset).map_err(to_py)
    }
}

#[pyclass(frozen, name = "Lmmse", module = "chansim")]
struct Lmmse(LmmseEstimator);

#[pymethods]
impl Lmmse {
    fn estimate(&self, py: Python<'_>, observations: &Dataset) -> PyResult<Dataset> {
        py.detach(|| self.0.estimate_dataset(&observations.0)).map(Dataset).map_err(to_py)
    }
}

#[pyclass(frozen, name = "Report", module = "chansim")]
struct Report(GaussianityReport);

#[pymethods]
impl Report {
    #[getter]
    fn tv_vs_gaussian(&self) -> f64 {
        self.0.tv_vs_gaussian
    }

    #[getter]
    fn tv_noise_floor(&self) -> f64 {
        self.0.tv_noise_floor
    }

    #[getter]
    fn ks_spectral_efficiency(&self) -> f64 {
        self.0.ks_spectral_efficiency
    }

    #[getter]
    fn ks_noise_floor(&self) -> f64 {
        self.0.ks_noise_floor
    }

    /// `"consistent-with-gaussian"` or `"non-gaussian"`.
    #[getter]
    fn verdict(&self) -> &'static str {
        match self.0.verdict {
            chansim::Verdict::ConsistentWithGaussian => "consistent-with-gaussian",
            chansim::Verdict::NonGaussian => "non-gaussian",
        }
    }

    fn to_json(&self) -> PyResult<String> {
        self.0.to_json().map_err(to_py)
    }
}

fn measurement_or_identity(measurement: Option<Vec<Vec<Complex64>>>, dim: usize) -> PyResult<DMatrix<Complex64>> {
    match measurement {
        Some(rows) => rows_to_matrix(&rows),
        None => Ok(DMatrix::identity(dim, dim)),
    }
}

#[pyfunction]
fn bundled_profiles() -> Vec<&'static str> {
    chansim::bundled_names()
}

/// Profile document as JSON text; accepts a bundled name or a file path.
#[pyfunction]
fn profile_json(name: &str) -> PyResult<String> {
    let p = chansim::resolve(name).map_err(to_py)?;
    Ok(p.to_json().to_string())
}

#[pyfunction]
#[pyo3(signature = (profile, count, seed, subcarriers, symbols, scs_khz, duration_ms, doppler_hz, delay_spread_ns=None))]
#[allow(clippy::too_many_arguments)]
fn generate_tdl(
    py: Python<'_>,
    profile: &str,
    count: usize,
    seed: u64,
    subcarriers: usize,
    symbols: usize,
    scs_khz: f64,
    duration_ms: f64,
    doppler_hz: f64,
    delay_spread_ns: Option<f64>,
) -> PyResult<Dataset> {
    let p = chansim::resolve(profile).map_err(to_py)?;
    let grid = GridSpec {
        subcarriers,
        symbols,
        scs_khz,
        duration_ms,
        doppler_hz,
        delay_spread_ns,
        los_doppler_fraction: None,
    };
    py.detach(|| generate_for_profile(&p, Some(&grid), None, count, seed))
        .map(Dataset)
        .map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (profile, count, seed, tx, rx, fc_ghz, spacing=0.5, ray_mode="iid-laplacian", redraw_angles=false))]
#[allow(clippy::too_many_arguments)]
fn generate_cdl(
    py: Python<'_>,
    profile: &str,
    count: usize,
    seed: u64,
    tx: usize,
    rx: usize,
    fc_ghz: f64,
    spacing: f64,
    ray_mode: &str,
    redraw_angles: bool,
) -> PyResult<Dataset> {
    let p = chansim::resolve(profile).map_err(to_py)?;
    let arrays = ArraySpec {
        tx,
        rx,
        fc_ghz,
        spacing_wavelengths: spacing,
        ray_mode: ray_mode.parse::<RayMode>().map_err(to_py)?,
        redraw_angles,
    };
    py.detach(|| generate_for_profile(&p, None, Some(&arrays), count, seed))
        .map(Dataset)
        .map_err(to_py)
}

/// Uncentered sample statistics: the covariance is the second moment.
#[pyfunction]
fn sample_cov(py: Python<'_>, data: &Dataset) -> PyResult<Covariance> {
    py.detach(|| chansim::sample_mean_cov(&data.0)).map(Covariance).map_err(to_py)
}

#[pyfunction]
fn pca_fit(cov: &Covariance, n_latent: usize) -> PyResult<Pca> {
    chansim::pca_fit(&cov.0, n_latent).map(Pca).map_err(to_py)
}

/// LMMSE estimator for `y = A·h + n`; `A` defaults to the identity.
#[pyfunction]
#[pyo3(signature = (cov, noise_var, measurement=None))]
fn lmmse_fit(cov: &Covariance, noise_var: f64, measurement: Option<Vec<Vec<Complex64>>>) -> PyResult<Lmmse> {
    let a = measurement_or_identity(measurement, cov.0.dim())?;
    LmmseEstimator::fit(&cov.0, &a, noise_var).map(Lmmse).map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (cov, noise_var, measurement=None))]
fn analytic_mmse(cov: &Covariance, noise_var: f64, measurement: Option<Vec<Vec<Complex64>>>) -> PyResult<f64> {
    let a = measurement_or_identity(measurement, cov.0.dim())?;
    chansim::analytic_mmse(&cov.0, &a, noise_var).map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (data, noise_var, seed, measurement=None))]
fn noisy_observations(
    data: &Dataset,
    noise_var: f64,
    seed: u64,
    measurement: Option<Vec<Vec<Complex64>>>,
) -> PyResult<Dataset> {
    let a = measurement_or_identity(measurement, data.0.dim())?;
    chansim::noisy_observations(&data.0, &a, noise_var, seed)
        .map(Dataset)
        .map_err(to_py)
}

#[pyfunction]
fn gaussian_generate(py: Python<'_>, cov: &Covariance, count: usize, seed: u64) -> PyResult<Dataset> {
    py.detach(|| chansim::gaussian_generate(&cov.0, count, seed))
        .map(Dataset)
        .map_err(to_py)
}

#[pyfunction]
fn nmse(reference: &Dataset, estimate: &Dataset) -> PyResult<f64> {
    chansim::nmse(&reference.0, &estimate.0).map_err(to_py)
}

#[pyfunction]
fn snr_to_noise_var(snr_db: f64) -> f64 {
    chansim::snr_to_noise_var(snr_db)
}

#[pyfunction]
fn spectral_efficiencies(data: &Dataset, noise_var: f64) -> PyResult<Vec<f64>> {
    chansim::diagnostics::spectral_efficiencies(&data.0, noise_var).map_err(to_py)
}

#[pyfunction]
fn ks_distance(a: Vec<f64>, b: Vec<f64>) -> PyResult<f64> {
    chansim::ks_distance(&a, &b).map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (data, snr_db=20.0, seed=0))]
fn gaussianity_report(py: Python<'_>, data: &Dataset, snr_db: f64, seed: u64) -> PyResult<Report> {
    let s2 = chansim::snr_to_noise_var(snr_db);
    py.detach(|| chansim::gaussianity_report(&data.0, s2, seed))
        .map(Report)
        .map_err(to_py)
}

#[pymodule]
#[pyo3(name = "chansim")]
fn chansim_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Dataset>()?;
    m.add_class::<Covariance>()?;
    m.add_class::<Pca>()?;
    m.add_class::<Lmmse>()?;
    m.add_class::<Report>()?;
    m.add_function(wrap_pyfunction!(bundled_profiles, m)?)?;
    m.add_function(wrap_pyfunction!(profile_json, m)?)?;
    m.add_function(wrap_pyfunction!(generate_tdl, m)?)?;
    m.add_function(wrap_pyfunction!(generate_cdl, m)?)?;
    m.add_function(wrap_pyfunction!(sample_cov, m)?)?;
    m.add_function(wrap_pyfunction!(pca_fit, m)?)?;
    m.add_function(wrap_pyfunction!(lmmse_fit, m)?)?;
    m.add_function(wrap_pyfunction!(analytic_mmse, m)?)?;
    m.add_function(wrap_pyfunction!(noisy_observations, m)?)?;
    m.add_function(wrap_pyfunction!(gaussian_generate, m)?)?;
    m.add_function(wrap_pyfunction!(nmse, m)?)?;
    m.add_function(wrap_pyfunction!(snr_to_noise_var, m)?)?;
    m.add_function(wrap_pyfunction!(spectral_efficiencies, m)?)?;
    m.add_function(wrap_pyfunction!(ks_distance, m)?)?;
    m.add_function(wrap_pyfunction!(gaussianity_report, m)?)?;
    Ok(())
}
