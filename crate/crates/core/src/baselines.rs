//! Linear baselines: sample statistics, PCA compression, LMMSE estimation,
//! Gaussian generation and the nMSE metric.

use std::collections::BTreeMap;

use nalgebra::{Cholesky, DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::dataset::ChannelDataset;
use crate::error::{Error, Result};
use crate::linalg::gram_of_rows;
use crate::stochastics::{eigen_factor, sample_rows, standard_complex_normal, HermitianMatrix, RngStream};

/// Rows processed per batched product.
const ROW_CHUNK: usize = 2048;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CovarianceSource {
    Analytic,
    Sample,
    MonteCarlo,
}

/// Mean and second-moment matrix of a channel distribution.
#[derive(Debug, Clone)]
pub struct CovarianceModel {
    pub mean: DVector<Complex64>,
    pub covariance: HermitianMatrix,
    pub source: CovarianceSource,
    pub notes: BTreeMap<String, String>,
}

impl CovarianceModel {
    pub fn new(mean: DVector<Complex64>, covariance: HermitianMatrix, source: CovarianceSource) -> Result<Self> {
        if mean.len() != covariance.dim() {
            return Err(Error::Structural(format!(
                "mean has length {} but the covariance is {}×{}",
                mean.len(),
                covariance.dim(),
                covariance.dim()
            )));
        }
        Ok(Self {
            mean,
            covariance,
            source,
            notes: BTreeMap::new(),
        })
    }

    pub fn zero_mean(covariance: HermitianMatrix, source: CovarianceSource) -> Self {
        Self {
            mean: DVector::zeros(covariance.dim()),
            covariance,
            source,
            notes: BTreeMap::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.covariance.dim()
    }

    /// `C − μμᴴ`, for callers who want a centered second moment.
    pub fn centered(&self) -> Self {
        let c = self.covariance.as_matrix() - &self.mean * self.mean.adjoint();
        let mut notes = self.notes.clone();
        notes.insert("centered".into(), "true".into());
        Self {
            mean: self.mean.clone(),
            covariance: HermitianMatrix::symmetrized(c),
            source: self.source,
            notes,
        }
    }
}

/// Uncentered sample covariance `(1/n)Σ h hᴴ`; the sample mean is carried alongside.
pub fn sample_mean_cov(dataset: &ChannelDataset) -> Result<CovarianceModel> {
    let n = dataset.count();
    if n == 0 {
        return Err(Error::Argument("sample covariance of an empty dataset".into()));
    }
    let dim = dataset.dim();
    let mut mean = DVector::<Complex64>::zeros(dim);
    for s in dataset.iter() {
        for (m, x) in mean.iter_mut().zip(s) {
            *m += x;
        }
    }
    mean /= Complex64::new(n as f64, 0.0);
    let mut c = gram_of_rows(dataset.as_slice(), dim);
    c /= Complex64::new(n as f64, 0.0);
    let mut model = CovarianceModel::new(mean, HermitianMatrix::symmetrized(c), CovarianceSource::Sample)?;
    model.notes.insert("count".into(), n.to_string());
    Ok(model)
}

/// Scales the whole dataset by one factor so that `(1/n)Σ‖h‖² = target`.
pub fn normalize_dataset(dataset: &ChannelDataset, target_mean_square: f64) -> Result<(ChannelDataset, f64)> {
    if dataset.is_empty() {
        return Err(Error::Argument("cannot normalize an empty dataset".into()));
    }
    if !(target_mean_square > 0.0 && target_mean_square.is_finite()) {
        return Err(Error::Argument("normalization target must be positive".into()));
    }
    let ms = dataset.mean_square_norm();
    if ms == 0.0 || !ms.is_finite() {
        return Err(Error::Argument("dataset has no energy to normalize".into()));
    }
    let scale = (target_mean_square / ms).sqrt();
    Ok((dataset.scaled(scale), scale))
}

/// Applies `f` to row blocks of the dataset (as `rows × dim` matrices) in parallel.
fn map_row_blocks<F>(dataset: &ChannelDataset, out_dim: usize, f: F) -> Vec<Complex64>
where
    F: Fn(&DMatrix<Complex64>) -> DMatrix<Complex64> + Sync,
{
    let dim = dataset.dim();
    let mut out = vec![Complex64::new(0.0, 0.0); dataset.count() * out_dim];
    if out_dim == 0 {
        return out;
    }
    out.par_chunks_mut(ROW_CHUNK * out_dim)
        .zip(dataset.as_slice().par_chunks(ROW_CHUNK * dim))
        .for_each(|(dst, src)| {
            let rows = src.len() / dim;
            let block = DMatrix::from_row_slice(rows, dim, src);
            let res = f(&block);
            for r in 0..rows {
                for c in 0..out_dim {
                    dst[r * out_dim + c] = res[(r, c)];
                }
            }
        });
    out
}

/// PCA codec with encoder `Pᴴh` and decoder `Pz`.
#[derive(Debug, Clone)]
pub struct PcaCodec {
    /// `N × N_L/2`, orthonormal columns by descending eigenvalue.
    pub basis: DMatrix<Complex64>,
    /// Number of real latent values, twice the complex latent dimension.
    pub latent_real_dim: usize,
    /// Full eigenvalue spectrum of the fitted covariance, descending.
    pub eigenvalues: Vec<f64>,
}

impl PcaCodec {
    pub fn dim(&self) -> usize {
        self.basis.nrows()
    }

    pub fn encode(&self, h: &[Complex64]) -> Result<DVector<Complex64>> {
        if h.len() != self.dim() {
            return Err(Error::Argument(format!("vector of length {} for a codec of dimension {}", h.len(), self.dim())));
        }
        Ok(self.basis.ad_mul(&DVector::from_column_slice(h)))
    }

    pub fn decode(&self, z: &DVector<Complex64>) -> Result<DVector<Complex64>> {
        if z.len() != self.basis.ncols() {
            return Err(Error::Argument(format!("latent of length {} for {} components", z.len(), self.basis.ncols())));
        }
        Ok(&self.basis * z)
    }

    pub fn roundtrip(&self, h: &[Complex64]) -> Result<DVector<Complex64>> {
        self.decode(&self.encode(h)?)
    }

    /// Expected nMSE on data with the fitted covariance: discarded eigenvalue mass over `N`.
    pub fn analytic_nmse(&self) -> f64 {
        let k = self.basis.ncols();
        self.eigenvalues[k..].iter().sum::<f64>() / self.dim() as f64
    }
}

pub fn pca_fit(cov: &CovarianceModel, n_latent_real: usize) -> Result<PcaCodec> {
    let n = cov.dim();
    if n_latent_real == 0 || n_latent_real % 2 != 0 {
        return Err(Error::Argument(format!(
            "latent size must be a positive even number of real values, got {n_latent_real}"
        )));
    }
    if n_latent_real > 2 * n {
        return Err(Error::Argument(format!(
            "latent size {n_latent_real} exceeds twice the channel dimension {n}"
        )));
    }
    let eig = cov.covariance.eigen();
    let k = n_latent_real / 2;
    Ok(PcaCodec {
        basis: eig.vectors.columns(0, k).into_owned(),
        latent_real_dim: n_latent_real,
        eigenvalues: eig.values,
    })
}

/// Projects every sample onto the codec subspace.
pub fn pca_roundtrip(codec: &PcaCodec, dataset: &ChannelDataset) -> Result<ChannelDataset> {
    if dataset.dim() != codec.dim() {
        return Err(Error::Argument(format!(
            "dataset dimension {} does not match codec dimension {}",
            dataset.dim(),
            codec.dim()
        )));
    }
    // Rows are hᵀ, so the projection acts as hᵀ·conj(P)·Pᵀ.
    let left = codec.basis.conjugate();
    let right = codec.basis.transpose();
    let out = map_row_blocks(dataset, codec.dim(), |b| (b * &left) * &right);
    let mut ds = ChannelDataset::new(codec.dim(), out, dataset.seed)?;
    ds.normalization_scale = dataset.normalization_scale;
    Ok(ds)
}

/// `ĥ = μ + G(y − Aμ)` with `G = C Aᴴ (A C Aᴴ + σ²I)⁻¹`.
#[derive(Debug, Clone)]
pub struct LmmseEstimator {
    pub mean: DVector<Complex64>,
    /// `N × m`
    pub gain: DMatrix<Complex64>,
    /// `m × N`
    pub measurement: DMatrix<Complex64>,
    pub noise_var: f64,
}

impl LmmseEstimator {
    pub fn fit(cov: &CovarianceModel, measurement: &DMatrix<Complex64>, noise_var: f64) -> Result<Self> {
        let n = cov.dim();
        if measurement.ncols() != n || measurement.nrows() == 0 {
            return Err(Error::Argument(format!(
                "measurement matrix is {}×{} but the channel dimension is {n}",
                measurement.nrows(),
                measurement.ncols()
            )));
        }
        if !(noise_var >= 0.0 && noise_var.is_finite()) {
            return Err(Error::Argument("noise variance must be non-negative".into()));
        }
        let m = measurement.nrows();
        let ac = measurement * cov.covariance.as_matrix();
        let mut system = &ac * measurement.adjoint();
        for i in 0..m {
            system[(i, i)] += Complex64::new(noise_var, 0.0);
        }
        let system = HermitianMatrix::symmetrized(system).into_inner();
        let singular = || {
            Error::Numerical(
                "A·C·Aᴴ + σ²I is singular; use a positive noise variance to regularize the system".into(),
            )
        };
        let chol = Cholesky::new(system).ok_or_else(singular)?;
        if noise_var == 0.0 {
            let diag: Vec<f64> = (0..m).map(|i| chol.l_dirty()[(i, i)].re.powi(2)).collect();
            let max = diag.iter().cloned().fold(0.0, f64::max);
            let min = diag.iter().cloned().fold(f64::INFINITY, f64::min);
            if !(min > 1e-12 * max) {
                return Err(singular());
            }
        }
        let gain = chol.solve(&ac).adjoint();
        if gain.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(singular());
        }
        Ok(Self {
            mean: cov.mean.clone(),
            gain,
            measurement: measurement.clone(),
            noise_var,
        })
    }

    pub fn estimate(&self, y: &[Complex64]) -> Result<DVector<Complex64>> {
        if y.len() != self.measurement.nrows() {
            return Err(Error::Argument(format!(
                "observation of length {} for {} measurements",
                y.len(),
                self.measurement.nrows()
            )));
        }
        let y = DVector::from_column_slice(y);
        Ok(&self.mean + &self.gain * (y - &self.measurement * &self.mean))
    }

    /// Estimates every row of a dataset of observations.
    pub fn estimate_dataset(&self, observations: &ChannelDataset) -> Result<ChannelDataset> {
        if observations.dim() != self.measurement.nrows() {
            return Err(Error::Argument(format!(
                "observations have dimension {} but the estimator expects {}",
                observations.dim(),
                self.measurement.nrows()
            )));
        }
        let n = self.gain.nrows();
        let offset = (&self.mean - &self.gain * (&self.measurement * &self.mean)).transpose();
        let gt = self.gain.transpose();
        let out = map_row_blocks(observations, n, |b| {
            let mut r = b * &gt;
            for mut row in r.row_iter_mut() {
                row += &offset;
            }
            r
        });
        let mut ds = ChannelDataset::new(n, out, observations.seed)?;
        ds.normalization_scale = observations.normalization_scale;
        Ok(ds)
    }
}

pub fn lmmse_estimate(
    cov: &CovarianceModel,
    measurement: &DMatrix<Complex64>,
    noise_var: f64,
    y: &[Complex64],
) -> Result<DVector<Complex64>> {
    LmmseEstimator::fit(cov, measurement, noise_var)?.estimate(y)
}

/// `(1/N)·tr(C − G·A·C)` for the LMMSE gain `G`.
pub fn analytic_mmse(cov: &CovarianceModel, measurement: &DMatrix<Complex64>, noise_var: f64) -> Result<f64> {
    let est = LmmseEstimator::fit(cov, measurement, noise_var)?;
    let ac = measurement * cov.covariance.as_matrix();
    let explained: f64 = (0..est.gain.nrows())
        .map(|i| (0..ac.nrows()).map(|k| (est.gain[(i, k)] * ac[(k, i)]).re).sum::<f64>())
        .sum();
    Ok((cov.covariance.trace() - explained) / cov.dim() as f64)
}

/// `y = A·h + n` with `n ~ CN(0, σ²I)`; row `i` draws its noise from
/// `RngStream::new(seed, 4).child(i)`.
pub fn noisy_observations(
    dataset: &ChannelDataset,
    measurement: &DMatrix<Complex64>,
    noise_var: f64,
    seed: u64,
) -> Result<ChannelDataset> {
    if measurement.ncols() != dataset.dim() {
        return Err(Error::Argument(format!(
            "measurement matrix has {} columns but the dataset dimension is {}",
            measurement.ncols(),
            dataset.dim()
        )));
    }
    if !(noise_var >= 0.0 && noise_var.is_finite()) {
        return Err(Error::Argument("noise variance must be non-negative".into()));
    }
    let m = measurement.nrows();
    let at = measurement.transpose();
    let mut out = map_row_blocks(dataset, m, |b| b * &at);
    let root = RngStream::new(seed, 4);
    let sd = noise_var.sqrt();
    out.par_chunks_mut(m).enumerate().for_each(|(i, row)| {
        let mut rng = root.child(i as u64).rng();
        for y in row {
            *y += standard_complex_normal(&mut rng) * sd;
        }
    });
    let mut ds = ChannelDataset::new(m, out, seed)?;
    ds.normalization_scale = dataset.normalization_scale;
    Ok(ds)
}

/// Sampler for `CN(μ, C)` through `x = μ + U√Λ·z`.
#[derive(Debug, Clone)]
pub struct GaussianGenerator {
    pub transform: DMatrix<Complex64>,
    pub mean: DVector<Complex64>,
}

impl GaussianGenerator {
    pub fn fit(cov: &CovarianceModel) -> Self {
        Self {
            transform: eigen_factor(&cov.covariance),
            mean: cov.mean.clone(),
        }
    }

    /// Row `i` uses `RngStream::new(seed, 0).child(i)`.
    pub fn generate(&self, count: usize, seed: u64) -> Result<ChannelDataset> {
        let rows = sample_rows(&self.mean, &self.transform, count, RngStream::new(seed, 0))?;
        Ok(ChannelDataset::new(self.mean.len(), rows, seed)?.with_provenance("generator", "gaussian"))
    }
}

/// Draws `count` samples from `CN(0, C)` where `C` is the model's covariance.
///
/// The covariance is used as the full second moment, so the model mean is
/// not added; pass a centered model with a mean to sample `CN(μ, C − μμᴴ)`.
pub fn gaussian_generate(cov: &CovarianceModel, count: usize, seed: u64) -> Result<ChannelDataset> {
    let zero = CovarianceModel::zero_mean(cov.covariance.clone(), cov.source);
    GaussianGenerator::fit(&zero).generate(count, seed)
}

/// `(1/(count·N))·Σ‖h − ĥ‖²`
pub fn nmse(reference: &ChannelDataset, estimate: &ChannelDataset) -> Result<f64> {
    if reference.dim() != estimate.dim() || reference.count() != estimate.count() {
        return Err(Error::Argument(format!(
            "shape mismatch: {}×{} reference vs {}×{} estimate",
            reference.count(),
            reference.dim(),
            estimate.count(),
            estimate.dim()
        )));
    }
    if reference.is_empty() || reference.dim() == 0 {
        return Err(Error::Argument("nmse of an empty dataset".into()));
    }
    let err: f64 = reference
        .as_slice()
        .par_iter()
        .zip(estimate.as_slice().par_iter())
        .map(|(a, b)| (a - b).norm_sqr())
        .sum();
    Ok(err / (reference.count() * reference.dim()) as f64)
}

/// Noise variance for a given SNR on data normalized to unit power per entry.
pub fn snr_to_noise_var(snr_db: f64) -> f64 {
    10f64.powf(-snr_db / 10.0)
}
