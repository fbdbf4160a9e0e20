//! Numerical primitives shared by the generators: the zeroth-order Bessel
//! function, Jakes Doppler covariances, PSD factorization and seeded
//! circularly-symmetric complex Gaussian sampling.
//!
//! Complex Gaussian convention: `z ~ CN(0, 1)` has independent real and
//! imaginary parts, each `N(0, 1/2)`, so `E[|z|²] = 1`.

use std::cmp::Ordering;
use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_4, PI};

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg;

/// Below this magnitude `bessel_j0` sums the power series, above it the
/// Hankel asymptotic expansion.
const BESSEL_SERIES_LIMIT: f64 = 12.0;

/// Relative tolerance for the conjugate-symmetry check of [`HermitianMatrix`].
const HERMITIAN_TOL: f64 = 1e-12;

/// Relative diagonal loading applied before the Cholesky attempt.
const CHOLESKY_JITTER: f64 = 1e-10;

/// Zeroth-order Bessel function of the first kind.
///
/// Absolute error is below 1e-10 for `|x| ≤ 1e4`.
pub fn bessel_j0(x: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(Error::Domain(format!("bessel_j0 of non-finite value {x}")));
    }
    let ax = x.abs();
    if ax < BESSEL_SERIES_LIMIT {
        Ok(j0_series(ax))
    } else {
        Ok(j0_asymptotic(ax))
    }
}

fn j0_series(x: f64) -> f64 {
    let q = -0.25 * x * x;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..200 {
        let kf = k as f64;
        term *= q / (kf * kf);
        sum += term;
        if term.abs() < 1e-18 * sum.abs().max(1e-300) && kf > 0.5 * x {
            break;
        }
    }
    sum
}

fn j0_asymptotic(x: f64) -> f64 {
    // a_k = ((1)(9)(25)...((2k-1)^2)) / (k! 8^k), alternating in P and Q.
    let mut p = 0.0;
    let mut q = 0.0;
    let mut a = 1.0;
    let mut prev = f64::INFINITY;
    for k in 0..64 {
        let term = a / x.powi(k);
        if term > prev || term < 1e-17 {
            break;
        }
        prev = term;
        let sign = if (k / 2) % 2 == 0 { 1.0 } else { -1.0 };
        if k % 2 == 0 {
            p += sign * term;
        } else {
            q += sign * term;
        }
        let odd = (2 * k + 1) as f64;
        a *= odd * odd / (8.0 * (k + 1) as f64);
    }
    let phase = x - FRAC_PI_4;
    (2.0 / (PI * x)).sqrt() * (p * phase.cos() + q * phase.sin())
}

/// Seed bookkeeping for reproducible, order-independent sampling.
///
/// Every `(root_seed, stream_index)` pair maps to its own ChaCha8 generator
/// keyed by [`RngStream::key`]. Children of a stream form a second level, so
/// per-realization generators never depend on how work is scheduled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RngStream {
    pub root_seed: u64,
    pub stream_index: u64,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl RngStream {
    pub fn new(root_seed: u64, stream_index: u64) -> Self {
        Self {
            root_seed,
            stream_index,
        }
    }

    /// Substream key: `splitmix64(splitmix64(root_seed) ^ splitmix64(stream_index).rotate_left(23))`.
    pub fn key(&self) -> u64 {
        splitmix64(splitmix64(self.root_seed) ^ splitmix64(self.stream_index).rotate_left(23))
    }

    pub fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.key())
    }

    /// Derived stream rooted at this stream's key.
    pub fn child(&self, index: u64) -> RngStream {
        RngStream::new(self.key(), index)
    }
}

/// One `CN(0, 1)` draw.
pub fn standard_complex_normal<R: rand::Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re * FRAC_1_SQRT_2, im * FRAC_1_SQRT_2)
}

/// Square complex matrix that is conjugate-symmetric.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianMatrix(DMatrix<Complex64>);

/// Eigendecomposition with eigenvalues in descending order.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    /// Eigenvectors as columns, ordered like `values`, each with its first
    /// non-negligible entry made real and positive.
    pub vectors: DMatrix<Complex64>,
}

impl HermitianMatrix {
    /// Validates conjugate symmetry to 1e-12 relative and stores the exactly
    /// symmetrized matrix.
    pub fn new(m: DMatrix<Complex64>) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::Structural(format!(
                "expected a square matrix, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        if m.nrows() == 0 {
            return Err(Error::Structural("matrix dimension must be positive".into()));
        }
        let scale = m.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1.0);
        let n = m.nrows();
        for i in 0..n {
            for j in i..n {
                let d = (m[(i, j)] - m[(j, i)].conj()).norm();
                if !(d <= HERMITIAN_TOL * scale) {
                    return Err(Error::Structural(format!(
                        "matrix is not Hermitian: entry ({i},{j}) deviates by {d:e}"
                    )));
                }
            }
        }
        Ok(Self::symmetrized(m))
    }

    /// Averages `m` with its adjoint without checking.
    pub(crate) fn symmetrized(m: DMatrix<Complex64>) -> Self {
        let adj = m.adjoint();
        Self((m + adj) * Complex64::new(0.5, 0.0))
    }

    pub fn identity(dim: usize) -> Self {
        Self(DMatrix::identity(dim, dim))
    }

    pub fn zeros(dim: usize) -> Self {
        Self(DMatrix::zeros(dim, dim))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<Complex64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<Complex64> {
        self.0
    }

    pub fn trace(&self) -> f64 {
        self.0.diagonal().iter().map(|z| z.re).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        linalg::frobenius(&self.0)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self(&self.0 * Complex64::new(factor, 0.0))
    }

    /// Hermitian eigendecomposition, eigenvalues descending.
    ///
    /// Eigenvalues that agree to 1e-12 of the spectral radius are ordered by
    /// the lexicographic `(re, im)` order of their phase-fixed eigenvectors.
    pub fn eigen(&self) -> HermitianEigen {
        let n = self.dim();
        let eig = SymmetricEigen::new(self.0.clone());
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

        let mut columns: Vec<(f64, Vec<Complex64>)> = order
            .iter()
            .map(|&k| {
                let mut v: Vec<Complex64> = eig.eigenvectors.column(k).iter().copied().collect();
                linalg::fix_phase(&mut v);
                (eig.eigenvalues[k], v)
            })
            .collect();

        let radius = columns.iter().map(|c| c.0.abs()).fold(0.0, f64::max);
        let tie = 1e-12 * radius.max(f64::MIN_POSITIVE);
        let mut start = 0;
        while start < columns.len() {
            let mut end = start + 1;
            while end < columns.len() && (columns[end - 1].0 - columns[end].0).abs() <= tie {
                end += 1;
            }
            if end - start > 1 {
                columns[start..end].sort_by(|a, b| lexicographic(&a.1, &b.1));
            }
            start = end;
        }

        let values = columns.iter().map(|c| c.0).collect();
        let vectors = DMatrix::from_fn(n, n, |i, j| columns[j].1[i]);
        HermitianEigen { values, vectors }
    }

    /// Checks the PSD invariant: every eigenvalue ≥ −1e-10·(trace/dim).
    pub fn check_psd(&self) -> Result<()> {
        let floor = -1e-10 * (self.trace().abs() / self.dim() as f64);
        let min = SymmetricEigen::new(self.0.clone())
            .eigenvalues
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min);
        if min < floor {
            Err(Error::Structural(format!(
                "matrix is not positive semidefinite: smallest eigenvalue {min:e}"
            )))
        } else {
            Ok(())
        }
    }
}

fn lexicographic(a: &[Complex64], b: &[Complex64]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        let o = x.re.total_cmp(&y.re).then(x.im.total_cmp(&y.im));
        if o != Ordering::Equal {
            return o;
        }
    }
    Ordering::Equal
}

/// Jakes temporal covariance: `C[i][j] = J0(2π f_D ΔT |i−j|)`.
pub fn jakes_covariance(max_doppler: f64, symbol_duration: f64, n: usize) -> Result<HermitianMatrix> {
    if !(max_doppler >= 0.0) || !max_doppler.is_finite() {
        return Err(Error::Argument(format!("max Doppler must be >= 0, got {max_doppler}")));
    }
    if !(symbol_duration > 0.0) || !symbol_duration.is_finite() {
        return Err(Error::Argument(format!(
            "symbol duration must be > 0, got {symbol_duration}"
        )));
    }
    if n == 0 {
        return Err(Error::Argument("Jakes covariance needs n >= 1".into()));
    }
    let lags = (0..n)
        .map(|k| bessel_j0(2.0 * PI * max_doppler * symbol_duration * k as f64))
        .collect::<Result<Vec<_>>>()?;
    let m = DMatrix::from_fn(n, n, |i, j| Complex64::new(lags[i.abs_diff(j)], 0.0));
    Ok(HermitianMatrix(m))
}

/// Returns `F` (`dim × r`) with `F·Fᴴ ≈ C`.
///
/// Tries a Cholesky factorization of `C + ε·I` with `ε = 1e-10·trace/dim`;
/// if that fails, falls back to `U·√Λ` over the strictly positive part of the
/// spectrum.
pub fn psd_factorize(c: &HermitianMatrix) -> Result<DMatrix<Complex64>> {
    let n = c.dim();
    let jitter = CHOLESKY_JITTER * c.trace().max(0.0) / n as f64;
    if jitter > 0.0 {
        let loaded = c.as_matrix() + DMatrix::<Complex64>::identity(n, n) * Complex64::new(jitter, 0.0);
        if let Some(chol) = Cholesky::new(loaded) {
            let l = chol.unpack();
            if l.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
                return Ok(l);
            }
        }
    }
    Ok(eigen_factor(c))
}

/// `U·√Λ` restricted to eigenvalues above round-off; always succeeds.
pub(crate) fn eigen_factor(c: &HermitianMatrix) -> DMatrix<Complex64> {
    let eig = c.eigen();
    // Eigenvalues at round-off level of the largest one are treated as zero.
    let floor = eig.values.first().copied().unwrap_or(0.0).max(0.0) * f64::EPSILON * c.dim() as f64;
    let keep: Vec<usize> = (0..eig.values.len()).filter(|&k| eig.values[k] > floor).collect();
    let mut f = DMatrix::<Complex64>::zeros(c.dim(), keep.len());
    for (col, &k) in keep.iter().enumerate() {
        let s = eig.values[k].sqrt();
        for i in 0..c.dim() {
            f[(i, col)] = eig.vectors[(i, k)] * s;
        }
    }
    f
}

/// Draws `count` rows i.i.d. from `CN(mean, F·Fᴴ)`; row `r` uses `stream.child(r)`.
pub fn sample_complex_gaussian(
    mean: &DVector<Complex64>,
    factor: &DMatrix<Complex64>,
    count: usize,
    stream: RngStream,
) -> Result<DMatrix<Complex64>> {
    let rows = sample_rows(mean, factor, count, stream)?;
    let n = mean.len();
    Ok(DMatrix::from_row_slice(count, n, &rows))
}

/// Row-major variant of [`sample_complex_gaussian`].
pub(crate) fn sample_rows(
    mean: &DVector<Complex64>,
    factor: &DMatrix<Complex64>,
    count: usize,
    stream: RngStream,
) -> Result<Vec<Complex64>> {
    let n = mean.len();
    if factor.nrows() != n {
        return Err(Error::Structural(format!(
            "factor has {} rows but the mean has length {n}",
            factor.nrows()
        )));
    }
    if count == 0 {
        return Err(Error::Argument("sample count must be positive".into()));
    }
    let r = factor.ncols();
    let mut out = vec![Complex64::new(0.0, 0.0); count * n];
    if n == 0 {
        return Ok(out);
    }
    out.par_chunks_mut(n).enumerate().for_each(|(row, dst)| {
        let mut rng = stream.child(row as u64).rng();
        let z = DVector::<Complex64>::from_fn(r, |_, _| standard_complex_normal(&mut rng));
        let x = factor * z;
        for (i, d) in dst.iter_mut().enumerate() {
            *d = mean[i] + x[i];
        }
    });
    Ok(out)
}
