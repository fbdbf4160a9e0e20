//! Distribution diagnostics: spectral efficiency, empirical CDFs, DFT-codebook
//! fingerprints, total variation and the combined Gaussianity report.

use std::fmt::Write as _;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::seq::SliceRandom;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::baselines::{gaussian_generate, sample_mean_cov};
use crate::dataset::ChannelDataset;
use crate::error::{Error, Result};
use crate::stochastics::RngStream;

const PMF_TOL: f64 = 1e-12;

/// `log₂(1 + ‖h‖²/σ²)`
pub fn spectral_efficiency(h: &[Complex64], noise_var: f64) -> Result<f64> {
    if !(noise_var > 0.0) {
        return Err(Error::Argument(format!("noise variance must be positive, got {noise_var}")));
    }
    let e: f64 = h.iter().map(|z| z.norm_sqr()).sum();
    Ok((e / noise_var).ln_1p() / std::f64::consts::LN_2)
}

/// Spectral efficiency of every sample.
pub fn spectral_efficiencies(dataset: &ChannelDataset, noise_var: f64) -> Result<Vec<f64>> {
    dataset.iter().map(|h| spectral_efficiency(h, noise_var)).collect()
}

/// Right-continuous empirical CDF.
#[derive(Debug, Clone, PartialEq)]
pub struct Ecdf {
    sorted: Vec<f64>,
}

impl Ecdf {
    pub fn new(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Argument("empirical CDF of an empty sample".into()));
        }
        if values.iter().any(|v| v.is_nan()) {
            return Err(Error::Argument("empirical CDF input contains NaN".into()));
        }
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        Ok(Self { sorted })
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    /// `#{v ≤ x}/n`
    pub fn eval(&self, x: f64) -> f64 {
        self.sorted.partition_point(|&v| v <= x) as f64 / self.sorted.len() as f64
    }

    /// Steps `(value, F(value))` at each distinct value.
    pub fn table(&self) -> Vec<(f64, f64)> {
        let n = self.sorted.len() as f64;
        let mut out: Vec<(f64, f64)> = Vec::new();
        for (i, &v) in self.sorted.iter().enumerate() {
            let f = (i + 1) as f64 / n;
            match out.last_mut() {
                Some(last) if last.0 == v => last.1 = f,
                _ => out.push((v, f)),
            }
        }
        out
    }

    /// Two-column CSV `value,cumulative_probability`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("value,cumulative_probability\n");
        for (v, f) in self.table() {
            let _ = writeln!(s, "{},{}", fmt17(v), fmt17(f));
        }
        s
    }
}

pub fn empirical_cdf(values: &[f64]) -> Result<Ecdf> {
    Ecdf::new(values)
}

/// Fixed 17-significant-digit rendering used by every CSV output.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

/// Two-sample Kolmogorov–Smirnov statistic `sup |F_a − F_b|`.
pub fn ks_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    let fa = Ecdf::new(a)?;
    let fb = Ecdf::new(b)?;
    let (xa, xb) = (&fa.sorted, &fb.sorted);
    let (na, nb) = (xa.len() as f64, xb.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0f64);
    while i < xa.len() && j < xb.len() {
        let x = xa[i].min(xb[j]);
        while i < xa.len() && xa[i] <= x {
            i += 1;
        }
        while j < xb.len() && xb[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(d)
}

/// Probability mass function over codebook indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pmf {
    pub masses: Vec<f64>,
}

impl Pmf {
    pub fn new(masses: Vec<f64>) -> Result<Self> {
        if masses.is_empty() {
            return Err(Error::Argument("PMF needs a non-empty support".into()));
        }
        if masses.iter().any(|&m| !(m >= 0.0)) {
            return Err(Error::Argument("PMF masses must be non-negative".into()));
        }
        let total: f64 = masses.iter().sum();
        if (total - 1.0).abs() > PMF_TOL * masses.len() as f64 {
            return Err(Error::Argument(format!("PMF masses sum to {total}, not 1")));
        }
        Ok(Self { masses })
    }

    pub fn from_counts(counts: &[u64]) -> Result<Self> {
        let total: u64 = counts.iter().sum();
        if total == 0 {
            return Err(Error::Argument("histogram has no entries".into()));
        }
        Self::new(counts.iter().map(|&c| c as f64 / total as f64).collect())
    }

    pub fn support_size(&self) -> usize {
        self.masses.len()
    }
}

/// `½·Σ|p_k − q_k|`
pub fn total_variation(p: &Pmf, q: &Pmf) -> Result<f64> {
    if p.support_size() != q.support_size() {
        return Err(Error::Argument(format!(
            "support sizes differ: {} vs {}",
            p.support_size(),
            q.support_size()
        )));
    }
    Ok(0.5 * p.masses.iter().zip(&q.masses).map(|(a, b)| (a - b).abs()).sum::<f64>())
}

/// Unitary DFT matrix, column `k` = `e^{−j2πnk/N}/√N`.
pub fn dft_matrix(n: usize) -> DMatrix<Complex64> {
    let s = 1.0 / (n as f64).sqrt();
    DMatrix::from_fn(n, n, |r, c| {
        let phase = -2.0 * std::f64::consts::PI * ((r * c) % n) as f64 / n as f64;
        Complex64::from_polar(s, phase)
    })
}

/// Codebook used for fingerprinting.
#[derive(Debug, Clone)]
pub enum Codebook {
    /// Square unitary DFT of the given size; evaluated with an FFT.
    Dft(usize),
    /// Explicit square unitary matrix, one codeword per column.
    Matrix(DMatrix<Complex64>),
}

impl Codebook {
    pub fn dim(&self) -> usize {
        match self {
            Codebook::Dft(n) => *n,
            Codebook::Matrix(m) => m.nrows(),
        }
    }

    pub fn to_matrix(&self) -> DMatrix<Complex64> {
        match self {
            Codebook::Dft(n) => dft_matrix(*n),
            Codebook::Matrix(m) => m.clone(),
        }
    }
}

/// First index attaining the largest magnitude.
fn argmax_abs(v: &[Complex64]) -> usize {
    let mut best = 0;
    let mut best_val = f64::NEG_INFINITY;
    for (k, z) in v.iter().enumerate() {
        let m = z.norm_sqr();
        if m > best_val {
            best = k;
            best_val = m;
        }
    }
    best
}

fn merge_counts(mut a: Vec<u64>, b: Vec<u64>) -> Vec<u64> {
    for (x, y) in a.iter_mut().zip(b) {
        *x += y;
    }
    a
}

/// Histogram of `argmax_k |c_kᴴ h|` over the dataset.
pub fn fingerprint_pmf(dataset: &ChannelDataset, codebook: &Codebook) -> Result<Pmf> {
    let n = dataset.dim();
    if codebook.dim() != n {
        return Err(Error::Argument(format!(
            "codebook dimension {} does not match dataset dimension {n}",
            codebook.dim()
        )));
    }
    if dataset.is_empty() {
        return Err(Error::Argument("fingerprint of an empty dataset".into()));
    }
    let counts = match codebook {
        Codebook::Dft(_) => {
            // cₖᴴh = Σₙ h[n]·e^{+j2πnk/N}/√N is an inverse DFT; the common
            // scale does not move the argmax.
            let fft: Arc<dyn Fft<f64>> = FftPlanner::new().plan_fft_inverse(n);
            dataset
                .as_slice()
                .par_chunks(n)
                .fold(
                    || (vec![0u64; n], vec![Complex64::new(0.0, 0.0); n], vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()]),
                    |(mut counts, mut buf, mut scratch), h| {
                        buf.copy_from_slice(h);
                        fft.process_with_scratch(&mut buf, &mut scratch);
                        counts[argmax_abs(&buf)] += 1;
                        (counts, buf, scratch)
                    },
                )
                .map(|(c, _, _)| c)
                .reduce(|| vec![0u64; n], merge_counts)
        }
        Codebook::Matrix(m) => {
            if m.ncols() != n {
                return Err(Error::Argument("codebook must be square".into()));
            }
            let gram = m.ad_mul(m) - DMatrix::<Complex64>::identity(n, n);
            if gram.iter().map(|z| z.norm()).fold(0.0, f64::max) > 1e-8 {
                return Err(Error::Argument("codebook is not unitary".into()));
            }
            let ch = m.adjoint();
            dataset
                .as_slice()
                .par_chunks(n)
                .fold(
                    || vec![0u64; n],
                    |mut counts, h| {
                        let proj: Vec<Complex64> = (0..n)
                            .map(|k| ch.row(k).iter().zip(h).map(|(a, b)| a * b).sum())
                            .collect();
                        counts[argmax_abs(&proj)] += 1;
                        counts
                    },
                )
                .reduce(|| vec![0u64; n], merge_counts)
        }
    };
    Pmf::from_counts(&counts)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    ConsistentWithGaussian,
    NonGaussian,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReportOptions {
    /// Random half-splits used for the noise floors.
    pub splits: usize,
    /// A statistic passes if it is at most `multiplier` times its floor.
    pub multiplier: f64,
    pub min_count: usize,
}

impl Default for ReportOptions {
    fn default() -> Self {
        Self {
            splits: 7,
            multiplier: 1.5,
            min_count: 2000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportConfig {
    pub count: usize,
    pub dim: usize,
    pub noise_var: f64,
    pub seed: u64,
    pub codebook: String,
    pub splits: usize,
    pub multiplier: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianityReport {
    pub tv_vs_gaussian: f64,
    pub tv_noise_floor: f64,
    pub ks_spectral_efficiency: f64,
    pub ks_noise_floor: f64,
    pub verdict: Verdict,
    pub config: ReportConfig,
    pub pmf_ground_truth: Pmf,
    pub pmf_gaussian: Pmf,
}

impl GaussianityReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Median TV and KS over random disjoint half-splits of `dataset`.
pub fn split_noise_floors(dataset: &ChannelDataset, noise_var: f64, splits: usize, seed: u64) -> Result<(f64, f64)> {
    if splits == 0 {
        return Err(Error::Argument("at least one split is required".into()));
    }
    let n = dataset.count();
    let half = n / 2;
    let codebook = Codebook::Dft(dataset.dim());
    let se = spectral_efficiencies(dataset, noise_var)?;
    let root = RngStream::new(seed, 5);
    let mut tvs = Vec::with_capacity(splits);
    let mut kss = Vec::with_capacity(splits);
    for s in 0..splits {
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(&mut root.child(s as u64).rng());
        let (a, b) = (&idx[..half], &idx[half..2 * half]);
        let pa = fingerprint_pmf(&dataset.select(a), &codebook)?;
        let pb = fingerprint_pmf(&dataset.select(b), &codebook)?;
        tvs.push(total_variation(&pa, &pb)?);
        let sa: Vec<f64> = a.iter().map(|&i| se[i]).collect();
        let sb: Vec<f64> = b.iter().map(|&i| se[i]).collect();
        kss.push(ks_distance(&sa, &sb)?);
    }
    Ok((median(tvs), median(kss)))
}

pub fn gaussianity_report(dataset: &ChannelDataset, noise_var: f64, seed: u64) -> Result<GaussianityReport> {
    gaussianity_report_with(dataset, noise_var, seed, &ReportOptions::default())
}

/// Compares a dataset against a same-size Gaussian surrogate drawn from its
/// own sample covariance, with noise floors from random half-splits.
pub fn gaussianity_report_with(
    dataset: &ChannelDataset,
    noise_var: f64,
    seed: u64,
    options: &ReportOptions,
) -> Result<GaussianityReport> {
    let n = dataset.count();
    if n < options.min_count {
        return Err(Error::Argument(format!(
            "gaussianity report needs at least {} samples, got {n}",
            options.min_count
        )));
    }
    if !(noise_var > 0.0) {
        return Err(Error::Argument(format!("noise variance must be positive, got {noise_var}")));
    }
    let cov = sample_mean_cov(dataset)?;
    let surrogate = gaussian_generate(&cov, n, RngStream::new(seed, 6).key())?;
    let codebook = Codebook::Dft(dataset.dim());
    let pmf_gt = fingerprint_pmf(dataset, &codebook)?;
    let pmf_g = fingerprint_pmf(&surrogate, &codebook)?;
    let tv = total_variation(&pmf_gt, &pmf_g)?;
    let ks = ks_distance(&spectral_efficiencies(dataset, noise_var)?, &spectral_efficiencies(&surrogate, noise_var)?)?;
    let (tv_floor, ks_floor) = split_noise_floors(dataset, noise_var, options.splits, seed)?;
    let passes = tv <= options.multiplier * tv_floor && ks <= options.multiplier * ks_floor;
    Ok(GaussianityReport {
        tv_vs_gaussian: tv,
        tv_noise_floor: tv_floor,
        ks_spectral_efficiency: ks,
        ks_noise_floor: ks_floor,
        verdict: if passes {
            Verdict::ConsistentWithGaussian
        } else {
            Verdict::NonGaussian
        },
        config: ReportConfig {
            count: n,
            dim: dataset.dim(),
            noise_var,
            seed,
            codebook: format!("dft-{}", dataset.dim()),
            splits: options.splits,
            multiplier: options.multiplier,
        },
        pmf_ground_truth: pmf_gt,
        pmf_gaussian: pmf_g,
    })
}
