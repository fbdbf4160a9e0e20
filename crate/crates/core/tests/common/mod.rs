//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use chansim::{ChannelDataset, CovarianceModel, CovarianceSource, HermitianMatrix};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn rng(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

pub fn cn(rng: &mut ChaCha20Rng) -> Complex64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Haar-ish random unitary from the QR factor of a complex Gaussian matrix.
pub fn random_unitary(n: usize, seed: u64) -> DMatrix<Complex64> {
    let mut r = rng(seed);
    let g = DMatrix::from_fn(n, n, |_, _| cn(&mut r));
    g.qr().q()
}

/// Covariance `U·diag(λ)·Uᴴ` with a known spectrum.
pub struct KnownCovariance {
    pub eigenvalues: Vec<f64>,
    pub unitary: DMatrix<Complex64>,
}

impl KnownCovariance {
    /// Geometrically decaying spectrum normalized to trace `n`.
    pub fn decaying(n: usize, rate: f64, seed: u64) -> Self {
        let raw: Vec<f64> = (0..n).map(|k| (-(k as f64) / rate).exp()).collect();
        let s: f64 = raw.iter().sum();
        Self {
            eigenvalues: raw.iter().map(|v| v * n as f64 / s).collect(),
            unitary: random_unitary(n, seed),
        }
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn matrix(&self) -> DMatrix<Complex64> {
        let d = DMatrix::from_diagonal(&DVector::from_iterator(
            self.dim(),
            self.eigenvalues.iter().map(|&l| Complex64::new(l, 0.0)),
        ));
        &self.unitary * d * self.unitary.adjoint()
    }

    pub fn model(&self) -> CovarianceModel {
        let m = self.matrix();
        let h = (&m + m.adjoint()) * Complex64::new(0.5, 0.0);
        CovarianceModel::zero_mean(HermitianMatrix::new(h).unwrap(), CovarianceSource::Analytic)
    }

    /// Samples `U·diag(√λ)·z` with its own generator.
    pub fn sample(&self, count: usize, seed: u64) -> ChannelDataset {
        let n = self.dim();
        let mut r = rng(seed);
        let mut out = Vec::with_capacity(count * n);
        for _ in 0..count {
            let z = DVector::from_fn(n, |k, _| cn(&mut r) * self.eigenvalues[k].sqrt());
            out.extend((&self.unitary * z).iter());
        }
        ChannelDataset::new(n, out, seed).unwrap()
    }
}

/// Double-double number `hi + lo`.
#[derive(Clone, Copy, Debug)]
pub struct Dd {
    hi: f64,
    lo: f64,
}

fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

impl Dd {
    pub fn from(x: f64) -> Self {
        Dd { hi: x, lo: 0.0 }
    }

    pub fn add(self, o: Dd) -> Dd {
        let (s, e) = two_sum(self.hi, o.hi);
        let e = e + self.lo + o.lo;
        let (hi, lo) = quick_two_sum(s, e);
        Dd { hi, lo }
    }

    pub fn mul(self, o: Dd) -> Dd {
        let (p, e) = two_prod(self.hi, o.hi);
        let e = e + self.hi * o.lo + self.lo * o.hi;
        let (hi, lo) = quick_two_sum(p, e);
        Dd { hi, lo }
    }

    pub fn div_f64(self, d: f64) -> Dd {
        let q1 = self.hi / d;
        let (p, e) = two_prod(q1, d);
        let r = (self.hi - p - e + self.lo) / d;
        let (hi, lo) = quick_two_sum(q1, r);
        Dd { hi, lo }
    }

    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }
}

/// `J0(x) = Σ (−x²/4)^k / (k!)²` summed in double-double arithmetic.
pub fn j0_oracle(x: f64) -> f64 {
    let (p, e) = two_prod(x, x);
    let q = Dd { hi: -p / 4.0, lo: -e / 4.0 };
    let mut term = Dd::from(1.0);
    let mut sum = Dd::from(1.0);
    for k in 1..200 {
        let kf = k as f64;
        term = term.mul(q).div_f64(kf * kf);
        sum = sum.add(term);
        if k > 50 && term.hi.abs() < 1e-40 {
            break;
        }
    }
    sum.to_f64()
}

pub fn rel_frobenius(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> f64 {
    (a - b).norm() / b.norm()
}
