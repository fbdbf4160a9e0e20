//! Tapped-delay-line OFDM channels.
//!
//! A realization on an `N_t × N_f` grid is
//! `h = Σ_l √p_l · (a_t⁽ˡ⁾ ⊗ a_f⁽ˡ⁾)` with `a_t⁽ˡ⁾ ~ CN(0, C_Jakes)` drawn
//! independently per tap and realization and `a_f⁽ˡ⁾[k] = exp(−j2π·Δf·k·τ_l)`.
//! Vectors are time-major: index `t·N_f + f`. The analytic covariance is
//! `C_Jakes ⊗ Σ_l p_l a_f⁽ˡ⁾a_f⁽ˡ⁾ᴴ`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;

use crate::baselines::{CovarianceModel, CovarianceSource};
use crate::dataset::ChannelDataset;
use crate::error::{Error, Result};
use crate::profiles::LinkProfile;
use crate::stochastics::{eigen_factor, jakes_covariance, standard_complex_normal, HermitianMatrix, RngStream};

/// OFDM sampling grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridConfig {
    pub n_subcarriers: usize,
    pub n_symbols: usize,
    /// Hz
    pub subcarrier_spacing: f64,
    /// Seconds between consecutive OFDM symbols.
    pub symbol_duration: f64,
    /// Hz
    pub max_doppler: f64,
}

impl GridConfig {
    pub fn new(
        n_subcarriers: usize,
        n_symbols: usize,
        subcarrier_spacing: f64,
        symbol_duration: f64,
        max_doppler: f64,
    ) -> Result<Self> {
        let g = Self {
            n_subcarriers,
            n_symbols,
            subcarrier_spacing,
            symbol_duration,
            max_doppler,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_subcarriers == 0 || self.n_symbols == 0 {
            return Err(Error::Argument("grid needs at least one subcarrier and one symbol".into()));
        }
        if !(self.subcarrier_spacing > 0.0 && self.subcarrier_spacing.is_finite()) {
            return Err(Error::Argument("subcarrier spacing must be positive".into()));
        }
        if !(self.symbol_duration > 0.0 && self.symbol_duration.is_finite()) {
            return Err(Error::Argument("symbol duration must be positive".into()));
        }
        if !(self.max_doppler >= 0.0 && self.max_doppler.is_finite()) {
            return Err(Error::Argument("max Doppler must be non-negative".into()));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.n_subcarriers * self.n_symbols
    }
}

/// `[1, e^{−j2πΔfτ}, …, e^{−j2πΔf(n_f−1)τ}]`
pub fn frequency_steering(tau: f64, delta_f: f64, n_f: usize) -> DVector<Complex64> {
    DVector::from_fn(n_f, |k, _| Complex64::from_polar(1.0, -2.0 * PI * delta_f * k as f64 * tau))
}

struct TdlPlan {
    dim: usize,
    n_f: usize,
    n_t: usize,
    jakes_factor: DMatrix<Complex64>,
    /// `√p_l · a_f⁽ˡ⁾` per tap.
    taps: Vec<DVector<Complex64>>,
    /// `√p_los · a_f` and the per-symbol LOS phase increment.
    los: Option<(DVector<Complex64>, f64)>,
}

impl TdlPlan {
    fn new(profile: &LinkProfile, grid: &GridConfig) -> Result<Self> {
        grid.validate()?;
        let delays = profile.physical_delays()?;
        let jakes = jakes_covariance(grid.max_doppler, grid.symbol_duration, grid.n_symbols)?;
        // The temporal covariance is small and usually rank-deficient; the
        // eigen factor keeps f_D = 0 channels exactly constant over time.
        let jakes_factor = eigen_factor(&jakes);
        let taps = profile
            .fading_powers()
            .iter()
            .zip(&delays)
            .map(|(&p, &tau)| frequency_steering(tau, grid.subcarrier_spacing, grid.n_subcarriers) * Complex64::new(p.sqrt(), 0.0))
            .collect();
        let los = profile.los_component().map(|(i, p)| {
            let af = frequency_steering(delays[i], grid.subcarrier_spacing, grid.n_subcarriers) * Complex64::new(p.sqrt(), 0.0);
            let step = 2.0 * PI * profile.los_doppler_fraction * grid.max_doppler * grid.symbol_duration;
            (af, step)
        });
        Ok(Self {
            dim: grid.dim(),
            n_f: grid.n_subcarriers,
            n_t: grid.n_symbols,
            jakes_factor,
            taps,
            los,
        })
    }

    fn realize(&self, stream: RngStream, out: &mut [Complex64]) {
        let mut rng = stream.rng();
        let r = self.jakes_factor.ncols();
        out.fill(Complex64::new(0.0, 0.0));
        let mut z = DVector::<Complex64>::zeros(r);
        for af in &self.taps {
            for zi in z.iter_mut() {
                *zi = standard_complex_normal(&mut rng);
            }
            let at = &self.jakes_factor * &z;
            for t in 0..self.n_t {
                let row = &mut out[t * self.n_f..(t + 1) * self.n_f];
                for (o, a) in row.iter_mut().zip(af.iter()) {
                    *o += at[t] * a;
                }
            }
        }
        if let Some((af, step)) = &self.los {
            let psi: f64 = rng.random_range(-PI..PI);
            for t in 0..self.n_t {
                let rot = Complex64::from_polar(1.0, step * t as f64 + psi);
                let row = &mut out[t * self.n_f..(t + 1) * self.n_f];
                for (o, a) in row.iter_mut().zip(af.iter()) {
                    *o += rot * a;
                }
            }
        }
    }
}

/// Generates `count` TDL realizations on `grid`; realization `i` draws from
/// `RngStream::new(seed, 0).child(i)`, so the output is independent of the
/// worker count.
pub fn generate_tdl_dataset(profile: &LinkProfile, grid: &GridConfig, count: usize, seed: u64) -> Result<ChannelDataset> {
    if count == 0 {
        return Err(Error::Argument("count must be positive".into()));
    }
    let plan = TdlPlan::new(profile, grid)?;
    let root = RngStream::new(seed, 0);
    let mut samples = vec![Complex64::new(0.0, 0.0); count * plan.dim];
    samples
        .par_chunks_mut(plan.dim)
        .enumerate()
        .for_each(|(i, out)| plan.realize(root.child(i as u64), out));

    let ds = ChannelDataset::new(plan.dim, samples, seed)?
        .with_provenance("generator", "tdl")
        .with_provenance("profile", &profile.name)
        .with_provenance("n_subcarriers", grid.n_subcarriers)
        .with_provenance("n_symbols", grid.n_symbols)
        .with_provenance("subcarrier_spacing_hz", grid.subcarrier_spacing)
        .with_provenance("symbol_duration_s", grid.symbol_duration)
        .with_provenance("max_doppler_hz", grid.max_doppler)
        .with_provenance("delay_spread_s", profile.delay_spread().unwrap_or_default())
        .with_provenance("vectorization", "time-major");
    Ok(ds)
}

/// Frequency-domain covariance `Σ_l p_l a_f⁽ˡ⁾a_f⁽ˡ⁾ᴴ` over the fading taps.
pub fn frequency_covariance(profile: &LinkProfile, grid: &GridConfig) -> Result<DMatrix<Complex64>> {
    let delays = profile.physical_delays()?;
    let n_f = grid.n_subcarriers;
    let mut c = DMatrix::<Complex64>::zeros(n_f, n_f);
    for (&p, &tau) in profile.fading_powers().iter().zip(&delays) {
        let af = frequency_steering(tau, grid.subcarrier_spacing, n_f);
        c += &af * af.adjoint() * Complex64::new(p, 0.0);
    }
    Ok(c)
}

/// Exact covariance of the fading part: `C_Jakes ⊗ Σ_l p_l a_f⁽ˡ⁾a_f⁽ˡ⁾ᴴ`.
///
/// For a LOS tap only its fading share `p/(K+1)` enters; the deterministic
/// LOS power is recorded in `notes` and available from [`los_covariance`].
pub fn analytic_tdl_covariance(profile: &LinkProfile, grid: &GridConfig) -> Result<CovarianceModel> {
    grid.validate()?;
    let jakes = jakes_covariance(grid.max_doppler, grid.symbol_duration, grid.n_symbols)?;
    let freq = frequency_covariance(profile, grid)?;
    let cov = HermitianMatrix::symmetrized(jakes.as_matrix().kronecker(&freq));
    let mut model = CovarianceModel::zero_mean(cov, CovarianceSource::Analytic);
    if let Some((i, p)) = profile.los_component() {
        model.notes.insert(
            "los".into(),
            format!(
                "excluded rank-one LOS term: tap {i}, power {p}, Doppler {} Hz",
                profile.los_doppler_fraction * grid.max_doppler
            ),
        );
    }
    Ok(model)
}

/// Covariance `p_los·v·vᴴ` of the random-phase LOS component, if the profile has one.
pub fn los_covariance(profile: &LinkProfile, grid: &GridConfig) -> Result<Option<HermitianMatrix>> {
    let delays = profile.physical_delays()?;
    let Some((i, p)) = profile.los_component() else {
        return Ok(None);
    };
    let af = frequency_steering(delays[i], grid.subcarrier_spacing, grid.n_subcarriers);
    let step = 2.0 * PI * profile.los_doppler_fraction * grid.max_doppler * grid.symbol_duration;
    let at = DVector::from_fn(grid.n_symbols, |t, _| Complex64::from_polar(1.0, step * t as f64));
    let v = at.kronecker(&af);
    Ok(Some(HermitianMatrix::symmetrized(&v * v.adjoint() * Complex64::new(p, 0.0))))
}
