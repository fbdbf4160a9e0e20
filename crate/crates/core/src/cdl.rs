//! Clustered-delay-line MIMO channels in the spatial domain.
//!
//! `H = Σ_l (1/√M) Σ_m ρ_lm · a_rx(φ_A, θ_A) · a_tx(φ_D, θ_D)ᵀ` with
//! `ρ_lm = √p_l · e^{jβ_lm}`. Samples are `vec(H)` in rx-major order,
//! i.e. `h = Σ ρ_lm (a_rx ⊗ a_tx)` and index `r·N_tx + t`.

use std::f64::consts::PI;

use nalgebra::DVector;
use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;

use crate::baselines::{CovarianceModel, CovarianceSource};
use crate::dataset::ChannelDataset;
use crate::error::{Error, Result};
use crate::linalg::gram_of_rows;
use crate::profiles::{AngleSpreads, CdlCluster, CdlProfile};
use crate::stochastics::{HermitianMatrix, RngStream};

/// Speed of light in m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Unit-rms ray offsets used by the standard 20-ray cluster.
const FIXED_OFFSETS_20: [f64; 10] = [
    0.0447, 0.1413, 0.2492, 0.3715, 0.5129, 0.6797, 0.8844, 1.1481, 1.5195, 2.1551,
];

#[derive(Debug, Clone, PartialEq)]
pub struct ArrayConfig {
    /// Element positions in meters.
    pub element_positions: Vec<[f64; 3]>,
    /// Meters.
    pub wavelength: f64,
}

impl ArrayConfig {
    pub fn new(element_positions: Vec<[f64; 3]>, wavelength: f64) -> Result<Self> {
        let a = Self {
            element_positions,
            wavelength,
        };
        a.validate()?;
        Ok(a)
    }

    pub fn validate(&self) -> Result<()> {
        if self.element_positions.is_empty() {
            return Err(Error::Argument("array needs at least one element".into()));
        }
        if !(self.wavelength > 0.0 && self.wavelength.is_finite()) {
            return Err(Error::Argument("wavelength must be positive".into()));
        }
        if self.element_positions.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::Argument("element positions must be finite".into()));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.element_positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.element_positions.is_empty()
    }
}

/// Uniform linear array along the x axis.
pub fn ula_config(n: usize, spacing_wavelengths: f64, wavelength: f64) -> Result<ArrayConfig> {
    if !(spacing_wavelengths > 0.0 && spacing_wavelengths.is_finite()) {
        return Err(Error::Argument("element spacing must be positive".into()));
    }
    let positions = (0..n)
        .map(|i| [i as f64 * spacing_wavelengths * wavelength, 0.0, 0.0])
        .collect();
    ArrayConfig::new(positions, wavelength)
}

/// Wavelength in meters for a carrier in Hz.
pub fn wavelength_for(carrier_hz: f64) -> f64 {
    SPEED_OF_LIGHT / carrier_hz
}

/// Entry `i` is `exp(j·2π/λ·e(φ,θ)·d_i)` with `e = [sinθ cosφ, sinθ sinφ, cosθ]`.
pub fn steering_vector(array: &ArrayConfig, azimuth: f64, zenith: f64) -> DVector<Complex64> {
    let (st, ct) = zenith.sin_cos();
    let (sp, cp) = azimuth.sin_cos();
    let e = [st * cp, st * sp, ct];
    let k = 2.0 * PI / array.wavelength;
    DVector::from_iterator(
        array.len(),
        array.element_positions.iter().map(|d| {
            let proj = e[0] * d[0] + e[1] * d[1] + e[2] * d[2];
            Complex64::from_polar(1.0, k * proj)
        }),
    )
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayAngles {
    pub aod: f64,
    pub aoa: f64,
    pub zod: f64,
    pub zoa: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RayAngleSet {
    pub rays: Vec<RayAngles>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RayMode {
    #[default]
    IidLaplacian,
    FixedOffsets,
}

impl std::str::FromStr for RayMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "iid-laplacian" => Ok(Self::IidLaplacian),
            "fixed-offsets" => Ok(Self::FixedOffsets),
            other => Err(Error::Argument(format!(
                "unknown ray mode '{other}' (expected iid-laplacian or fixed-offsets)"
            ))),
        }
    }
}

/// Unit-rms offsets for `m` rays: the tabulated set for 20, Laplacian
/// quantiles at `(k − ½)/m` otherwise.
fn unit_offsets(m: usize) -> Vec<f64> {
    if m == 20 {
        return FIXED_OFFSETS_20.iter().flat_map(|&a| [a, -a]).collect();
    }
    let b = std::f64::consts::FRAC_1_SQRT_2;
    (0..m)
        .map(|k| {
            let u = (k as f64 + 0.5) / m as f64 - 0.5;
            -b * u.signum() * (1.0 - 2.0 * u.abs()).ln()
        })
        .collect()
}

/// Laplacian draw with the given mean and standard deviation.
fn laplacian<R: Rng + ?Sized>(rng: &mut R, mean: f64, std_dev: f64) -> f64 {
    if std_dev == 0.0 {
        return mean;
    }
    let b = std_dev / std::f64::consts::SQRT_2;
    let u: f64 = rng.random::<f64>() - 0.5;
    mean - b * u.signum() * (1.0 - 2.0 * u.abs()).ln()
}

/// Draws the `rays` sub-path angles of one cluster.
pub fn draw_ray_angles(
    cluster: &CdlCluster,
    spreads: &AngleSpreads,
    rays: usize,
    mode: RayMode,
    stream: RngStream,
) -> Result<RayAngleSet> {
    if rays == 0 {
        return Err(Error::Argument("rays per cluster must be positive".into()));
    }
    let mut rng = stream.rng();
    let means = [cluster.aod, cluster.aoa, cluster.zod, cluster.zoa];
    let sds = [spreads.asd, spreads.asa, spreads.zsd, spreads.zsa];
    let mut dims: [Vec<f64>; 4] = Default::default();
    match mode {
        RayMode::IidLaplacian => {
            for (d, out) in dims.iter_mut().enumerate() {
                *out = (0..rays).map(|_| laplacian(&mut rng, means[d], sds[d])).collect();
            }
        }
        RayMode::FixedOffsets => {
            let base = unit_offsets(rays);
            for (d, out) in dims.iter_mut().enumerate() {
                let mut off = base.clone();
                off.shuffle(&mut rng);
                *out = off.iter().map(|o| means[d] + sds[d] * o).collect();
            }
        }
    }
    let rays = (0..rays)
        .map(|m| RayAngles {
            aod: dims[0][m],
            aoa: dims[1][m],
            zod: dims[2][m].clamp(0.0, PI),
            zoa: dims[3][m].clamp(0.0, PI),
        })
        .collect();
    Ok(RayAngleSet { rays })
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CdlOptions {
    pub ray_mode: RayMode,
    /// Redraw ray angles for every realization instead of freezing one draw.
    pub redraw_angles: bool,
}

fn angle_stream(seed: u64, draw: u64) -> RngStream {
    RngStream::new(seed, 1).child(draw)
}

/// One frozen draw of all ray angles for a profile and pair of arrays.
#[derive(Debug, Clone)]
pub struct CdlInstance {
    dim: usize,
    /// Ray angle sets per cluster.
    pub angles: Vec<RayAngleSet>,
    /// Row `k` holds `√(p_l/M)·(a_rx ⊗ a_tx)` for the `k`-th fading ray.
    ray_vectors: Vec<Complex64>,
    /// `√p_los·(a_rx ⊗ a_tx)` at the LOS cluster's mean angles.
    los_vector: Option<Vec<Complex64>>,
}

fn ray_vector(tx: &ArrayConfig, rx: &ArrayConfig, r: &RayAngles, scale: f64) -> DVector<Complex64> {
    let a_rx = steering_vector(rx, r.aoa, r.zoa);
    let a_tx = steering_vector(tx, r.aod, r.zod);
    a_rx.kronecker(&a_tx) * Complex64::new(scale, 0.0)
}

impl CdlInstance {
    /// Angles of cluster `l` come from `angle_stream.child(l)`.
    pub fn draw(profile: &CdlProfile, tx: &ArrayConfig, rx: &ArrayConfig, mode: RayMode, angle_stream: RngStream) -> Result<Self> {
        tx.validate()?;
        rx.validate()?;
        let m = profile.rays_per_cluster;
        let dim = tx.len() * rx.len();
        let fading = profile.fading_powers();
        let mut angles = Vec::with_capacity(profile.clusters.len());
        let mut ray_vectors = Vec::with_capacity(profile.clusters.len() * m * dim);
        for (l, (cluster, p)) in profile.clusters.iter().zip(&fading).enumerate() {
            let set = draw_ray_angles(cluster, &profile.spreads, m, mode, angle_stream.child(l as u64))?;
            let scale = (p / m as f64).sqrt();
            for r in &set.rays {
                ray_vectors.extend(ray_vector(tx, rx, r, scale).iter());
            }
            angles.push(set);
        }
        let los_vector = profile.los_component().map(|(i, p)| {
            let c = &profile.clusters[i];
            let centre = RayAngles {
                aod: c.aod,
                aoa: c.aoa,
                zod: c.zod,
                zoa: c.zoa,
            };
            ray_vector(tx, rx, &centre, p.sqrt()).iter().copied().collect()
        });
        Ok(Self {
            dim,
            angles,
            ray_vectors,
            los_vector,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_rays(&self) -> usize {
        self.ray_vectors.len() / self.dim
    }

    /// Writes one realization into `out` using fresh ray phases from `rng`.
    pub fn realize<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [Complex64]) {
        out.fill(Complex64::new(0.0, 0.0));
        for v in self.ray_vectors.chunks_exact(self.dim) {
            let w = Complex64::from_polar(1.0, rng.random_range(-PI..PI));
            for (o, x) in out.iter_mut().zip(v) {
                *o += w * x;
            }
        }
        if let Some(v) = &self.los_vector {
            let w = Complex64::from_polar(1.0, rng.random_range(-PI..PI));
            for (o, x) in out.iter_mut().zip(v) {
                *o += w * x;
            }
        }
    }

    /// Exact covariance of realizations drawn from this instance, LOS included.
    pub fn covariance(&self) -> HermitianMatrix {
        HermitianMatrix::symmetrized(self.gram())
    }

    fn gram(&self) -> nalgebra::DMatrix<Complex64> {
        let mut c = gram_of_rows(&self.ray_vectors, self.dim);
        if let Some(v) = &self.los_vector {
            c += gram_of_rows(v, self.dim);
        }
        c
    }
}

/// Generates `count` CDL realizations. Ray angles are drawn once from the
/// seed and shared by all realizations unless `options.redraw_angles` is set;
/// realization `i` takes its phases from `RngStream::new(seed, 0).child(i)`.
pub fn generate_cdl_dataset(
    profile: &CdlProfile,
    tx: &ArrayConfig,
    rx: &ArrayConfig,
    count: usize,
    seed: u64,
    options: CdlOptions,
) -> Result<ChannelDataset> {
    if count == 0 {
        return Err(Error::Argument("count must be positive".into()));
    }
    let root = RngStream::new(seed, 0);
    let frozen = CdlInstance::draw(profile, tx, rx, options.ray_mode, angle_stream(seed, 0))?;
    let dim = frozen.dim();
    let mut samples = vec![Complex64::new(0.0, 0.0); count * dim];
    samples.par_chunks_mut(dim).enumerate().try_for_each(|(i, out)| -> Result<()> {
        let stream = root.child(i as u64);
        let mut rng = stream.rng();
        if options.redraw_angles {
            let inst = CdlInstance::draw(profile, tx, rx, options.ray_mode, stream.child(0))?;
            inst.realize(&mut rng, out);
        } else {
            frozen.realize(&mut rng, out);
        }
        Ok(())
    })?;

    let mode = match options.ray_mode {
        RayMode::IidLaplacian => "iid-laplacian",
        RayMode::FixedOffsets => "fixed-offsets",
    };
    let ds = ChannelDataset::new(dim, samples, seed)?
        .with_provenance("generator", "cdl")
        .with_provenance("profile", &profile.name)
        .with_provenance("n_tx", tx.len())
        .with_provenance("n_rx", rx.len())
        .with_provenance("wavelength_m", tx.wavelength)
        .with_provenance("ray_mode", mode)
        .with_provenance("redraw_angles", options.redraw_angles)
        .with_provenance("vectorization", "rx-major");
    Ok(ds)
}

/// Monte-Carlo covariance `Σ_l Ĉ_l` averaged over `n_draws` independent ray
/// angle draws, plus the LOS term. Draw 0 uses the same angles as
/// [`generate_cdl_dataset`] with the same seed, so `n_draws = 1` gives the
/// exact covariance of that dataset.
pub fn mc_cdl_covariance(
    profile: &CdlProfile,
    tx: &ArrayConfig,
    rx: &ArrayConfig,
    n_draws: usize,
    seed: u64,
    ray_mode: RayMode,
) -> Result<CovarianceModel> {
    if n_draws == 0 {
        return Err(Error::Argument("n_draws must be positive".into()));
    }
    let grams: Vec<nalgebra::DMatrix<Complex64>> = (0..n_draws as u64)
        .into_par_iter()
        .map(|d| CdlInstance::draw(profile, tx, rx, ray_mode, angle_stream(seed, d)).map(|inst| inst.gram()))
        .collect::<Result<_>>()?;
    let mut acc = grams[0].clone();
    for g in &grams[1..] {
        acc += g;
    }
    acc /= Complex64::new(n_draws as f64, 0.0);
    let mut model = CovarianceModel::zero_mean(HermitianMatrix::symmetrized(acc), CovarianceSource::MonteCarlo);
    model.notes.insert("n_draws".into(), n_draws.to_string());
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::frobenius;
    use crate::profiles::{bundled, load_profile};

    fn lambda() -> f64 {
        wavelength_for(3.5e9)
    }

    fn one_cluster(spread_deg: f64, rays: usize) -> CdlProfile {
        load_profile(&format!(
            r#"{{"kind":"cdl","name":"one","k_factor_db":null,"rays_per_cluster":{rays},
                "spreads_deg":{{"asd":{spread_deg},"asa":{spread_deg},"zsd":{spread_deg},"zsa":{spread_deg}}},
                "clusters":[{{"power":1,"aod_deg":30,"aoa_deg":-40,"zod_deg":80,"zoa_deg":100}}]}}"#
        ))
        .unwrap()
        .into_cdl()
        .unwrap()
    }

    #[test]
    fn steering_examples() {
        let a = ula_config(2, 0.5, lambda()).unwrap();
        let v = steering_vector(&a, 0.0, PI / 2.0);
        assert!((v[0] - Complex64::new(1.0, 0.0)).norm() < 1e-12);
        assert!((v[1] - Complex64::new(-1.0, 0.0)).norm() < 1e-12);

        let u = ula_config(8, 0.5, lambda()).unwrap();
        for (az, ze) in [(PI / 2.0, 1.1), (0.3, 0.0), (-PI / 2.0, 2.0)] {
            let v = steering_vector(&u, az, ze);
            assert!(v.iter().all(|z| (z - Complex64::new(1.0, 0.0)).norm() < 1e-12));
        }
        for k in 0..10 {
            let v = steering_vector(&u, 0.37 * k as f64, 0.29 * k as f64);
            assert!(v.iter().all(|z| (z.norm() - 1.0).abs() < 1e-14));
        }
    }

    #[test]
    fn ula_geometry() {
        let one = ula_config(1, 0.5, lambda()).unwrap();
        assert_eq!(one.element_positions, vec![[0.0, 0.0, 0.0]]);
        let a = ula_config(16, 0.5, lambda()).unwrap();
        for (i, p) in a.element_positions.iter().enumerate() {
            assert_eq!(p[0], i as f64 * 0.5 * lambda());
        }
        assert!((a.element_positions[1][0] - a.element_positions[0][0] - lambda() / 2.0).abs() < 1e-18);
        assert!(ula_config(0, 0.5, lambda()).is_err());
    }

    #[test]
    fn zero_spread_puts_rays_on_the_mean() {
        let p = one_cluster(0.0, 20);
        for mode in [RayMode::IidLaplacian, RayMode::FixedOffsets] {
            let set = draw_ray_angles(&p.clusters[0], &p.spreads, 20, mode, RngStream::new(1, 1)).unwrap();
            assert_eq!(set.rays.len(), 20);
            for r in &set.rays {
                assert_eq!(r.aod, p.clusters[0].aod);
                assert_eq!(r.zoa, p.clusters[0].zoa);
            }
        }
    }

    #[test]
    fn laplacian_rays_are_centred_with_requested_spread() {
        let p = one_cluster(10.0, 100_000);
        let set = draw_ray_angles(&p.clusters[0], &p.spreads, 100_000, RayMode::IidLaplacian, RngStream::new(4, 0)).unwrap();
        let sd = 10f64.to_radians();
        let n = set.rays.len() as f64;
        let mean: f64 = set.rays.iter().map(|r| r.aod).sum::<f64>() / n;
        assert!((mean - p.clusters[0].aod).abs() < 3.0 * sd / n.sqrt());
        let var: f64 = set.rays.iter().map(|r| (r.aoa - p.clusters[0].aoa).powi(2)).sum::<f64>() / n;
        assert!((var.sqrt() / sd - 1.0).abs() < 0.02);
    }

    #[test]
    fn fixed_offsets_have_unit_rms() {
        for m in [20, 7, 1] {
            let o = unit_offsets(m);
            let ms: f64 = o.iter().map(|x| x * x).sum::<f64>() / m as f64;
            let mean: f64 = o.iter().sum::<f64>() / m as f64;
            assert!(mean.abs() < 1e-12);
            if m == 20 {
                assert!((ms - 1.0).abs() < 2e-3);
            }
        }
    }

    #[test]
    fn zenith_is_clipped() {
        let mut p = one_cluster(60.0, 2000);
        p.clusters[0].zod = 0.05;
        let set = draw_ray_angles(&p.clusters[0], &p.spreads, 2000, RayMode::IidLaplacian, RngStream::new(2, 2)).unwrap();
        assert!(set.rays.iter().all(|r| (0.0..=PI).contains(&r.zod) && (0.0..=PI).contains(&r.zoa)));
    }

    #[test]
    fn rank_one_channel_has_constant_norm() {
        let p = one_cluster(0.0, 1);
        let tx = ula_config(4, 0.5, lambda()).unwrap();
        let rx = ula_config(2, 0.5, lambda()).unwrap();
        let ds = generate_cdl_dataset(&p, &tx, &rx, 200, 3, CdlOptions::default()).unwrap();
        let n0: f64 = ds.sample(0).iter().map(|z| z.norm_sqr()).sum::<f64>();
        assert!((n0 - 8.0).abs() < 1e-9);
        let mut phases = Vec::new();
        for s in ds.iter() {
            let n: f64 = s.iter().map(|z| z.norm_sqr()).sum();
            assert!((n - n0).abs() < 1e-9);
            phases.push(s[0].arg());
        }
        let mean_phasor: Complex64 = phases.iter().map(|&a| Complex64::from_polar(1.0, a)).sum::<Complex64>() / 200.0;
        assert!(mean_phasor.norm() < 0.25);
    }

    #[test]
    fn rx_major_vectorization() {
        let p = one_cluster(0.0, 1);
        let tx = ula_config(3, 0.5, lambda()).unwrap();
        let rx = ula_config(2, 0.7, lambda()).unwrap();
        let ds = generate_cdl_dataset(&p, &tx, &rx, 1, 9, CdlOptions::default()).unwrap();
        let c = &p.clusters[0];
        let a_rx = steering_vector(&rx, c.aoa, c.zoa);
        let a_tx = steering_vector(&tx, c.aod, c.zod);
        let h = ds.sample(0);
        let rho = h[0] / (a_rx[0] * a_tx[0]);
        for r in 0..2 {
            for t in 0..3 {
                assert!((h[r * 3 + t] - rho * a_rx[r] * a_tx[t]).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn mc_covariance_trace_and_degenerate_case() {
        let tx = ula_config(4, 0.5, lambda()).unwrap();
        let rx = ula_config(3, 0.5, lambda()).unwrap();
        let p = bundled("cdl-c").unwrap().into_cdl().unwrap();
        let c = mc_cdl_covariance(&p, &tx, &rx, 20, 1, RayMode::IidLaplacian).unwrap();
        assert!((c.covariance.trace() - 12.0).abs() < 1e-9);

        let one = one_cluster(0.0, 20);
        let c = mc_cdl_covariance(&one, &tx, &rx, 5, 1, RayMode::IidLaplacian).unwrap();
        let cl = &one.clusters[0];
        let v = steering_vector(&rx, cl.aoa, cl.zoa).kronecker(&steering_vector(&tx, cl.aod, cl.zod));
        let expect = &v * v.adjoint();
        assert!(frobenius(&(c.covariance.as_matrix() - expect)) < 1e-10);
        let eig = c.covariance.eigen();
        assert!(eig.values[1] < 1e-10 * eig.values[0]);
    }

    #[test]
    fn los_profile_trace_includes_los_power() {
        let tx = ula_config(4, 0.5, lambda()).unwrap();
        let rx = ula_config(2, 0.5, lambda()).unwrap();
        let p = bundled("cdl-d").unwrap().into_cdl().unwrap();
        let c = mc_cdl_covariance(&p, &tx, &rx, 3, 8, RayMode::FixedOffsets).unwrap();
        assert!((c.covariance.trace() - 8.0).abs() < 1e-9);
    }

    #[test]
    fn single_draw_matches_frozen_instance() {
        let tx = ula_config(4, 0.5, lambda()).unwrap();
        let rx = ula_config(2, 0.5, lambda()).unwrap();
        let p = bundled("cdl-b").unwrap().into_cdl().unwrap();
        let c = mc_cdl_covariance(&p, &tx, &rx, 1, 5, RayMode::IidLaplacian).unwrap();
        let inst = CdlInstance::draw(&p, &tx, &rx, RayMode::IidLaplacian, angle_stream(5, 0)).unwrap();
        assert!(frobenius(&(c.covariance.as_matrix() - inst.covariance().as_matrix())) < 1e-12);
    }

    #[test]
    fn redraw_changes_the_channel_statistics() {
        let tx = ula_config(2, 0.5, lambda()).unwrap();
        let rx = ula_config(2, 0.5, lambda()).unwrap();
        let p = bundled("cdl-a").unwrap().into_cdl().unwrap();
        let frozen = generate_cdl_dataset(&p, &tx, &rx, 4, 5, CdlOptions::default()).unwrap();
        let opts = CdlOptions {
            redraw_angles: true,
            ..Default::default()
        };
        let redrawn = generate_cdl_dataset(&p, &tx, &rx, 4, 5, opts).unwrap();
        assert_ne!(frozen.as_slice(), redrawn.as_slice());
        assert_eq!(redrawn.as_slice(), generate_cdl_dataset(&p, &tx, &rx, 4, 5, opts).unwrap().as_slice());
    }
}
