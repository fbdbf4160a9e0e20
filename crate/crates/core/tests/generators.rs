mod common;

use std::f64::consts::PI;

use chansim::{
    analytic_tdl_covariance, bundled, generate_cdl_dataset, generate_tdl_dataset, mc_cdl_covariance, sample_mean_cov,
    scale_delays, ula_config, CdlOptions, GridConfig, RayMode,
};
use common::{j0_oracle, rel_frobenius};
use nalgebra::DMatrix;
use num_complex::Complex64;

fn grid() -> GridConfig {
    GridConfig::new(12, 4, 60e3, 0.25e-3 / 14.0, 800.0).unwrap()
}

fn tdl(name: &str) -> chansim::LinkProfile {
    scale_delays(&bundled(name).unwrap().into_tdl().unwrap(), 30e-9).unwrap()
}

fn mean_abs_max(ds: &chansim::ChannelDataset) -> f64 {
    let m = sample_mean_cov(ds).unwrap().mean;
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

#[test]
fn tdl_analytic_covariance_matches_elementwise_formula() {
    let p = tdl("tdl-c");
    let g = grid();
    let got = analytic_tdl_covariance(&p, &g).unwrap().covariance.into_inner();
    let delays = p.physical_delays().unwrap();
    let powers = p.fading_powers();
    let (nf, nt) = (g.n_subcarriers, g.n_symbols);
    let want = DMatrix::from_fn(nf * nt, nf * nt, |r, c| {
        let (t1, f1) = (r / nf, r % nf);
        let (t2, f2) = (c / nf, c % nf);
        let time = j0_oracle(2.0 * PI * g.max_doppler * g.symbol_duration * (t1 as f64 - t2 as f64));
        let freq: Complex64 = delays
            .iter()
            .zip(&powers)
            .map(|(&tau, &pw)| {
                Complex64::from_polar(pw, -2.0 * PI * g.subcarrier_spacing * (f1 as f64 - f2 as f64) * tau)
            })
            .sum();
        freq * time
    });
    assert!(rel_frobenius(&got, &want) < 1e-10);
}

#[test]
fn nlos_tdl_sample_mean_is_near_zero() {
    let ds = generate_tdl_dataset(&tdl("tdl-a"), &grid(), 20_000, 3).unwrap();
    // Unit power per entry, so the mean estimate has std 1/sqrt(n).
    assert!(mean_abs_max(&ds) < 5.0 / (20_000f64).sqrt());
}

#[test]
fn los_tdl_mean_is_near_zero_because_of_random_phase() {
    let ds = generate_tdl_dataset(&tdl("tdl-d"), &grid(), 20_000, 4).unwrap();
    assert!(mean_abs_max(&ds) < 0.1);
}

#[test]
fn tdl_sample_covariance_approaches_analytic() {
    let p = tdl("tdl-b");
    let exact = analytic_tdl_covariance(&p, &grid()).unwrap().covariance.into_inner();
    let ds = generate_tdl_dataset(&p, &grid(), 40_000, 5).unwrap();
    let err = rel_frobenius(sample_mean_cov(&ds).unwrap().covariance.as_matrix(), &exact);
    assert!(err < 0.05, "relative error {err}");
}

fn arrays() -> (chansim::ArrayConfig, chansim::ArrayConfig) {
    let lambda = chansim::cdl::wavelength_for(3.5e9);
    (ula_config(4, 0.5, lambda).unwrap(), ula_config(4, 0.5, lambda).unwrap())
}

#[test]
fn cdl_sample_covariance_approaches_frozen_instance_covariance() {
    let (tx, rx) = arrays();
    let p = bundled("cdl-b").unwrap().into_cdl().unwrap();
    let exact = mc_cdl_covariance(&p, &tx, &rx, 1, 8, RayMode::IidLaplacian).unwrap();
    let ds = generate_cdl_dataset(&p, &tx, &rx, 40_000, 8, CdlOptions::default()).unwrap();
    let err = rel_frobenius(
        sample_mean_cov(&ds).unwrap().covariance.as_matrix(),
        exact.covariance.as_matrix(),
    );
    assert!(err < 0.05, "relative error {err}");
    assert!(mean_abs_max(&ds) < 0.05);
}

#[test]
fn redrawn_angles_approach_monte_carlo_average() {
    let (tx, rx) = arrays();
    let p = bundled("cdl-a").unwrap().into_cdl().unwrap();
    let mc = mc_cdl_covariance(&p, &tx, &rx, 400, 9, RayMode::IidLaplacian).unwrap();
    let opts = CdlOptions {
        redraw_angles: true,
        ..CdlOptions::default()
    };
    let ds = generate_cdl_dataset(&p, &tx, &rx, 20_000, 10, opts).unwrap();
    let err = rel_frobenius(sample_mean_cov(&ds).unwrap().covariance.as_matrix(), mc.covariance.as_matrix());
    assert!(err < 0.08, "relative error {err}");
}

#[test]
fn monte_carlo_covariance_trace_is_dimension() {
    let (tx, rx) = arrays();
    for name in ["cdl-a", "cdl-c", "cdl-e"] {
        let p = bundled(name).unwrap().into_cdl().unwrap();
        let mc = mc_cdl_covariance(&p, &tx, &rx, 20, 1, RayMode::FixedOffsets).unwrap();
        assert!((mc.covariance.trace() - 16.0).abs() < 1e-9, "{name}");
    }
}

#[test]
fn distinct_azimuths_give_non_parallel_steering() {
    let (_, rx) = arrays();
    let a = chansim::steering_vector(&rx, 0.3, PI / 2.0);
    let b = chansim::steering_vector(&rx, 1.1, PI / 2.0);
    let inner = a.dotc(&b).norm();
    assert!(inner < a.norm() * b.norm() - 1e-3);
}

fn batch_tv_statistics(p: &chansim::CdlProfile, seed: u64) -> (f64, f64, f64, f64) {
    use chansim::{fingerprint_pmf, gaussian_generate, ks_distance, total_variation, Codebook};
    let lambda = chansim::cdl::wavelength_for(3.5e9);
    let tx = ula_config(1, 0.5, lambda).unwrap();
    let rx = ula_config(16, 0.5, lambda).unwrap();
    let batch = 10_000;
    let pairs = 3;
    let all = generate_cdl_dataset(p, &tx, &rx, (2 * pairs + 1) * batch, seed, CdlOptions::default()).unwrap();
    let part = |i: usize| all.select(&(i * batch..(i + 1) * batch).collect::<Vec<_>>());
    let exact = mc_cdl_covariance(p, &tx, &rx, 1, seed, RayMode::IidLaplacian).unwrap();
    let gauss = gaussian_generate(&exact, batch, seed + 1).unwrap();
    let s2 = 0.01;
    let fp = |d: &chansim::ChannelDataset| fingerprint_pmf(d, &Codebook::Dft(16)).unwrap();
    let se = |d: &chansim::ChannelDataset| chansim::diagnostics::spectral_efficiencies(d, s2).unwrap();
    let gt = part(0);
    let tv = total_variation(&fp(&gt), &fp(&gauss)).unwrap();
    let ks = ks_distance(&se(&gt), &se(&gauss)).unwrap();
    let mut tv_f = Vec::new();
    let mut ks_f = Vec::new();
    for k in 0..pairs {
        let (a, b) = (part(2 * k + 1), part(2 * k + 2));
        tv_f.push(total_variation(&fp(&a), &fp(&b)).unwrap());
        ks_f.push(ks_distance(&se(&a), &se(&b)).unwrap());
    }
    tv_f.sort_by(f64::total_cmp);
    ks_f.sort_by(f64::total_cmp);
    (tv, tv_f[pairs / 2], ks, ks_f[pairs / 2])
}

#[test]
fn many_rays_look_gaussian_against_the_exact_covariance() {
    let p = bundled("cdl-a").unwrap().into_cdl().unwrap();
    let (tv, tv_floor, _, _) = batch_tv_statistics(&p, 21);
    assert!(tv <= 1.5 * tv_floor, "tv {tv} floor {tv_floor}");
}

#[test]
fn single_ray_single_cluster_is_detected() {
    let p = chansim::load_profile(
        r#"{"kind":"cdl","name":"one-ray","k_factor_db":null,"rays_per_cluster":1,
            "spreads_deg":{"asd":0,"asa":0,"zsd":0,"zsa":0},
            "clusters":[{"power":1,"aod_deg":30,"aoa_deg":-40,"zod_deg":80,"zoa_deg":100}]}"#,
    )
    .unwrap()
    .into_cdl()
    .unwrap();
    let (tv, tv_floor, ks, ks_floor) = batch_tv_statistics(&p, 22);
    // Rank one: every sample, Gaussian or not, lands on the same codeword.
    assert_eq!((tv, tv_floor), (0.0, 0.0));
    // Constant norm against a Rayleigh norm.
    assert!(ks >= 3.0 * ks_floor, "ks {ks} floor {ks_floor}");
}
