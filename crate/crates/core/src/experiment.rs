//! Batch experiments driven by a JSON configuration: PCA compression sweeps,
//! LMMSE estimation sweeps and Gaussian-generation comparisons.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::baselines::{
    analytic_mmse, gaussian_generate, nmse, noisy_observations, normalize_dataset, pca_fit, pca_roundtrip,
    sample_mean_cov, snr_to_noise_var, CovarianceModel, LmmseEstimator,
};
use crate::cdl::{generate_cdl_dataset, ula_config, wavelength_for, ArrayConfig, CdlOptions, RayMode};
use crate::dataset::ChannelDataset;
use crate::diagnostics::{empirical_cdf, fmt17, gaussianity_report_with, spectral_efficiencies, GaussianityReport, ReportOptions};
use crate::error::{Error, Result};
use crate::profiles::{resolve, scale_delays, LinkProfile, Profile};
use crate::stochastics::RngStream;
use crate::tdl::{generate_tdl_dataset, GridConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Compression,
    Estimation,
    Generation,
}

/// OFDM grid in the units used on the command line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub subcarriers: usize,
    pub symbols: usize,
    pub scs_khz: f64,
    /// Duration of all `symbols` together.
    pub duration_ms: f64,
    pub doppler_hz: f64,
    /// Falls back to the profile's nominal delay spread when absent.
    #[serde(default)]
    pub delay_spread_ns: Option<f64>,
    #[serde(default)]
    pub los_doppler_fraction: Option<f64>,
}

impl GridSpec {
    pub fn grid(&self) -> Result<GridConfig> {
        if self.symbols == 0 {
            return Err(Error::Argument("symbols must be positive".into()));
        }
        GridConfig::new(
            self.subcarriers,
            self.symbols,
            self.scs_khz * 1e3,
            self.duration_ms * 1e-3 / self.symbols as f64,
            self.doppler_hz,
        )
    }

    /// Delay-scales the profile and applies the LOS Doppler override.
    pub fn scaled_profile(&self, profile: &LinkProfile) -> Result<LinkProfile> {
        let ds = match (self.delay_spread_ns, profile.nominal_delay_spread) {
            (Some(ns), _) => ns * 1e-9,
            (None, Some(s)) => s,
            (None, None) => {
                return Err(Error::Argument(format!(
                    "profile '{}' has no nominal delay spread; give delay_spread_ns",
                    profile.name
                )))
            }
        };
        let mut p = scale_delays(profile, ds)?;
        if let Some(f) = self.los_doppler_fraction {
            if !(-1.0..=1.0).contains(&f) {
                return Err(Error::Argument("LOS Doppler fraction must lie in [-1, 1]".into()));
            }
            p.los_doppler_fraction = f;
        }
        Ok(p)
    }
}

fn default_spacing() -> f64 {
    0.5
}

/// Transmit and receive ULAs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArraySpec {
    pub tx: usize,
    pub rx: usize,
    pub fc_ghz: f64,
    #[serde(default = "default_spacing")]
    pub spacing_wavelengths: f64,
    #[serde(default)]
    pub ray_mode: RayMode,
    #[serde(default)]
    pub redraw_angles: bool,
}

impl ArraySpec {
    pub fn arrays(&self) -> Result<(ArrayConfig, ArrayConfig)> {
        if !(self.fc_ghz > 0.0) {
            return Err(Error::Argument("carrier frequency must be positive".into()));
        }
        let lambda = wavelength_for(self.fc_ghz * 1e9);
        Ok((
            ula_config(self.tx, self.spacing_wavelengths, lambda)?,
            ula_config(self.rx, self.spacing_wavelengths, lambda)?,
        ))
    }

    pub fn options(&self) -> CdlOptions {
        CdlOptions {
            ray_mode: self.ray_mode,
            redraw_angles: self.redraw_angles,
        }
    }
}

fn default_train_count() -> usize {
    60_000
}

fn default_validation_count() -> usize {
    10_000
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    /// Bundled profile name or path to a profile document.
    #[serde(default)]
    pub profile: Option<String>,
    #[serde(default)]
    pub grid: Option<GridSpec>,
    #[serde(default)]
    pub arrays: Option<ArraySpec>,
    /// Pre-generated CHDS datasets used instead of a profile.
    #[serde(default)]
    pub train_file: Option<PathBuf>,
    #[serde(default)]
    pub validation_file: Option<PathBuf>,
    /// Real latent sizes swept by the compression experiment.
    #[serde(default)]
    pub latent_sizes: Vec<usize>,
    #[serde(default)]
    pub snr_db: Vec<f64>,
    #[serde(default = "default_train_count")]
    pub train_count: usize,
    #[serde(default = "default_validation_count")]
    pub validation_count: usize,
    #[serde(default)]
    pub seed: u64,
    pub output_dir: PathBuf,
    /// Scale both sets so the training mean square norm equals the dimension.
    #[serde(default = "default_true")]
    pub normalize: bool,
    /// Subtract the sample mean from the fitted second moment.
    #[serde(default)]
    pub centered: bool,
    #[serde(default)]
    pub report: ReportOptions,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let c: Self = serde_json::from_str(text)?;
        c.validate()?;
        Ok(c)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        match self.experiment {
            ExperimentKind::Compression if self.latent_sizes.is_empty() => {
                return Err(Error::validation("latent_sizes", "compression needs a non-empty sweep"))
            }
            ExperimentKind::Estimation | ExperimentKind::Generation if self.snr_db.is_empty() => {
                return Err(Error::validation("snr_db", "sweep must not be empty"))
            }
            _ => {}
        }
        if self.snr_db.iter().any(|s| !s.is_finite()) {
            return Err(Error::validation("snr_db", "values must be finite"));
        }
        if let Some(n) = self.latent_sizes.iter().find(|&&n| n == 0 || n % 2 != 0) {
            return Err(Error::validation("latent_sizes", format!("{n} is not a positive even number")));
        }
        match (&self.profile, &self.train_file, &self.validation_file) {
            (Some(_), None, None) => {
                if self.train_count == 0 || self.validation_count == 0 {
                    return Err(Error::validation("train_count", "counts must be at least 1"));
                }
            }
            (None, Some(_), Some(_)) => {}
            (None, Some(_), None) => {
                return Err(Error::validation("validation_file", "required together with train_file"))
            }
            _ => {
                return Err(Error::validation(
                    "profile",
                    "give either a profile or a train_file/validation_file pair",
                ))
            }
        }
        Ok(())
    }

    fn stream(&self, index: u64) -> RngStream {
        RngStream::new(self.seed, 1000 + index)
    }
}

/// Generates a dataset for a profile: TDL profiles need a grid, CDL profiles arrays.
pub fn generate_for_profile(
    profile: &Profile,
    grid: Option<&GridSpec>,
    arrays: Option<&ArraySpec>,
    count: usize,
    seed: u64,
) -> Result<ChannelDataset> {
    match profile {
        Profile::Tdl(p) => {
            let spec = grid.ok_or_else(|| Error::validation("grid", "TDL profiles need a grid"))?;
            generate_tdl_dataset(&spec.scaled_profile(p)?, &spec.grid()?, count, seed)
        }
        Profile::Cdl(p) => {
            let spec = arrays.ok_or_else(|| Error::validation("arrays", "CDL profiles need arrays"))?;
            let (tx, rx) = spec.arrays()?;
            generate_cdl_dataset(p, &tx, &rx, count, seed, spec.options())
        }
    }
}

/// Training and disjoint validation sets, normalized with the training scale.
pub fn load_datasets(config: &ExperimentConfig) -> Result<(ChannelDataset, ChannelDataset)> {
    config.validate()?;
    let (train, validation) = match (&config.profile, &config.train_file, &config.validation_file) {
        (Some(name), _, _) => {
            let profile = resolve(name)?;
            let total = config.train_count + config.validation_count;
            let all = generate_for_profile(&profile, config.grid.as_ref(), config.arrays.as_ref(), total, config.seed)?;
            all.split_rows(config.train_count)?
        }
        (None, Some(t), Some(v)) => (ChannelDataset::read_chds(t)?, ChannelDataset::read_chds(v)?),
        _ => unreachable!("validated above"),
    };
    if train.dim() != validation.dim() {
        return Err(Error::Argument(format!(
            "training dimension {} differs from validation dimension {}",
            train.dim(),
            validation.dim()
        )));
    }
    if !config.normalize {
        return Ok((train, validation));
    }
    let (train, scale) = normalize_dataset(&train, train.dim() as f64)?;
    Ok((train, validation.scaled(scale)))
}

fn fit(train: &ChannelDataset, centered: bool) -> Result<CovarianceModel> {
    let cov = sample_mean_cov(train)?;
    Ok(if centered { cov.centered() } else { cov })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompressionRow {
    pub n_latent: usize,
    pub pca_nmse: f64,
    pub analytic_nmse: f64,
}

pub fn compression_sweep(
    train: &ChannelDataset,
    validation: &ChannelDataset,
    latent_sizes: &[usize],
    centered: bool,
) -> Result<Vec<CompressionRow>> {
    let cov = fit(train, centered)?;
    let mut rows = Vec::with_capacity(latent_sizes.len());
    for &nl in latent_sizes {
        let codec = pca_fit(&cov, nl)?;
        let rec = pca_roundtrip(&codec, validation)?;
        rows.push(CompressionRow {
            n_latent: nl,
            pca_nmse: nmse(validation, &rec)?,
            analytic_nmse: codec.analytic_nmse(),
        });
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimationRow {
    pub snr_db: f64,
    pub lmmse_nmse: f64,
    pub analytic_mmse: f64,
}

/// LMMSE with `A = I` on noisy validation observations; the noise for sweep
/// point `k` comes from `stream.child(k)`.
pub fn estimation_sweep(
    train: &ChannelDataset,
    validation: &ChannelDataset,
    snr_db: &[f64],
    centered: bool,
    stream: RngStream,
) -> Result<Vec<EstimationRow>> {
    let cov = fit(train, centered)?;
    let a = DMatrix::<Complex64>::identity(train.dim(), train.dim());
    let mut rows = Vec::with_capacity(snr_db.len());
    for (k, &snr) in snr_db.iter().enumerate() {
        let s2 = snr_to_noise_var(snr);
        let est = LmmseEstimator::fit(&cov, &a, s2)?;
        let y = noisy_observations(validation, &a, s2, stream.child(k as u64).key())?;
        let h = est.estimate_dataset(&y)?;
        rows.push(EstimationRow {
            snr_db: snr,
            lmmse_nmse: nmse(validation, &h)?,
            analytic_mmse: analytic_mmse(&cov, &a, s2)?,
        });
    }
    Ok(rows)
}

#[derive(Debug, Clone)]
pub struct GenerationResult {
    pub snr_db: f64,
    pub se_ground_truth: Vec<f64>,
    pub se_gaussian: Vec<f64>,
    pub report: GaussianityReport,
}

/// Spectral-efficiency samples of the validation set and of a same-size
/// Gaussian surrogate fitted on the training set, plus a Gaussianity report
/// on the validation set.
pub fn generation_compare(
    train: &ChannelDataset,
    validation: &ChannelDataset,
    snr_db: f64,
    centered: bool,
    options: &ReportOptions,
    seed: u64,
) -> Result<GenerationResult> {
    let cov = fit(train, centered)?;
    let surrogate = gaussian_generate(&cov, validation.count(), seed)?;
    let s2 = snr_to_noise_var(snr_db);
    Ok(GenerationResult {
        snr_db,
        se_ground_truth: spectral_efficiencies(validation, s2)?,
        se_gaussian: spectral_efficiencies(&surrogate, s2)?,
        report: gaussianity_report_with(validation, s2, seed, options)?,
    })
}

/// Renders a float for file names, e.g. `-7.5` → `m7p5`.
fn tag(x: f64) -> String {
    format!("{x}").replace('-', "m").replace('.', "p")
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Runs the configured experiment and returns the files written.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    let (train, validation) = load_datasets(config)?;
    let dir = &config.output_dir;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();
    match config.experiment {
        ExperimentKind::Compression => {
            let rows = compression_sweep(&train, &validation, &config.latent_sizes, config.centered)?;
            let mut s = String::from("n_latent,pca_nmse,analytic_nmse\n");
            for r in rows {
                let _ = writeln!(s, "{},{},{}", r.n_latent, fmt17(r.pca_nmse), fmt17(r.analytic_nmse));
            }
            let path = dir.join("compression.csv");
            write_text(&path, &s)?;
            written.push(path);
        }
        ExperimentKind::Estimation => {
            let rows = estimation_sweep(&train, &validation, &config.snr_db, config.centered, config.stream(0))?;
            let mut s = String::from("snr_db,lmmse_nmse,analytic_mmse\n");
            for r in rows {
                let _ = writeln!(s, "{},{},{}", fmt17(r.snr_db), fmt17(r.lmmse_nmse), fmt17(r.analytic_mmse));
            }
            let path = dir.join("estimation.csv");
            write_text(&path, &s)?;
            written.push(path);
        }
        ExperimentKind::Generation => {
            for (k, &snr) in config.snr_db.iter().enumerate() {
                let seed = config.stream(1).child(k as u64).key();
                let res = generation_compare(&train, &validation, snr, config.centered, &config.report, seed)?;
                let t = tag(snr);
                let files = [
                    (format!("se_cdf_ground_truth_{t}db.csv"), empirical_cdf(&res.se_ground_truth)?.to_csv()),
                    (format!("se_cdf_gaussian_{t}db.csv"), empirical_cdf(&res.se_gaussian)?.to_csv()),
                    (format!("gaussianity_report_{t}db.json"), res.report.to_json()? + "\n"),
                ];
                for (name, text) in files {
                    let path = dir.join(name);
                    write_text(&path, &text)?;
                    written.push(path);
                }
            }
        }
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tdl_config(kind: &str, extra: &str) -> String {
        format!(
            r#"{{"experiment":"{kind}","profile":"tdl-a",
                "grid":{{"subcarriers":12,"symbols":4,"scs_khz":60,"duration_ms":0.25,"doppler_hz":800,"delay_spread_ns":30}},
                "train_count":3000,"validation_count":2000,"seed":3,"output_dir":"unused"{extra}}}"#
        )
    }

    #[test]
    fn config_validation() {
        assert!(ExperimentConfig::from_json(&tdl_config("compression", "")).is_err());
        assert!(ExperimentConfig::from_json(&tdl_config("compression", r#","latent_sizes":[3]"#)).is_err());
        assert!(ExperimentConfig::from_json(&tdl_config("estimation", r#","snr_db":[]"#)).is_err());
        assert!(ExperimentConfig::from_json(&tdl_config("estimation", r#","snr_db":[0],"bogus":1"#)).is_err());
        let c = ExperimentConfig::from_json(&tdl_config("compression", r#","latent_sizes":[4,8]"#)).unwrap();
        assert!(c.normalize);
        assert_eq!(c.report, ReportOptions::default());
        let no_source = r#"{"experiment":"estimation","snr_db":[1],"output_dir":"x"}"#;
        assert!(matches!(ExperimentConfig::from_json(no_source), Err(Error::Validation { .. })));
    }

    #[test]
    fn split_is_disjoint_and_normalized() {
        let c = ExperimentConfig::from_json(&tdl_config("compression", r#","latent_sizes":[4]"#)).unwrap();
        let (t, v) = load_datasets(&c).unwrap();
        assert_eq!((t.count(), v.count()), (3000, 2000));
        assert!((t.mean_square_norm() - 48.0).abs() < 1e-9);
        assert!((v.mean_square_norm() / 48.0 - 1.0).abs() < 0.1);
        assert_ne!(t.sample(0), v.sample(0));
    }

    #[test]
    fn grid_spec_uses_per_symbol_duration() {
        let g = GridSpec {
            subcarriers: 48,
            symbols: 14,
            scs_khz: 60.0,
            duration_ms: 0.25,
            doppler_hz: 800.0,
            delay_spread_ns: Some(30.0),
            los_doppler_fraction: None,
        };
        let grid = g.grid().unwrap();
        assert_eq!(grid.dim(), 672);
        assert!((grid.symbol_duration - 0.25e-3 / 14.0).abs() < 1e-18);
    }

    #[test]
    fn estimation_analytic_column_is_monotone() {
        let c = ExperimentConfig::from_json(&tdl_config("estimation", r#","snr_db":[-10,0,10,20]"#)).unwrap();
        let (t, v) = load_datasets(&c).unwrap();
        let rows = estimation_sweep(&t, &v, &c.snr_db, false, c.stream(0)).unwrap();
        for w in rows.windows(2) {
            assert!(w[1].analytic_mmse <= w[0].analytic_mmse);
        }
    }

    #[test]
    fn file_tags() {
        assert_eq!(tag(20.0), "20");
        assert_eq!(tag(-7.5), "m7p5");
    }
}
