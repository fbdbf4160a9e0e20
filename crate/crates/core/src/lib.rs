//! Link-level wireless channel simulation with Gaussian reference baselines.
//!
//! Generators for tapped-delay-line (OFDM time/frequency grid) and
//! clustered-delay-line (MIMO spatial) channels, their exact or Monte-Carlo
//! covariances, the optimal linear methods for those covariances (PCA,
//! LMMSE, Gaussian sampling) and diagnostics that measure how far a dataset
//! is from Gaussian.

pub mod baselines;
pub mod cdl;
pub mod cli;
pub mod dataset;
pub mod diagnostics;
pub mod error;
pub mod experiment;
mod linalg;
pub mod profiles;
pub mod stochastics;
pub mod tdl;

pub use baselines::{
    analytic_mmse, gaussian_generate, lmmse_estimate, nmse, noisy_observations, normalize_dataset, pca_fit,
    pca_roundtrip, sample_mean_cov, snr_to_noise_var, CovarianceModel, CovarianceSource, GaussianGenerator,
    LmmseEstimator, PcaCodec,
};
pub use cdl::{
    draw_ray_angles, generate_cdl_dataset, mc_cdl_covariance, steering_vector, ula_config, ArrayConfig, CdlInstance,
    CdlOptions, RayAngleSet, RayAngles, RayMode,
};
pub use dataset::ChannelDataset;
pub use diagnostics::{
    dft_matrix, empirical_cdf, fingerprint_pmf, gaussianity_report, gaussianity_report_with, ks_distance,
    spectral_efficiency, total_variation, Codebook, Ecdf, GaussianityReport, Pmf, ReportOptions, Verdict,
};
pub use error::{Error, Result};
pub use profiles::{bundled, bundled_names, load_profile, load_profile_file, resolve, scale_delays, CdlProfile, LinkProfile, Profile};
pub use stochastics::{
    bessel_j0, jakes_covariance, psd_factorize, sample_complex_gaussian, HermitianEigen, HermitianMatrix, RngStream,
};
pub use tdl::{analytic_tdl_covariance, frequency_steering, generate_tdl_dataset, GridConfig};
