//! Command-line front end.
//!
//! Exit codes: 0 success, 2 usage or configuration error, 3 I/O failure,
//! 4 numerical failure.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;

use crate::baselines::normalize_dataset;
use crate::cdl::RayMode;
use crate::dataset::{parse_payload, payload_bytes, ChannelDataset};
use crate::diagnostics::{empirical_cdf, fmt17, gaussianity_report_with, spectral_efficiencies, ReportOptions};
use crate::error::{Error, Result};
use crate::experiment::{generate_for_profile, run_experiment, ArraySpec, ExperimentConfig, GridSpec};
use crate::profiles::{bundled, bundled_names, resolve, Profile};
use crate::baselines::snr_to_noise_var;

#[derive(Debug, Parser)]
#[command(name = "chansim", version, about = "Link-level channel simulation and Gaussian baselines")]
pub struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true, env = "CHANSIM_THREADS")]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a tapped-delay-line OFDM dataset.
    GenTdl(GenTdlArgs),
    /// Generate a clustered-delay-line MIMO dataset.
    GenCdl(GenCdlArgs),
    /// Run a compression, estimation or generation experiment from a JSON config.
    Experiment(ExperimentArgs),
    /// Convert external channel data into a dataset file.
    Import(ImportArgs),
    /// Write a dataset file out as CSV or raw floats.
    Export(ExportArgs),
    /// Gaussianity report for a dataset file.
    Report(ReportArgs),
    /// List bundled profiles or print one of them.
    ListProfiles(ListArgs),
}

#[derive(Debug, Args)]
pub struct CommonGen {
    /// Bundled profile name or path to a profile JSON file.
    #[arg(long)]
    pub profile: String,
    #[arg(long)]
    pub count: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// Keep raw powers instead of scaling to mean square norm = dimension.
    #[arg(long)]
    pub no_normalize: bool,
}

#[derive(Debug, Args)]
pub struct GenTdlArgs {
    #[command(flatten)]
    pub common: CommonGen,
    #[arg(long)]
    pub subcarriers: usize,
    #[arg(long)]
    pub symbols: usize,
    #[arg(long)]
    pub scs_khz: f64,
    /// Duration of the whole grid of symbols.
    #[arg(long)]
    pub duration_ms: f64,
    #[arg(long)]
    pub doppler_hz: f64,
    /// Defaults to the profile's nominal delay spread.
    #[arg(long)]
    pub delay_spread_ns: Option<f64>,
    #[arg(long)]
    pub los_doppler_fraction: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RayModeArg {
    IidLaplacian,
    FixedOffsets,
}

impl From<RayModeArg> for RayMode {
    fn from(m: RayModeArg) -> Self {
        match m {
            RayModeArg::IidLaplacian => RayMode::IidLaplacian,
            RayModeArg::FixedOffsets => RayMode::FixedOffsets,
        }
    }
}

#[derive(Debug, Args)]
pub struct GenCdlArgs {
    #[command(flatten)]
    pub common: CommonGen,
    #[arg(long)]
    pub tx: usize,
    #[arg(long)]
    pub rx: usize,
    #[arg(long)]
    pub fc_ghz: f64,
    /// Element spacing in wavelengths.
    #[arg(long, default_value_t = 0.5)]
    pub spacing: f64,
    #[arg(long, value_enum, default_value_t = RayModeArg::IidLaplacian)]
    pub ray_mode: RayModeArg,
    /// Draw new ray angles for every realization.
    #[arg(long)]
    pub redraw_angles: bool,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides `output_dir` from the config.
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DataFormat {
    /// One sample per row: re0,im0,re1,im1,...
    CsvComplex,
    /// Little-endian f64 pairs (re, im), row-major.
    RawInterleavedF64,
}

#[derive(Debug, Args)]
pub struct ImportArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum)]
    pub format: DataFormat,
    #[arg(long)]
    pub dim: usize,
    #[arg(long)]
    pub out: PathBuf,
    /// Scale so that the mean square norm equals the dimension.
    #[arg(long)]
    pub normalize: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum)]
    pub format: DataFormat,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// SNR for the spectral-efficiency comparison, on data normalized to unit power per entry.
    #[arg(long, default_value_t = 20.0)]
    pub snr_db: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 7)]
    pub splits: usize,
    /// Verdict threshold as a multiple of the noise floors.
    #[arg(long, default_value_t = 1.5)]
    pub multiplier: f64,
    /// Write the report here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write the spectral-efficiency CDF of the input as CSV.
    #[arg(long)]
    pub cdf_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ListArgs {
    /// Print the JSON document of this profile.
    #[arg(long)]
    pub show: Option<String>,
}

/// Parses `std::env::args` and runs; returns the process exit code.
pub fn run() -> i32 {
    run_from(std::env::args_os())
}

pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// Runs a parsed command inside a pool sized by `--threads`.
pub fn execute(cli: &Cli) -> Result<()> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Error::Argument("--threads must be positive".into()));
        }
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::Argument(format!("cannot start worker pool: {e}")))?;
    pool.install(|| dispatch(&cli.command))
}

fn dispatch(cmd: &Command) -> Result<()> {
    match cmd {
        Command::GenTdl(a) => cmd_gen_tdl(a),
        Command::GenCdl(a) => cmd_gen_cdl(a),
        Command::Experiment(a) => cmd_experiment(a),
        Command::Import(a) => cmd_import(a),
        Command::Export(a) => cmd_export(a),
        Command::Report(a) => cmd_report(a),
        Command::ListProfiles(a) => cmd_list(a),
    }
}

fn finish_generated(ds: ChannelDataset, common: &CommonGen) -> Result<()> {
    let ds = if common.no_normalize {
        ds
    } else {
        let target = ds.dim() as f64;
        normalize_dataset(&ds, target)?.0.with_provenance("normalized_mean_square", target)
    };
    ds.write_chds(&common.out)?;
    eprintln!("wrote {} samples of dimension {} to {}", ds.count(), ds.dim(), common.out.display());
    Ok(())
}

fn check_count(count: usize) -> Result<()> {
    if count == 0 {
        return Err(Error::Argument("--count must be positive".into()));
    }
    Ok(())
}

pub fn cmd_gen_tdl(a: &GenTdlArgs) -> Result<()> {
    check_count(a.common.count)?;
    let profile = resolve(&a.common.profile)?;
    if !matches!(profile, Profile::Tdl(_)) {
        return Err(Error::Argument(format!("'{}' is not a TDL profile", a.common.profile)));
    }
    let grid = GridSpec {
        subcarriers: a.subcarriers,
        symbols: a.symbols,
        scs_khz: a.scs_khz,
        duration_ms: a.duration_ms,
        doppler_hz: a.doppler_hz,
        delay_spread_ns: a.delay_spread_ns,
        los_doppler_fraction: a.los_doppler_fraction,
    };
    let ds = generate_for_profile(&profile, Some(&grid), None, a.common.count, a.common.seed)?;
    finish_generated(ds, &a.common)
}

pub fn cmd_gen_cdl(a: &GenCdlArgs) -> Result<()> {
    check_count(a.common.count)?;
    let profile = resolve(&a.common.profile)?;
    if !matches!(profile, Profile::Cdl(_)) {
        return Err(Error::Argument(format!("'{}' is not a CDL profile", a.common.profile)));
    }
    let arrays = ArraySpec {
        tx: a.tx,
        rx: a.rx,
        fc_ghz: a.fc_ghz,
        spacing_wavelengths: a.spacing,
        ray_mode: a.ray_mode.into(),
        redraw_angles: a.redraw_angles,
    };
    let ds = generate_for_profile(&profile, None, Some(&arrays), a.common.count, a.common.seed)?;
    finish_generated(ds, &a.common)
}

pub fn cmd_experiment(a: &ExperimentArgs) -> Result<()> {
    let mut config = ExperimentConfig::from_file(&a.config)?;
    if let Some(dir) = &a.output_dir {
        config.output_dir = dir.clone();
    }
    for path in run_experiment(&config)? {
        println!("{}", path.display());
    }
    Ok(())
}

/// Parses `re,im,re,im,...` rows; blank lines and `#` comments are skipped.
pub fn parse_csv_complex(text: &str, path: &Path) -> Result<Vec<Complex64>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut out = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: e.position().map(|p| p.line() as usize).unwrap_or(0),
            reason: e.to_string(),
        })?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        let parse_err = |reason: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            reason,
        };
        if rec.len() == 1 && rec[0].is_empty() {
            continue;
        }
        if rec.len() % 2 != 0 {
            return Err(parse_err(format!("{} values do not form (re, im) pairs", rec.len())));
        }
        let mut vals = Vec::with_capacity(rec.len());
        for field in rec.iter() {
            let v: f64 = field
                .parse()
                .map_err(|_| parse_err(format!("`{field}` is not a number")))?;
            if !v.is_finite() {
                return Err(parse_err(format!("non-finite value `{field}`")));
            }
            vals.push(v);
        }
        out.extend(vals.chunks_exact(2).map(|p| Complex64::new(p[0], p[1])));
    }
    Ok(out)
}

pub fn to_csv_complex(ds: &ChannelDataset) -> String {
    let mut s = String::new();
    for h in ds.iter() {
        let row: Vec<String> = h.iter().flat_map(|z| [fmt17(z.re), fmt17(z.im)]).collect();
        let _ = writeln!(s, "{}", row.join(","));
    }
    s
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::io(path, e))
}

pub fn import_dataset(path: &Path, format: DataFormat, dim: usize, seed: u64) -> Result<ChannelDataset> {
    if dim == 0 {
        return Err(Error::Argument("--dim must be positive".into()));
    }
    let values = match format {
        DataFormat::CsvComplex => {
            let bytes = read_bytes(path)?;
            let text = String::from_utf8(bytes).map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                line: 0,
                reason: format!("not UTF-8: {e}"),
            })?;
            parse_csv_complex(&text, path)?
        }
        DataFormat::RawInterleavedF64 => {
            let bytes = read_bytes(path)?;
            if bytes.len() % 16 != 0 {
                return Err(Error::Format(format!(
                    "{}: {} bytes is not a whole number of complex f64 values",
                    path.display(),
                    bytes.len()
                )));
            }
            parse_payload(&bytes)?
        }
    };
    if values.len() % dim != 0 {
        return Err(Error::Argument(format!(
            "{} complex values do not divide into samples of dimension {dim}",
            values.len()
        )));
    }
    if values.is_empty() {
        return Err(Error::Argument(format!("{} contains no values", path.display())));
    }
    let fmt = match format {
        DataFormat::CsvComplex => "csv-complex",
        DataFormat::RawInterleavedF64 => "raw-interleaved-f64",
    };
    Ok(ChannelDataset::new(dim, values, seed)?
        .with_provenance("generator", "import")
        .with_provenance("source", path.display())
        .with_provenance("source_format", fmt))
}

pub fn cmd_import(a: &ImportArgs) -> Result<()> {
    let ds = import_dataset(&a.input, a.format, a.dim, a.seed)?;
    let ds = if a.normalize {
        let target = ds.dim() as f64;
        normalize_dataset(&ds, target)?.0.with_provenance("normalized_mean_square", target)
    } else {
        ds
    };
    ds.write_chds(&a.out)?;
    eprintln!("imported {} samples of dimension {} to {}", ds.count(), ds.dim(), a.out.display());
    Ok(())
}

pub fn cmd_export(a: &ExportArgs) -> Result<()> {
    let ds = ChannelDataset::read_chds(&a.input)?;
    let bytes = match a.format {
        DataFormat::CsvComplex => to_csv_complex(&ds).into_bytes(),
        DataFormat::RawInterleavedF64 => payload_bytes(ds.as_slice()),
    };
    std::fs::write(&a.out, bytes).map_err(|e| Error::io(&a.out, e))
}

pub fn cmd_report(a: &ReportArgs) -> Result<()> {
    let ds = ChannelDataset::read_chds(&a.input)?;
    let options = ReportOptions {
        splits: a.splits,
        multiplier: a.multiplier,
        ..ReportOptions::default()
    };
    let s2 = snr_to_noise_var(a.snr_db);
    let report = gaussianity_report_with(&ds, s2, a.seed, &options)?;
    let json = report.to_json()? + "\n";
    match &a.out {
        Some(p) => std::fs::write(p, &json).map_err(|e| Error::io(p, e))?,
        None => print!("{json}"),
    }
    if let Some(p) = &a.cdf_out {
        let csv = empirical_cdf(&spectral_efficiencies(&ds, s2)?)?.to_csv();
        std::fs::write(p, csv).map_err(|e| Error::io(p, e))?;
    }
    Ok(())
}

pub fn cmd_list(a: &ListArgs) -> Result<()> {
    match &a.show {
        Some(name) => {
            let p = bundled(name)?;
            println!("{}", serde_json::to_string_pretty(&p.to_json())?);
        }
        None => {
            for name in bundled_names() {
                let kind = match bundled(name)? {
                    Profile::Tdl(_) => "tdl",
                    Profile::Cdl(_) => "cdl",
                };
                println!("{name}\t{kind}");
            }
        }
    }
    Ok(())
}
