//! Command-line definitions and the config-file merge.

use std::path::{Path, PathBuf};

use chirpsep::separation::Method;
use chirpsep::{make_grids, AnalysisConfig, ChirpRateGrid, ComponentCount, FrequencyGrid, ThresholdPolicy};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::error::{usage, CliError};

#[derive(Debug, Parser)]
#[command(name = "chirpsep", version, about = "Separate multicomponent signals with the chirplet transform")]
pub struct Cli {
    /// TOML file with analysis defaults; command-line flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads for the parallel stages.
    #[arg(long, global = true, env = "CHIRPSEP_THREADS")]
    pub threads: Option<usize>,
    /// Repeat for more log output.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic test signal and its ground truth.
    Generate(GenerateArgs),
    /// Compute the chirplet transform cube of a signal.
    Transform(TransformArgs),
    /// Filter-match a transform cube.
    Match(MatchArgs),
    /// Extract and link ridges.
    Ridges(RidgesArgs),
    /// Recover the components of a signal.
    Separate(SeparateArgs),
    /// Sweep SNR and seeds on a synthetic signal and report RMSE.
    Benchmark(BenchmarkArgs),
    /// Process samples from standard input as they arrive.
    Stream(StreamArgs),
    /// Write a magnitude slice of a cube as a CSV grid.
    ExportPlot(ExportPlotArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Generator {
    /// Two linear chirps (defaults c1=15/N, r1=43/N², c2=43/N, r2=−20/N² in samples).
    TwoLfm,
    /// cos(t²+t+cos t) + cos 8t.
    TwoComponent,
    /// Two FM components plus a slow trend.
    STrend,
    /// One sinusoidal FM component.
    SinusoidalFm,
    /// Two sinusoidal FM components with opposite modulation phase.
    MicroDoppler,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct GenerateArgs {
    #[arg(value_enum)]
    pub generator: Generator,
    /// Sample rate in Hz.
    #[arg(long)]
    pub fs: f64,
    /// Number of samples.
    #[arg(long)]
    pub n: usize,
    /// Signal file (.csv or .bin).
    #[arg(long, short)]
    pub out: PathBuf,
    /// Clean component waveforms as CSV.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// Ground-truth IF and chirp-rate curves as CSV.
    #[arg(long)]
    pub truth_tracks: Option<PathBuf>,
    /// Add white Gaussian noise at this SNR in dB.
    #[arg(long)]
    pub snr: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Chirp parameters are given in bins: c in units of fs/n, r in fs²/n².
    #[arg(long)]
    pub bins: bool,
    #[arg(long, allow_hyphen_values = true)]
    pub c1: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub r1: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub c2: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub r2: Option<f64>,
    /// Carrier frequency of the FM generators, Hz.
    #[arg(long)]
    pub carrier: Option<f64>,
    /// Modulation depth in radians.
    #[arg(long)]
    pub depth: Option<f64>,
    /// Modulation rate, Hz.
    #[arg(long)]
    pub mod_rate: Option<f64>,
    #[arg(long)]
    pub amp: Option<f64>,
}

/// Analysis parameters shared by the processing commands. The same keys,
/// in snake_case, are accepted in the config file.
#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisArgs {
    /// Window scale in seconds.
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Frame hop in samples.
    #[arg(long)]
    pub hop: Option<usize>,
    /// FFT length in samples; sets the grids.
    #[arg(long)]
    pub frame_len: Option<usize>,
    /// Window truncation in units of sigma.
    #[arg(long)]
    pub truncation: Option<f64>,
    /// Matched-filter half width in frames.
    #[arg(long)]
    pub b: Option<usize>,
    /// Chirp-rate weight in the track distance, seconds.
    #[arg(long)]
    pub rho: Option<f64>,
    /// Track association gate, Hz.
    #[arg(long)]
    pub delta: Option<f64>,
    /// Threshold as a fraction of each frame's maximum.
    #[arg(long, group = "thr")]
    pub threshold: Option<f64>,
    /// Absolute threshold mu/2.
    #[arg(long, group = "thr")]
    pub threshold_abs: Option<f64>,
    /// Threshold as a fraction of the global maximum.
    #[arg(long, group = "thr")]
    pub threshold_global: Option<f64>,
    /// Maximum number of components, or "auto".
    #[arg(long)]
    #[serde(default, deserialize_with = "count_or_word")]
    pub components: Option<String>,
    /// Track the trend at zero frequency and chirp rate.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub trend: Option<bool>,
    #[arg(long)]
    pub min_cluster: Option<usize>,
    /// Split clusters with several well-separated peaks.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub split_peaks: Option<bool>,
    #[arg(long)]
    pub peak_valley_ratio: Option<f64>,
    #[arg(long)]
    pub min_track_len: Option<usize>,
    #[arg(long)]
    pub max_gap: Option<usize>,
    /// Running-median half window in frames.
    #[arg(long)]
    pub smooth: Option<usize>,
    /// Chirp-rate grid step in Hz/s (custom grid, needs --chirp-max).
    #[arg(long)]
    pub chirp_step: Option<f64>,
    /// Chirp-rate grid half range in Hz/s.
    #[arg(long)]
    pub chirp_max: Option<f64>,
    /// Fit ridge positions off the grid before linking.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub refine: Option<bool>,
    #[arg(long, value_enum)]
    pub method: Option<MethodArg>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodArg {
    Ct3s,
    Gfct3s,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Ct3s => Method::Ct3s,
            MethodArg::Gfct3s => Method::Gfct3s,
        }
    }
}

/// Fully resolved analysis settings, as recorded in manifests.
#[derive(Debug, Clone, Serialize)]
pub struct Resolved {
    pub config: AnalysisConfig,
    pub method: Method,
    pub chirp_step: Option<f64>,
    pub chirp_max: Option<f64>,
}

impl AnalysisArgs {
    /// Flags first, then the file. The threshold flags count as one setting.
    pub fn merged(self, file: &AnalysisArgs) -> AnalysisArgs {
        let any_thr = self.threshold.is_some() || self.threshold_abs.is_some() || self.threshold_global.is_some();
        let (threshold, threshold_abs, threshold_global) = if any_thr {
            (self.threshold, self.threshold_abs, self.threshold_global)
        } else {
            (file.threshold, file.threshold_abs, file.threshold_global)
        };
        AnalysisArgs {
            sigma: self.sigma.or(file.sigma),
            hop: self.hop.or(file.hop),
            frame_len: self.frame_len.or(file.frame_len),
            truncation: self.truncation.or(file.truncation),
            b: self.b.or(file.b),
            rho: self.rho.or(file.rho),
            delta: self.delta.or(file.delta),
            threshold,
            threshold_abs,
            threshold_global,
            components: self.components.or_else(|| file.components.clone()),
            trend: self.trend.or(file.trend),
            min_cluster: self.min_cluster.or(file.min_cluster),
            split_peaks: self.split_peaks.or(file.split_peaks),
            peak_valley_ratio: self.peak_valley_ratio.or(file.peak_valley_ratio),
            min_track_len: self.min_track_len.or(file.min_track_len),
            max_gap: self.max_gap.or(file.max_gap),
            smooth: self.smooth.or(file.smooth),
            chirp_step: self.chirp_step.or(file.chirp_step),
            chirp_max: self.chirp_max.or(file.chirp_max),
            refine: self.refine.or(file.refine),
            method: self.method.or(file.method),
        }
    }

    pub fn resolve(&self) -> Result<Resolved, CliError> {
        let Some(sigma) = self.sigma else {
            return usage("--sigma is required (flag or config file)");
        };
        let mut cfg = AnalysisConfig::new(sigma);
        if let Some(v) = self.hop {
            cfg.frame_hop = v;
        }
        cfg.frame_len = self.frame_len;
        if let Some(v) = self.truncation {
            cfg.truncation_sigmas = v;
        }
        if let Some(v) = self.b {
            cfg.matched_half_width_b = v;
        }
        if let Some(v) = self.rho {
            cfg.rho = v;
        }
        if let Some(v) = self.delta {
            cfg.delta = v;
        }
        let thr = [
            self.threshold.map(ThresholdPolicy::FrameFraction),
            self.threshold_abs.map(ThresholdPolicy::Absolute),
            self.threshold_global.map(ThresholdPolicy::GlobalFraction),
        ];
        match thr.iter().flatten().collect::<Vec<_>>().as_slice() {
            [] => {}
            [p] => cfg.threshold_policy = **p,
            _ => return usage("give only one of threshold, threshold_abs and threshold_global"),
        }
        if let Some(c) = &self.components {
            cfg.max_components = parse_components(c)?;
        }
        if let Some(v) = self.trend {
            cfg.include_trend = v;
        }
        if let Some(v) = self.min_cluster {
            cfg.min_cluster_size = v;
        }
        if let Some(v) = self.split_peaks {
            cfg.split_peaks = v;
        }
        if let Some(v) = self.peak_valley_ratio {
            cfg.peak_valley_ratio = v;
        }
        if let Some(v) = self.min_track_len {
            cfg.min_track_len = v;
        }
        if let Some(v) = self.max_gap {
            cfg.max_gap = v;
        }
        if let Some(v) = self.smooth {
            cfg.smooth_half_window = v;
        }
        if let Some(v) = self.refine {
            cfg.refine_ridges = v;
        }
        cfg.validate()?;
        if self.chirp_step.is_some() != self.chirp_max.is_some() {
            return usage("--chirp-step and --chirp-max go together");
        }
        Ok(Resolved {
            config: cfg,
            method: self.method.map(Method::from).unwrap_or_default(),
            chirp_step: self.chirp_step,
            chirp_max: self.chirp_max,
        })
    }
}

/// Lets the config file write `components = 2` as well as `"auto"`.
fn count_or_word<'de, D: serde::Deserializer<'de>>(d: D) -> Result<Option<String>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Count(u64),
        Word(String),
    }
    Ok(Option::<Raw>::deserialize(d)?.map(|r| match r {
        Raw::Count(n) => n.to_string(),
        Raw::Word(w) => w,
    }))
}

fn parse_components(s: &str) -> Result<ComponentCount, CliError> {
    if s.eq_ignore_ascii_case("auto") {
        return Ok(ComponentCount::Auto);
    }
    match s.parse::<usize>() {
        Ok(n) if n > 0 => Ok(ComponentCount::Max(n)),
        _ => usage(format!("--components must be a positive integer or auto, got {s:?}")),
    }
}

impl Resolved {
    pub fn grids(&self, sample_rate: f64, is_real: bool) -> Result<(FrequencyGrid, ChirpRateGrid), CliError> {
        let (f, c) = make_grids(self.config.resolved_frame_len(sample_rate), sample_rate, is_real)?;
        let c = match (self.chirp_step, self.chirp_max) {
            (Some(step), Some(max)) => {
                if !(step > 0.0 && max >= 0.0 && step.is_finite() && max.is_finite()) {
                    return usage("chirp grid step must be positive and the range nonnegative");
                }
                ChirpRateGrid::symmetric((max / step).round() as usize, step)?
            }
            _ => c,
        };
        Ok((f, c))
    }
}

/// Reads the analysis section of a TOML config file.
pub fn load_config(path: &Path) -> Result<AnalysisArgs, CliError> {
    let text = std::fs::read_to_string(path)?;
    toml::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

#[derive(Debug, Clone, Args)]
pub struct TransformArgs {
    /// Signal file (.csv or .bin).
    #[arg(long, short)]
    pub input: PathBuf,
    /// Cube file to write.
    #[arg(long, short)]
    pub out: PathBuf,
    #[command(flatten)]
    pub analysis: AnalysisArgs,
}

#[derive(Debug, Clone, Args)]
pub struct MatchArgs {
    /// Transform cube written by `transform`.
    #[arg(long)]
    pub cube: PathBuf,
    #[arg(long, short)]
    pub out: PathBuf,
    /// Matched-filter half width in frames.
    #[arg(long)]
    pub b: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct RidgesArgs {
    /// Signal file; the cube is computed on the fly.
    #[arg(long, short, conflicts_with = "cube", required_unless_present = "cube")]
    pub input: Option<PathBuf>,
    /// Precomputed transform cube.
    #[arg(long)]
    pub cube: Option<PathBuf>,
    /// Precomputed matched cube to go with --cube.
    #[arg(long, requires = "cube")]
    pub matched: Option<PathBuf>,
    /// Ridge CSV to write.
    #[arg(long, short)]
    pub out: PathBuf,
    #[command(flatten)]
    pub analysis: AnalysisArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
pub enum SignalFormat {
    Csv,
    Bin,
}

impl SignalFormat {
    pub fn extension(self) -> &'static str {
        match self {
            SignalFormat::Csv => "csv",
            SignalFormat::Bin => "bin",
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct SeparateArgs {
    #[arg(long, short)]
    pub input: PathBuf,
    /// Directory for component files, tracks, ridges and the manifest.
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Clean component waveforms (from `generate --truth`) for an RMSE report.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// Samples dropped at each end for the RMSE; defaults to the window half width.
    #[arg(long)]
    pub trim: Option<usize>,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: SignalFormat,
    #[command(flatten)]
    pub analysis: AnalysisArgs,
}

#[derive(Debug, Clone, Args)]
pub struct BenchmarkArgs {
    #[arg(long, value_enum, default_value = "s-trend")]
    pub signal: Generator,
    #[arg(long)]
    pub fs: f64,
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = -10.0, allow_hyphen_values = true)]
    pub snr_min: f64,
    #[arg(long, default_value_t = 20.0, allow_hyphen_values = true)]
    pub snr_max: f64,
    #[arg(long, default_value_t = 5.0)]
    pub snr_step: f64,
    /// Noise realisations per SNR.
    #[arg(long, default_value_t = 10)]
    pub seeds: u64,
    #[arg(long, default_value_t = 0)]
    pub seed_base: u64,
    /// Samples dropped at each end for the RMSE; defaults to the window half width.
    #[arg(long)]
    pub trim: Option<usize>,
    /// Per-cell results CSV.
    #[arg(long, short)]
    pub out: PathBuf,
    #[command(flatten)]
    pub analysis: AnalysisArgs,
}

#[derive(Debug, Clone, Args)]
pub struct StreamArgs {
    /// Sample rate of the incoming samples, Hz.
    #[arg(long)]
    pub fs: f64,
    /// Read complex samples (two numbers per line).
    #[arg(long)]
    pub complex: bool,
    /// Samples per push.
    #[arg(long, default_value_t = 256)]
    pub chunk: usize,
    /// Write a run manifest here.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[command(flatten)]
    pub analysis: AnalysisArgs,
}

#[derive(Debug, Clone, Args)]
pub struct ExportPlotArgs {
    /// Cube file from `transform` or `match`.
    #[arg(long)]
    pub cube: PathBuf,
    /// `t=<s>`, `eta=<Hz>` or `lambda=<Hz/s>`; bin indices with --bins.
    #[arg(long)]
    pub slice: String,
    /// Read the slice value as a bin index.
    #[arg(long)]
    pub bins: bool,
    #[arg(long, short)]
    pub out: PathBuf,
}
