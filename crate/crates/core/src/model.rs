//! Domain types shared by every stage: sampled signals, analysis grids,
//! the time-frequency-chirprate cube, ridges and recovered components.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

const GRID_TOL: f64 = 1e-9;

/// Uniformly sampled time series. Real signals are stored as complex
/// samples with exactly zero imaginary parts.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledSignal {
    samples: Vec<Complex64>,
    sample_rate: f64,
    start_time: f64,
    is_real: bool,
}

impl SampledSignal {
    pub fn new(
        samples: Vec<Complex64>,
        sample_rate: f64,
        start_time: f64,
        is_real: bool,
    ) -> Result<Self> {
        if samples.is_empty() {
            return invalid("signal has no samples");
        }
        if !(sample_rate.is_finite() && sample_rate > 0.0) {
            return invalid(format!("sample rate must be finite and positive, got {sample_rate}"));
        }
        if !start_time.is_finite() {
            return invalid("start time must be finite");
        }
        if samples.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return invalid("signal contains non-finite samples");
        }
        if is_real && samples.iter().any(|z| z.im != 0.0) {
            return invalid("signal flagged real has nonzero imaginary parts");
        }
        Ok(Self {
            samples,
            sample_rate,
            start_time,
            is_real,
        })
    }

    pub fn from_real(values: &[f64], sample_rate: f64, start_time: f64) -> Result<Self> {
        let samples = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        Self::new(samples, sample_rate, start_time, true)
    }

    pub fn from_complex(samples: Vec<Complex64>, sample_rate: f64, start_time: f64) -> Result<Self> {
        Self::new(samples, sample_rate, start_time, false)
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<Complex64> {
        self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn sample_period(&self) -> f64 {
        1.0 / self.sample_rate
    }

    pub fn start_time(&self) -> f64 {
        self.start_time
    }

    pub fn is_real(&self) -> bool {
        self.is_real
    }

    /// Time stamp of sample `k`.
    pub fn time_at(&self, k: usize) -> f64 {
        self.start_time + k as f64 / self.sample_rate
    }

    pub fn real_parts(&self) -> Vec<f64> {
        self.samples.iter().map(|z| z.re).collect()
    }

    /// Mean power `sum |x|^2 / n`.
    pub fn power(&self) -> f64 {
        self.samples.iter().map(|z| z.norm_sqr()).sum::<f64>() / self.len() as f64
    }
}

/// Ascending, uniformly spaced frequency axis in Hz.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyGrid {
    values: Vec<f64>,
    bin_width: f64,
}

/// Ascending, uniformly spaced chirp-rate axis in Hz/s.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChirpRateGrid {
    values: Vec<f64>,
    bin_width: f64,
}

fn check_uniform(values: &[f64], bin_width: f64, what: &str) -> Result<()> {
    if values.is_empty() {
        return invalid(format!("{what} grid is empty"));
    }
    if !(bin_width.is_finite() && bin_width > 0.0) {
        return invalid(format!("{what} grid bin width must be positive"));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return invalid(format!("{what} grid has non-finite values"));
    }
    for w in values.windows(2) {
        let step = w[1] - w[0];
        if step <= 0.0 {
            return invalid(format!("{what} grid is not strictly ascending"));
        }
        if ((step - bin_width) / bin_width).abs() > GRID_TOL {
            return invalid(format!("{what} grid spacing {step} differs from bin width {bin_width}"));
        }
    }
    Ok(())
}

/// Shared behaviour of the two uniform axes.
macro_rules! uniform_axis {
    ($ty:ident, $what:expr) => {
        impl $ty {
            pub fn new(values: Vec<f64>, bin_width: f64) -> Result<Self> {
                check_uniform(&values, bin_width, $what)?;
                Ok(Self { values, bin_width })
            }

            /// `count` bins starting at `first_index * bin_width`.
            pub fn from_indices(first_index: i64, count: usize, bin_width: f64) -> Result<Self> {
                let values = (0..count as i64)
                    .map(|i| (first_index + i) as f64 * bin_width)
                    .collect();
                Self::new(values, bin_width)
            }

            pub fn values(&self) -> &[f64] {
                &self.values
            }

            pub fn bin_width(&self) -> f64 {
                self.bin_width
            }

            pub fn len(&self) -> usize {
                self.values.len()
            }

            pub fn is_empty(&self) -> bool {
                self.values.is_empty()
            }

            pub fn value(&self, index: usize) -> f64 {
                self.values[index]
            }

            /// Fractional bin position of a physical value.
            pub fn position(&self, value: f64) -> f64 {
                (value - self.values[0]) / self.bin_width
            }

            /// Nearest bin, or `None` when the value lies more than half a
            /// bin outside the grid.
            pub fn nearest(&self, value: f64) -> Option<usize> {
                let pos = self.position(value);
                if !pos.is_finite() || pos < -0.5 || pos > self.values.len() as f64 - 0.5 {
                    return None;
                }
                Some((pos.round().max(0.0) as usize).min(self.values.len() - 1))
            }

            /// Nearest bin clamped into range.
            pub fn nearest_clamped(&self, value: f64) -> usize {
                let pos = self.position(value).round();
                if pos <= 0.0 {
                    0
                } else {
                    (pos as usize).min(self.values.len() - 1)
                }
            }

            /// Index of the bin holding exactly zero, if any.
            pub fn zero_index(&self) -> Option<usize> {
                self.nearest(0.0)
                    .filter(|&i| self.values[i].abs() <= GRID_TOL * self.bin_width)
            }
        }
    };
}

uniform_axis!(FrequencyGrid, "frequency");
uniform_axis!(ChirpRateGrid, "chirp-rate");

impl ChirpRateGrid {
    /// `2 * half_count + 1` bins centred on zero.
    pub fn symmetric(half_count: usize, bin_width: f64) -> Result<Self> {
        Self::from_indices(-(half_count as i64), 2 * half_count + 1, bin_width)
    }
}

/// Analysis grids for a frame of `frame_len` samples.
///
/// Real signals get `eta = k Fs / T` for `k = 0..T/2-1`; complex signals get
/// `k = -T/2+1 ..= T/2`. Chirp rates are `j Fs^2 / T^2` for
/// `|j| <= T/2 - 1`.
pub fn make_grids(
    frame_len: usize,
    sample_rate: f64,
    is_real: bool,
) -> Result<(FrequencyGrid, ChirpRateGrid)> {
    if frame_len < 8 || !frame_len.is_multiple_of(2) {
        return invalid(format!("frame length must be even and at least 8, got {frame_len}"));
    }
    if !(sample_rate.is_finite() && sample_rate > 0.0) {
        return invalid("sample rate must be finite and positive");
    }
    let t = frame_len as f64;
    let half = frame_len / 2;
    let df = sample_rate / t;
    let freq = if is_real {
        FrequencyGrid::from_indices(0, half, df)?
    } else {
        FrequencyGrid::from_indices(-(half as i64) + 1, frame_len, df)?
    };
    let chirp = ChirpRateGrid::symmetric(half - 1, sample_rate * sample_rate / (t * t))?;
    Ok((freq, chirp))
}

/// Rule for the per-frame magnitude threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum ThresholdPolicy {
    /// Fixed threshold `mu / 2` in signal units.
    Absolute(f64),
    /// Fraction of the frame's own maximum.
    FrameFraction(f64),
    /// Fraction of the maximum over the whole cube.
    GlobalFraction(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ComponentCount {
    Auto,
    Max(usize),
}

impl ComponentCount {
    pub fn limit(self) -> usize {
        match self {
            ComponentCount::Auto => usize::MAX,
            ComponentCount::Max(n) => n,
        }
    }
}

/// Every tunable of the analysis pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisConfig {
    /// Gaussian window scale in seconds.
    pub sigma: f64,
    /// Hop between frame centres, in samples.
    pub frame_hop: usize,
    /// FFT length; `None` picks the smallest power of two holding the window.
    pub frame_len: Option<usize>,
    /// Window truncation half-width in units of sigma.
    pub truncation_sigmas: f64,
    pub threshold_policy: ThresholdPolicy,
    /// Weight of the chirp-rate term in the track distance, seconds.
    pub rho: f64,
    /// Separation resolution in Hz; also the track association gate.
    pub delta: f64,
    /// Matched-filter half width in frames.
    pub matched_half_width_b: usize,
    pub max_components: ComponentCount,
    pub include_trend: bool,
    /// Clusters with fewer cells are discarded as noise.
    pub min_cluster_size: usize,
    /// Split a connected cluster at saddles when both peaks rise above
    /// `saddle / peak_valley_ratio`.
    pub split_peaks: bool,
    pub peak_valley_ratio: f64,
    /// Tracks with fewer points are pruned.
    pub min_track_len: usize,
    /// Frames a track may go unmatched before it ends.
    pub max_gap: usize,
    /// Running-median half window applied to confirmed tracks.
    pub smooth_half_window: usize,
    /// Move each ridge off the grid to the best least-squares fit of the
    /// local linear-chirp response.
    #[serde(default)]
    pub refine_ridges: bool,
}

impl AnalysisConfig {
    /// Defaults scaled to a window of `sigma` seconds.
    pub fn new(sigma: f64) -> Self {
        Self {
            sigma,
            frame_hop: 1,
            frame_len: None,
            truncation_sigmas: 4.0,
            threshold_policy: ThresholdPolicy::FrameFraction(0.3),
            rho: sigma,
            delta: 1.0 / sigma,
            matched_half_width_b: 0,
            max_components: ComponentCount::Auto,
            include_trend: false,
            min_cluster_size: 3,
            split_peaks: true,
            peak_valley_ratio: 1.05,
            min_track_len: 5,
            max_gap: 2,
            smooth_half_window: 3,
            refine_ridges: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.sigma, self.truncation_sigmas, self.rho, self.delta, self.peak_valley_ratio];
        if finite.iter().any(|v| !v.is_finite()) {
            return invalid("configuration contains non-finite values");
        }
        if self.sigma <= 0.0 {
            return invalid("sigma must be positive");
        }
        if self.truncation_sigmas <= 0.0 {
            return invalid("window truncation must be positive");
        }
        if self.rho < 0.0 {
            return invalid("rho must be nonnegative");
        }
        if self.delta <= 0.0 {
            return invalid("delta must be positive");
        }
        if self.frame_hop == 0 {
            return invalid("frame hop must be at least 1");
        }
        if self.peak_valley_ratio < 1.0 {
            return invalid("peak/valley ratio must be at least 1");
        }
        if let ComponentCount::Max(0) = self.max_components {
            return invalid("max_components must be positive");
        }
        match self.threshold_policy {
            ThresholdPolicy::Absolute(v) if !(v.is_finite() && v >= 0.0) => {
                invalid("absolute threshold must be finite and nonnegative")
            }
            ThresholdPolicy::FrameFraction(f) | ThresholdPolicy::GlobalFraction(f)
                if !(f.is_finite() && (0.0..=1.0).contains(&f)) =>
            {
                invalid("threshold fraction must lie in [0, 1]")
            }
            _ => Ok(()),
        }
    }

    /// Window half-width in samples at the given rate.
    pub fn half_width(&self, sample_rate: f64) -> usize {
        (self.truncation_sigmas * self.sigma * sample_rate).ceil() as usize
    }

    /// FFT length actually used for the given rate.
    pub fn resolved_frame_len(&self, sample_rate: f64) -> usize {
        self.frame_len
            .unwrap_or_else(|| (2 * self.half_width(sample_rate) + 1).next_power_of_two().max(8))
    }
}

/// Number of frames for `n` samples at the given hop; frame `j` is centred
/// on sample `j * hop`.
pub fn frame_count(n: usize, hop: usize) -> usize {
    if n == 0 {
        0
    } else {
        (n - 1) / hop + 1
    }
}

/// Discretised chirplet transform over (frame, frequency bin, chirp bin).
#[derive(Debug, Clone)]
pub struct TFCCube {
    pub(crate) data: Vec<Complex64>,
    pub(crate) frame_times: Vec<f64>,
    pub(crate) freq_grid: FrequencyGrid,
    pub(crate) chirp_grid: ChirpRateGrid,
    pub(crate) sigma: f64,
    pub(crate) hop: usize,
    pub(crate) signal_len: usize,
    pub(crate) sample_rate: f64,
    pub(crate) is_real: bool,
}

impl TFCCube {
    pub fn from_parts(
        data: Vec<Complex64>,
        frame_times: Vec<f64>,
        freq_grid: FrequencyGrid,
        chirp_grid: ChirpRateGrid,
        sigma: f64,
        hop: usize,
        signal_len: usize,
        sample_rate: f64,
        is_real: bool,
    ) -> Result<Self> {
        if hop == 0 || frame_times.len() != frame_count(signal_len, hop) {
            return invalid("frame count does not match signal length and hop");
        }
        if data.len() != frame_times.len() * freq_grid.len() * chirp_grid.len() {
            return invalid("cube data size does not match its grids");
        }
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return invalid("cube contains non-finite entries");
        }
        Ok(Self {
            data,
            frame_times,
            freq_grid,
            chirp_grid,
            sigma,
            hop,
            signal_len,
            sample_rate,
            is_real,
        })
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.frame_times.len(), self.freq_grid.len(), self.chirp_grid.len())
    }

    pub fn n_frames(&self) -> usize {
        self.frame_times.len()
    }

    #[inline]
    pub fn get(&self, frame: usize, freq: usize, chirp: usize) -> Complex64 {
        let (_, nf, nc) = self.dims();
        self.data[(frame * nf + freq) * nc + chirp]
    }

    /// One frame as a (freq, chirp) row-major slice.
    pub fn frame(&self, frame: usize) -> &[Complex64] {
        let stride = self.freq_grid.len() * self.chirp_grid.len();
        &self.data[frame * stride..(frame + 1) * stride]
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn frame_times(&self) -> &[f64] {
        &self.frame_times
    }

    pub fn freq_grid(&self) -> &FrequencyGrid {
        &self.freq_grid
    }

    pub fn chirp_grid(&self) -> &ChirpRateGrid {
        &self.chirp_grid
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn hop(&self) -> usize {
        self.hop
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn is_real(&self) -> bool {
        self.is_real
    }

    /// Seconds between consecutive frames.
    /// Length in samples of the analysed signal.
    pub fn signal_len(&self) -> usize {
        self.signal_len
    }

    pub fn hop_seconds(&self) -> f64 {
        self.hop as f64 / self.sample_rate
    }

    pub fn magnitudes(&self, frame: usize) -> Vec<f64> {
        self.frame(frame).iter().map(|z| z.norm()).collect()
    }
}

/// One ridge sample: the estimated IF and chirp rate of a component at a frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RidgePoint {
    pub frame: usize,
    pub time: f64,
    pub eta: f64,
    pub lambda: f64,
    pub freq_bin: usize,
    pub chirp_bin: usize,
    pub magnitude: f64,
    /// Cluster label within its frame.
    pub cluster: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RidgeTrack {
    /// Component index; 0 is reserved for the trend.
    pub component: usize,
    pub is_trend: bool,
    /// Points in increasing frame order, at most one per frame.
    pub points: Vec<RidgePoint>,
}

impl RidgeTrack {
    pub fn point_at(&self, frame: usize) -> Option<&RidgePoint> {
        self.points
            .binary_search_by_key(&frame, |p| p.frame)
            .ok()
            .map(|i| &self.points[i])
    }
}

/// Ridges of every component over a common frame grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RidgeSet {
    pub frame_times: Vec<f64>,
    pub tracks: Vec<RidgeTrack>,
}

impl RidgeSet {
    pub fn n_frames(&self) -> usize {
        self.frame_times.len()
    }

    /// Number of oscillatory (non-trend) tracks.
    pub fn component_count(&self) -> usize {
        self.tracks.iter().filter(|t| !t.is_trend).count()
    }

    pub fn track(&self, component: usize) -> Option<&RidgeTrack> {
        self.tracks.iter().find(|t| t.component == component)
    }

    /// `(component, point)` pairs present at a frame, trend first.
    pub fn points_at(&self, frame: usize) -> Vec<(usize, RidgePoint)> {
        self.tracks
            .iter()
            .filter_map(|t| t.point_at(frame).map(|p| (t.component, *p)))
            .collect()
    }
}

/// A recovered mode.
#[derive(Debug, Clone)]
pub struct ComponentEstimate {
    pub component: usize,
    pub is_trend: bool,
    pub waveform: SampledSignal,
    /// Per-frame instantaneous amplitude; zero where the component is absent.
    pub amplitude_track: Vec<f64>,
    /// Per-frame IF in Hz; NaN where absent.
    pub if_track: Vec<f64>,
    /// Per-frame chirp rate in Hz/s; NaN where absent.
    pub chirp_track: Vec<f64>,
    pub frame_times: Vec<f64>,
}

impl ComponentEstimate {
    pub fn present(&self, frame: usize) -> bool {
        self.if_track[frame].is_finite()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grids_for_unit_rate() {
        let (f, c) = make_grids(256, 1.0, true).unwrap();
        assert_eq!(f.len(), 128);
        assert_eq!(f.value(0), 0.0);
        assert!((f.value(127) - 127.0 / 256.0).abs() < 1e-15);
        assert_eq!(c.len(), 255);
        assert!((c.value(0) + 127.0 / 65536.0).abs() < 1e-18);
        assert!((c.value(254) - 127.0 / 65536.0).abs() < 1e-18);
        assert_eq!(c.zero_index(), Some(127));
    }

    #[test]
    fn smallest_frame() {
        let (f, _) = make_grids(8, 1.0, true).unwrap();
        assert_eq!(f.len(), 4);
        assert_eq!(f.bin_width(), 0.125);
    }

    #[test]
    fn bin_width_at_8khz() {
        let (f, _) = make_grids(256, 8000.0, true).unwrap();
        assert_eq!(f.bin_width(), 8000.0 / 256.0);
        assert_eq!(f.bin_width(), 31.25);
    }

    #[test]
    fn complex_grid_spans_nyquist() {
        let (f, _) = make_grids(16, 16.0, false).unwrap();
        assert_eq!(f.len(), 16);
        assert_eq!(f.value(0), -7.0);
        assert_eq!(f.value(15), 8.0);
        assert_eq!(f.zero_index(), Some(7));
    }

    #[test]
    fn bad_frame_lengths() {
        assert!(make_grids(7, 1.0, true).is_err());
        assert!(make_grids(6, 1.0, true).is_err());
        assert!(make_grids(9, 1.0, true).is_err());
        assert!(make_grids(16, 0.0, true).is_err());
    }

    #[test]
    fn nearest_rejects_far_values() {
        let (f, _) = make_grids(16, 16.0, true).unwrap();
        assert_eq!(f.nearest(-0.4), Some(0));
        assert_eq!(f.nearest(-0.6), None);
        assert_eq!(f.nearest(7.4), Some(7));
        assert_eq!(f.nearest(7.6), None);
        assert_eq!(f.nearest(3.2), Some(3));
    }

    #[test]
    fn nonuniform_grid_rejected() {
        assert!(FrequencyGrid::new(vec![0.0, 1.0, 2.5], 1.0).is_err());
        assert!(FrequencyGrid::new(vec![1.0, 0.0], 1.0).is_err());
    }

    #[test]
    fn signal_invariants() {
        assert!(SampledSignal::from_real(&[], 1.0, 0.0).is_err());
        assert!(SampledSignal::from_real(&[1.0], 0.0, 0.0).is_err());
        assert!(SampledSignal::from_real(&[1.0], f64::NAN, 0.0).is_err());
        let bad = vec![Complex64::new(1.0, 0.5)];
        assert!(SampledSignal::new(bad.clone(), 1.0, 0.0, true).is_err());
        assert!(SampledSignal::new(bad, 1.0, 0.0, false).is_ok());
    }

    #[test]
    fn config_validation() {
        let mut cfg = AnalysisConfig::new(0.01);
        assert!(cfg.validate().is_ok());
        cfg.rho = -1.0;
        assert!(cfg.validate().is_err());
        let mut cfg = AnalysisConfig::new(0.0);
        assert!(cfg.validate().is_err());
        cfg.sigma = 1.0;
        cfg.delta = 0.0;
        assert!(cfg.validate().is_err());
        let mut cfg = AnalysisConfig::new(1.0);
        cfg.threshold_policy = ThresholdPolicy::FrameFraction(1.5);
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn frame_len_holds_window() {
        let cfg = AnalysisConfig::new(25.6);
        assert_eq!(cfg.half_width(1.0), 103);
        assert_eq!(cfg.resolved_frame_len(1.0), 256);
        let cfg = AnalysisConfig::new(1.6);
        assert_eq!(cfg.resolved_frame_len(20.0), 512);
    }
}
