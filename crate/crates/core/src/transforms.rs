//! Gaussian window, its polynomial Fourier transform, the STFT baseline and
//! the discretised chirplet transform.
//!
//! The chirplet transform of `x` at frame centre `t` is the Riemann sum
//!
//! ```text
//! S(t, eta, lambda) = sum_m x(t + m dt) w[m] exp(-i 2 pi eta m dt - i pi lambda (m dt)^2)
//! ```
//!
//! where `w[m]` samples `(1/sigma) g(m dt / sigma) dt` over `|m| <= W` and is
//! renormalised to unit mass. For every chirp-rate bin the frame is
//! demodulated by the quadratic phase and then transformed with one FFT of
//! length `T >= 2W + 1`.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use crate::error::{invalid, Result};
use crate::model::{frame_count, AnalysisConfig, ChirpRateGrid, FrequencyGrid, SampledSignal, TFCCube};

/// Standard normal density `g(t) = exp(-t^2/2) / sqrt(2 pi)`.
pub fn gaussian(t: f64) -> f64 {
    (-0.5 * t * t).exp() / (2.0 * PI).sqrt()
}

/// Truncated, sampled Gaussian window `(1/sigma) g(tau/sigma)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianWindow {
    sigma: f64,
    half_width: usize,
    sample_rate: f64,
    /// Quadrature weights, including the sample period, summing to one.
    weights: Vec<f64>,
}

impl GaussianWindow {
    pub fn new(sigma: f64, half_width: usize, sample_rate: f64) -> Result<Self> {
        if !(sigma.is_finite() && sigma > 0.0) {
            return invalid("window sigma must be finite and positive");
        }
        if !(sample_rate.is_finite() && sample_rate > 0.0) {
            return invalid("sample rate must be finite and positive");
        }
        let dt = 1.0 / sample_rate;
        let raw: Vec<f64> = (-(half_width as i64)..=half_width as i64)
            .map(|m| gaussian(m as f64 * dt / sigma) / sigma * dt)
            .collect();
        let mass: f64 = raw.iter().sum();
        if !(mass > 0.0 && mass.is_finite()) {
            return invalid("window has no mass on its support; increase the half width");
        }
        let weights = raw.into_iter().map(|w| w / mass).collect();
        Ok(Self {
            sigma,
            half_width,
            sample_rate,
            weights,
        })
    }

    pub fn from_config(cfg: &AnalysisConfig, sample_rate: f64) -> Result<Self> {
        Self::new(cfg.sigma, cfg.half_width(sample_rate), sample_rate)
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Support half-width `W` in samples.
    pub fn half_width(&self) -> usize {
        self.half_width
    }

    /// Support length `2W + 1`.
    pub fn support(&self) -> usize {
        2 * self.half_width + 1
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Window density samples `(1/sigma) g(tau/sigma)` after normalisation;
    /// these sum to `1 / dt`.
    pub fn density(&self) -> Vec<f64> {
        self.weights.iter().map(|w| w * self.sample_rate).collect()
    }
}

/// Closed-form polynomial Fourier transform of the Gaussian,
/// `(1 + i 2 pi lambda)^(-1/2) exp(-2 pi^2 eta^2 / (1 + i 2 pi lambda))`.
pub fn breve_g(eta: f64, lambda: f64) -> Complex64 {
    let z = Complex64::new(1.0, 2.0 * PI * lambda);
    z.sqrt().inv() * (-(2.0 * PI * PI * eta * eta) / z).exp()
}

/// Chirp-rate kernel `A(lambda) = (1 + i 2 pi sigma^2 lambda)^(-1/2)`.
pub fn amplitude_kernel(sigma: f64, dlambda: f64) -> Complex64 {
    Complex64::new(1.0, 2.0 * PI * sigma * sigma * dlambda).sqrt().inv()
}

/// Frequency kernel `Omega(a, b) = exp(-2 pi^2 sigma^2 b^2 / (1 + i 2 pi sigma^2 a))`.
pub fn omega_kernel(sigma: f64, dlambda: f64, deta: f64) -> Complex64 {
    let z = Complex64::new(1.0, 2.0 * PI * sigma * sigma * dlambda);
    (-(2.0 * PI * PI * sigma * sigma * deta * deta) / z).exp()
}

/// Analytic chirplet transform of a linear chirp with value `x_value`,
/// IF `phi1` and chirp rate `phi2` at the analysis time.
pub fn ct_closed_form_lfm(
    x_value: Complex64,
    phi1: f64,
    phi2: f64,
    eta: f64,
    lambda: f64,
    sigma: f64,
) -> Complex64 {
    let dl = lambda - phi2;
    x_value * amplitude_kernel(sigma, dl) * omega_kernel(sigma, dl, eta - phi1)
}

/// Copies `x[centre - W ..= centre + W]` into `out`, zero-extending past
/// either end of the signal.
pub fn frame_segment(samples: &[Complex64], centre: usize, half_width: usize, out: &mut [Complex64]) {
    debug_assert_eq!(out.len(), 2 * half_width + 1);
    let n = samples.len() as i64;
    let start = centre as i64 - half_width as i64;
    for (i, slot) in out.iter_mut().enumerate() {
        let k = start + i as i64;
        *slot = if (0..n).contains(&k) {
            samples[k as usize]
        } else {
            Complex64::new(0.0, 0.0)
        };
    }
}

/// Maps grid frequencies onto FFT bins of length `frame_len`.
fn fft_bins(fgrid: &FrequencyGrid, frame_len: usize, sample_rate: f64) -> Result<Vec<usize>> {
    let df = sample_rate / frame_len as f64;
    fgrid
        .values()
        .iter()
        .map(|&v| {
            let k = (v / df).round();
            if (v - k * df).abs() > 1e-9 * df {
                return invalid(format!(
                    "frequency {v} Hz is not a multiple of the FFT bin width {df} Hz"
                ));
            }
            Ok(k.rem_euclid(frame_len as f64) as usize)
        })
        .collect()
}

/// Precomputed per-frame chirplet evaluator shared by the batch transform
/// and the streaming processor.
pub struct ChirpletEngine {
    window: GaussianWindow,
    frame_len: usize,
    fft: Arc<dyn Fft<f64>>,
    fft_index: Vec<usize>,
    /// `exp(-i pi lambda (m dt)^2)` per chirp bin, each of length `2W + 1`.
    demod: Vec<Complex64>,
    freq_grid: FrequencyGrid,
    chirp_grid: ChirpRateGrid,
}

impl std::fmt::Debug for ChirpletEngine {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ChirpletEngine")
            .field("frame_len", &self.frame_len)
            .field("half_width", &self.window.half_width)
            .field("n_freq", &self.freq_grid.len())
            .field("n_chirp", &self.chirp_grid.len())
            .finish()
    }
}

impl ChirpletEngine {
    pub fn new(
        window: GaussianWindow,
        frame_len: usize,
        freq_grid: FrequencyGrid,
        chirp_grid: ChirpRateGrid,
    ) -> Result<Self> {
        if window.support() > frame_len {
            return invalid(format!(
                "window support {} exceeds frame length {frame_len}",
                window.support()
            ));
        }
        let fs = window.sample_rate;
        let fft_index = fft_bins(&freq_grid, frame_len, fs)?;
        let dt = 1.0 / fs;
        let w = window.half_width as i64;
        let mut demod = Vec::with_capacity(chirp_grid.len() * window.support());
        for &lambda in chirp_grid.values() {
            for m in -w..=w {
                let tau = m as f64 * dt;
                demod.push(Complex64::from_polar(1.0, -PI * lambda * tau * tau));
            }
        }
        let fft = FftPlanner::new().plan_fft_forward(frame_len);
        Ok(Self {
            window,
            frame_len,
            fft,
            fft_index,
            demod,
            freq_grid,
            chirp_grid,
        })
    }

    pub fn from_config(
        cfg: &AnalysisConfig,
        sample_rate: f64,
        freq_grid: FrequencyGrid,
        chirp_grid: ChirpRateGrid,
    ) -> Result<Self> {
        cfg.validate()?;
        let window = GaussianWindow::from_config(cfg, sample_rate)?;
        Self::new(window, cfg.resolved_frame_len(sample_rate), freq_grid, chirp_grid)
    }

    pub fn window(&self) -> &GaussianWindow {
        &self.window
    }

    pub fn frame_len(&self) -> usize {
        self.frame_len
    }

    pub fn freq_grid(&self) -> &FrequencyGrid {
        &self.freq_grid
    }

    pub fn chirp_grid(&self) -> &ChirpRateGrid {
        &self.chirp_grid
    }

    /// Number of cells in one frame.
    pub fn frame_cells(&self) -> usize {
        self.freq_grid.len() * self.chirp_grid.len()
    }

    /// Transforms one zero-extended segment of length `2W + 1` into a
    /// (freq, chirp) row-major slice.
    pub fn frame(&self, segment: &[Complex64], out: &mut [Complex64]) {
        let support = self.window.support();
        debug_assert_eq!(segment.len(), support);
        debug_assert_eq!(out.len(), self.frame_cells());
        let w = self.window.half_width;
        let t = self.frame_len;
        let n_chirp = self.chirp_grid.len();
        let windowed: Vec<Complex64> = segment
            .iter()
            .zip(&self.window.weights)
            .map(|(x, &g)| x * g)
            .collect();
        let mut buf = vec![Complex64::new(0.0, 0.0); t];
        let mut scratch = vec![Complex64::new(0.0, 0.0); self.fft.get_inplace_scratch_len()];
        for j in 0..n_chirp {
            buf.iter_mut().for_each(|z| *z = Complex64::new(0.0, 0.0));
            let demod = &self.demod[j * support..(j + 1) * support];
            for (i, (xw, d)) in windowed.iter().zip(demod).enumerate() {
                // sample offset m = i - W lands at index m mod T
                buf[(i + t - w) % t] = xw * d;
            }
            self.fft.process_with_scratch(&mut buf, &mut scratch);
            for (k, &idx) in self.fft_index.iter().enumerate() {
                out[k * n_chirp + j] = buf[idx];
            }
        }
    }

    /// Direct evaluation at an arbitrary `(eta, lambda)`.
    pub fn point(&self, segment: &[Complex64], eta: f64, lambda: f64) -> Complex64 {
        let dt = 1.0 / self.window.sample_rate;
        let w = self.window.half_width as i64;
        segment
            .iter()
            .zip(&self.window.weights)
            .zip(-w..=w)
            .map(|((x, &g), m)| {
                let tau = m as f64 * dt;
                x * g * Complex64::from_polar(1.0, -2.0 * PI * eta * tau - PI * lambda * tau * tau)
            })
            .sum()
    }
}

/// Frame centre times for a signal analysed at the given hop.
pub fn frame_times(x: &SampledSignal, hop: usize) -> Vec<f64> {
    (0..frame_count(x.len(), hop)).map(|j| x.time_at(j * hop)).collect()
}

/// Scaled-window STFT `V(t, eta)` on the frequency grid, one row per frame.
pub fn stft(
    x: &SampledSignal,
    window: &GaussianWindow,
    hop: usize,
    fgrid: &FrequencyGrid,
) -> Result<Vec<Vec<Complex64>>> {
    if hop == 0 {
        return invalid("hop must be at least 1");
    }
    if (window.sample_rate - x.sample_rate()).abs() > 1e-12 * x.sample_rate() {
        return invalid("window and signal sample rates differ");
    }
    let frame_len = window.support().next_power_of_two().max(8);
    let frame_len = frame_len.max((x.sample_rate() / fgrid.bin_width()).round() as usize);
    let index = fft_bins(fgrid, frame_len, x.sample_rate())?;
    let fft = FftPlanner::new().plan_fft_forward(frame_len);
    let w = window.half_width;
    let rows = (0..frame_count(x.len(), hop))
        .into_par_iter()
        .map(|j| {
            let mut segment = vec![Complex64::new(0.0, 0.0); window.support()];
            frame_segment(x.samples(), j * hop, w, &mut segment);
            let mut buf = vec![Complex64::new(0.0, 0.0); frame_len];
            for (i, (s, &g)) in segment.iter().zip(&window.weights).enumerate() {
                buf[(i + frame_len - w) % frame_len] = s * g;
            }
            fft.process(&mut buf);
            index.iter().map(|&k| buf[k]).collect()
        })
        .collect();
    Ok(rows)
}

/// Chirplet transform of `x` on the given grids.
pub fn chirplet_transform(
    x: &SampledSignal,
    cfg: &AnalysisConfig,
    fgrid: &FrequencyGrid,
    cgrid: &ChirpRateGrid,
) -> Result<TFCCube> {
    let engine = ChirpletEngine::from_config(cfg, x.sample_rate(), fgrid.clone(), cgrid.clone())?;
    chirplet_transform_with(x, &engine, cfg.frame_hop)
}

/// Chirplet transform using a prepared engine.
pub fn chirplet_transform_with(x: &SampledSignal, engine: &ChirpletEngine, hop: usize) -> Result<TFCCube> {
    if hop == 0 {
        return invalid("hop must be at least 1");
    }
    if (engine.window.sample_rate - x.sample_rate()).abs() > 1e-12 * x.sample_rate() {
        return invalid("engine and signal sample rates differ");
    }
    if x.len() < engine.window.support() {
        return invalid(format!(
            "signal of {} samples is shorter than the {}-sample window",
            x.len(),
            engine.window.support()
        ));
    }
    let cells = engine.frame_cells();
    let n_frames = frame_count(x.len(), hop);
    let mut data = vec![Complex64::new(0.0, 0.0); n_frames * cells];
    data.par_chunks_mut(cells).enumerate().for_each(|(j, out)| {
        let mut segment = vec![Complex64::new(0.0, 0.0); engine.window.support()];
        frame_segment(x.samples(), j * hop, engine.window.half_width, &mut segment);
        engine.frame(&segment, out);
    });
    TFCCube::from_parts(
        data,
        frame_times(x, hop),
        engine.freq_grid.clone(),
        engine.chirp_grid.clone(),
        engine.window.sigma,
        hop,
        x.len(),
        x.sample_rate(),
        x.is_real(),
    )
}

/// Direct chirplet evaluation of `x` at sample `centre`, arbitrary `(eta, lambda)`.
pub fn chirplet_at(x: &SampledSignal, window: &GaussianWindow, centre: usize, eta: f64, lambda: f64) -> Complex64 {
    let dt = x.sample_period();
    let w = window.half_width as i64;
    let n = x.len() as i64;
    let mut acc = Complex64::new(0.0, 0.0);
    for (i, &g) in window.weights.iter().enumerate() {
        let m = i as i64 - w;
        let k = centre as i64 + m;
        if !(0..n).contains(&k) {
            continue;
        }
        let tau = m as f64 * dt;
        acc += x.samples()[k as usize]
            * g
            * Complex64::from_polar(1.0, -2.0 * PI * eta * tau - PI * lambda * tau * tau);
    }
    acc
}

/// Range of the dimensionless sweep used by [`verify_admissibility`].
#[derive(Debug, Clone, Copy)]
pub struct GridExtent {
    pub min: f64,
    pub max: f64,
    pub points_per_decade: usize,
}

impl Default for GridExtent {
    fn default() -> Self {
        Self {
            min: 1e-3,
            max: 1e3,
            points_per_decade: 20,
        }
    }
}

#[derive(Debug, Clone)]
pub struct AdmissibilityReport {
    /// Smallest `C` with `|g(eta, lambda)| <= C / sqrt(|eta| + |lambda|)` on the sweep.
    pub fitted_c: f64,
    /// Largest `|g|` seen, and where.
    pub max_abs: f64,
    pub max_at: (f64, f64),
    /// `|g| <= 1` at every sampled point of both the closed form and the
    /// discrete window.
    pub bounded_by_one: bool,
    /// `|g(eta, 0)|` strictly decreasing along the positive eta sweep.
    pub monotone_in_eta: bool,
    /// Largest modulus of the discrete window's transform on the sweep.
    pub discrete_max_abs: f64,
}

impl AdmissibilityReport {
    pub fn passes(&self) -> bool {
        self.fitted_c.is_finite() && self.bounded_by_one && self.monotone_in_eta
    }
}

fn log_sweep(extent: GridExtent) -> Vec<f64> {
    let decades = (extent.max / extent.min).log10();
    let n = ((decades * extent.points_per_decade as f64).ceil() as usize).max(1);
    (0..=n)
        .map(|i| extent.min * 10f64.powf(decades * i as f64 / n as f64))
        .collect()
}

/// Numerical check of the admissible-window conditions for the Gaussian.
pub fn verify_admissibility(w: &GaussianWindow, extent: GridExtent) -> AdmissibilityReport {
    let pos = log_sweep(extent);
    let mut axis: Vec<f64> = pos.iter().rev().map(|v| -v).collect();
    axis.push(0.0);
    axis.extend(pos.iter().copied());

    let mut fitted_c: f64 = 0.0;
    let mut max_abs = 0.0;
    let mut max_at = (0.0, 0.0);
    for &eta in &axis {
        for &lambda in &axis {
            let m = breve_g(eta, lambda).norm();
            if m > max_abs {
                max_abs = m;
                max_at = (eta, lambda);
            }
            let r = eta.abs() + lambda.abs();
            if r > 0.0 {
                fitted_c = fitted_c.max(m * r.sqrt());
            }
        }
    }
    let monotone_in_eta = pos
        .windows(2)
        .all(|p| breve_g(p[1], 0.0).norm() < breve_g(p[0], 0.0).norm() || breve_g(p[1], 0.0).norm() == 0.0);

    // discrete window in dimensionless units: tau / sigma
    let dt = 1.0 / w.sample_rate;
    let hw = w.half_width as i64;
    let nyquist = 0.5 * w.sigma * w.sample_rate;
    let mut discrete_max_abs: f64 = 0.0;
    for &eta in axis.iter().filter(|e| e.abs() <= nyquist) {
        for &lambda in axis.iter().filter(|l| l.abs() <= nyquist) {
            let v: Complex64 = w
                .weights
                .iter()
                .zip(-hw..=hw)
                .map(|(&g, m)| {
                    let u = m as f64 * dt / w.sigma;
                    g * Complex64::from_polar(1.0, -2.0 * PI * eta * u - PI * lambda * u * u)
                })
                .sum();
            discrete_max_abs = discrete_max_abs.max(v.norm());
        }
    }
    AdmissibilityReport {
        fitted_c,
        max_abs,
        max_at,
        bounded_by_one: max_abs <= 1.0 + 1e-12 && discrete_max_abs <= 1.0 + 1e-12,
        monotone_in_eta,
        discrete_max_abs,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::make_grids;

    /// Composite Simpson quadrature of the polynomial Fourier transform.
    fn pft_quadrature(eta: f64, lambda: f64) -> Complex64 {
        let (a, b, n) = (-12.0, 12.0, 200_000);
        let h = (b - a) / n as f64;
        let f = |t: f64| gaussian(t) * Complex64::from_polar(1.0, -2.0 * PI * eta * t - PI * lambda * t * t);
        let mut acc = f(a) + f(b);
        for i in 1..n {
            let t = a + i as f64 * h;
            acc += f(t) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        acc * h / 3.0
    }

    #[test]
    fn breve_g_at_origin() {
        let v = breve_g(0.0, 0.0);
        assert_eq!(v, Complex64::new(1.0, 0.0));
    }

    #[test]
    fn breve_g_matches_quadrature() {
        // values frozen from the quadrature oracle
        let q = pft_quadrature(0.5, 0.0);
        assert!((q.re - 7.191_883_355_826_36e-3).abs() < 1e-12, "{q}");
        let v = breve_g(0.5, 0.0);
        assert!((v.re - (-PI * PI / 2.0).exp()).abs() < 1e-15);
        assert!(v.im.abs() < 1e-15);
        assert!((v - q).norm() < 1e-10);

        let q = pft_quadrature(0.0, 1.0);
        let v = breve_g(0.0, 1.0);
        assert!((q.norm() - 0.396_455_199_836_768).abs() < 1e-9, "{}", q.norm());
        assert!((v.norm() - (1.0 + 4.0 * PI * PI).powf(-0.25)).abs() < 1e-15);
        assert!((v - q).norm() < 1e-8);

        for &(e, l) in &[(0.3, -0.4), (-0.2, 0.7), (0.05, 2.0)] {
            assert!((breve_g(e, l) - pft_quadrature(e, l)).norm() < 1e-8, "({e}, {l})");
        }
    }

    #[test]
    fn breve_g_magnitude_formula() {
        for &(e, l) in &[(0.1, 0.2), (1.0, -3.0), (-0.7, 0.05)] {
            let expected = (1.0 + 4.0 * PI * PI * l * l).powf(-0.25)
                * (-2.0 * PI * PI * e * e / (1.0 + 4.0 * PI * PI * l * l)).exp();
            assert!((breve_g(e, l).norm() - expected).abs() < 1e-14);
        }
    }

    #[test]
    fn closed_form_is_exact_on_ridge() {
        let x = Complex64::new(0.3, -1.2);
        assert_eq!(ct_closed_form_lfm(x, 12.0, 3.0, 12.0, 3.0, 0.7), x);
    }

    #[test]
    fn closed_form_decays_slowly_in_chirp() {
        let x = Complex64::new(2.0, 0.0);
        let sigma = 1.5;
        for &d in &[0.01, 0.1, 1.0, 10.0] {
            let v = ct_closed_form_lfm(x, 5.0, 1.0, 5.0, 1.0 + d, sigma);
            let expected = 2.0 * (1.0 + 4.0 * PI * PI * sigma.powi(4) * d * d).powf(-0.25);
            assert!((v.norm() - expected).abs() < 1e-13);
        }
    }

    #[test]
    fn window_has_unit_mass() {
        let w = GaussianWindow::new(0.004, 64, 8000.0).unwrap();
        let s: f64 = w.density().iter().sum();
        assert!((s - 8000.0).abs() / 8000.0 < 1e-6);
        assert!(w.weights().iter().all(|&v| v >= 0.0));
        assert!(GaussianWindow::new(-1.0, 4, 1.0).is_err());
    }

    #[test]
    fn zero_signal_gives_zero_stft() {
        let x = SampledSignal::from_real(&[0.0; 64], 1.0, 0.0).unwrap();
        let w = GaussianWindow::new(3.0, 9, 1.0).unwrap();
        let (f, _) = make_grids(32, 1.0, true).unwrap();
        let v = stft(&x, &w, 1, &f).unwrap();
        assert!(v.iter().flatten().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn tone_localises_in_stft() {
        let n = 256;
        let c = 20.0 / 128.0;
        let samples = (0..n)
            .map(|k| Complex64::from_polar(1.0, 2.0 * PI * c * k as f64))
            .collect();
        let x = SampledSignal::from_complex(samples, 1.0, 0.0).unwrap();
        let w = GaussianWindow::new(10.0, 40, 1.0).unwrap();
        let (f, _) = make_grids(128, 1.0, false).unwrap();
        let v = stft(&x, &w, 1, &f).unwrap();
        for row in &v[40..216] {
            let best = row
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.norm().partial_cmp(&b.1.norm()).unwrap())
                .unwrap()
                .0;
            assert!((f.value(best) - c).abs() < 1e-12);
        }
    }

    #[test]
    fn short_signal_rejected() {
        let x = SampledSignal::from_real(&[1.0; 10], 1.0, 0.0).unwrap();
        let cfg = AnalysisConfig::new(5.0);
        let (f, c) = make_grids(64, 1.0, true).unwrap();
        assert!(chirplet_transform(&x, &cfg, &f, &c).is_err());
    }

    #[test]
    fn engine_point_matches_frame() {
        let n = 128;
        let samples: Vec<Complex64> = (0..n)
            .map(|k| Complex64::new((0.3 * k as f64).cos(), (0.11 * k as f64).sin()))
            .collect();
        let (f, c) = make_grids(64, 1.0, false).unwrap();
        let w = GaussianWindow::new(6.0, 24, 1.0).unwrap();
        let engine = ChirpletEngine::new(w, 64, f.clone(), c.clone()).unwrap();
        let mut seg = vec![Complex64::new(0.0, 0.0); 49];
        frame_segment(&samples, 60, 24, &mut seg);
        let mut out = vec![Complex64::new(0.0, 0.0); engine.frame_cells()];
        engine.frame(&seg, &mut out);
        for k in (0..f.len()).step_by(7) {
            for j in (0..c.len()).step_by(5) {
                let direct = engine.point(&seg, f.value(k), c.value(j));
                assert!((out[k * c.len() + j] - direct).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn off_lattice_grid_rejected() {
        let w = GaussianWindow::new(2.0, 6, 1.0).unwrap();
        let f = FrequencyGrid::new(vec![0.01, 0.02], 0.01).unwrap();
        let c = ChirpRateGrid::symmetric(0, 0.001).unwrap();
        assert!(ChirpletEngine::new(w, 16, f, c).is_err());
    }

    #[test]
    fn gaussian_window_is_admissible() {
        let w = GaussianWindow::new(8.0, 32, 1.0).unwrap();
        let r = verify_admissibility(&w, GridExtent::default());
        assert!(r.passes(), "{r:?}");
        assert_eq!(r.max_abs, 1.0);
        assert_eq!(r.max_at, (0.0, 0.0));
        assert!(r.fitted_c.is_finite() && r.fitted_c > 0.0);
    }
}
