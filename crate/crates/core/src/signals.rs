//! Synthetic test signals with analytic ground truth, noise and metrics.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::error::{invalid, Result};
use crate::model::SampledSignal;

type Func = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// One AM-FM mode `A(t) cos(2π φ(t))`, with the phase in cycles.
#[derive(Clone)]
pub struct TruthComponent {
    pub name: String,
    amplitude: Func,
    phase: Func,
    inst_freq: Func,
    chirp_rate: Func,
}

impl fmt::Debug for TruthComponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TruthComponent").field("name", &self.name).finish_non_exhaustive()
    }
}

impl TruthComponent {
    pub fn new(
        name: impl Into<String>,
        amplitude: impl Fn(f64) -> f64 + Send + Sync + 'static,
        phase: impl Fn(f64) -> f64 + Send + Sync + 'static,
        inst_freq: impl Fn(f64) -> f64 + Send + Sync + 'static,
        chirp_rate: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            amplitude: Arc::new(amplitude),
            phase: Arc::new(phase),
            inst_freq: Arc::new(inst_freq),
            chirp_rate: Arc::new(chirp_rate),
        }
    }

    pub fn amplitude(&self, t: f64) -> f64 {
        (self.amplitude)(t)
    }

    /// Phase in cycles.
    pub fn phase(&self, t: f64) -> f64 {
        (self.phase)(t)
    }

    /// Instantaneous frequency in Hz.
    pub fn inst_freq(&self, t: f64) -> f64 {
        (self.inst_freq)(t)
    }

    /// Chirp rate in Hz/s.
    pub fn chirp_rate(&self, t: f64) -> f64 {
        (self.chirp_rate)(t)
    }

    pub fn value(&self, t: f64) -> f64 {
        self.amplitude(t) * (2.0 * PI * self.phase(t)).cos()
    }
}

/// Analytic description of a generated signal.
#[derive(Clone)]
pub struct GroundTruth {
    pub components: Vec<TruthComponent>,
    trend: Option<Func>,
    pub sample_rate: f64,
    pub len: usize,
}

impl fmt::Debug for GroundTruth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GroundTruth")
            .field("components", &self.components)
            .field("has_trend", &self.trend.is_some())
            .field("sample_rate", &self.sample_rate)
            .field("len", &self.len)
            .finish()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TruthRow {
    pub time: f64,
    pub component: usize,
    pub amplitude: f64,
    pub inst_freq: f64,
    pub chirp_rate: f64,
}

impl GroundTruth {
    pub fn has_trend(&self) -> bool {
        self.trend.is_some()
    }

    pub fn trend(&self, t: f64) -> f64 {
        self.trend.as_ref().map_or(0.0, |f| f(t))
    }

    pub fn time(&self, k: usize) -> f64 {
        k as f64 / self.sample_rate
    }

    /// Sampled waveform of component `i`.
    pub fn component_signal(&self, i: usize) -> SampledSignal {
        let v: Vec<f64> = (0..self.len).map(|k| self.components[i].value(self.time(k))).collect();
        SampledSignal::from_real(&v, self.sample_rate, 0.0).expect("finite truth")
    }

    pub fn trend_signal(&self) -> SampledSignal {
        let v: Vec<f64> = (0..self.len).map(|k| self.trend(self.time(k))).collect();
        SampledSignal::from_real(&v, self.sample_rate, 0.0).expect("finite truth")
    }

    /// Sum of all components and the trend.
    pub fn signal(&self) -> SampledSignal {
        let v: Vec<f64> = (0..self.len)
            .map(|k| {
                let t = self.time(k);
                self.components.iter().map(|c| c.value(t)).sum::<f64>() + self.trend(t)
            })
            .collect();
        SampledSignal::from_real(&v, self.sample_rate, 0.0).expect("finite truth")
    }

    /// Per-sample truth tracks, component-major.
    pub fn rows(&self, decimate: usize) -> Vec<TruthRow> {
        let step = decimate.max(1);
        let mut rows = Vec::new();
        for (i, c) in self.components.iter().enumerate() {
            for k in (0..self.len).step_by(step) {
                let t = self.time(k);
                rows.push(TruthRow {
                    time: t,
                    component: i + 1,
                    amplitude: c.amplitude(t),
                    inst_freq: c.inst_freq(t),
                    chirp_rate: c.chirp_rate(t),
                });
            }
        }
        rows
    }
}

fn check(fs: f64, n: usize) -> Result<()> {
    if !(fs.is_finite() && fs > 0.0) {
        return invalid(format!("sample rate must be positive, got {fs}"));
    }
    if n < 2 {
        return invalid("at least two samples are required");
    }
    Ok(())
}

fn build(fs: f64, n: usize, components: Vec<TruthComponent>, trend: Option<Func>) -> (SampledSignal, GroundTruth) {
    let truth = GroundTruth {
        components,
        trend,
        sample_rate: fs,
        len: n,
    };
    (truth.signal(), truth)
}

/// `cos(t² + t + cos t) + cos(8t)`; phases are in radians.
pub fn gen_two_component(fs: f64, n: usize) -> Result<(SampledSignal, GroundTruth)> {
    check(fs, n)?;
    let tau = 2.0 * PI;
    let f1 = TruthComponent::new(
        "f1",
        |_| 1.0,
        move |t| (t * t + t + t.cos()) / tau,
        move |t| (2.0 * t + 1.0 - t.sin()) / tau,
        move |t| (2.0 - t.cos()) / tau,
    );
    let f2 = TruthComponent::new("f2", |_| 1.0, move |t| 8.0 * t / tau, |_| 4.0 / PI, |_| 0.0);
    Ok(build(fs, n, vec![f1, f2], None))
}

/// Sum of two unit linear chirps `cos(2π c t + π r t²)`.
pub fn gen_two_lfm(fs: f64, n: usize, c1: f64, r1: f64, c2: f64, r2: f64) -> Result<(SampledSignal, GroundTruth)> {
    check(fs, n)?;
    let lfm = |name: &str, c: f64, r: f64| {
        TruthComponent::new(name, |_| 1.0, move |t| c * t + 0.5 * r * t * t, move |t| c + r * t, move |_| r)
    };
    Ok(build(fs, n, vec![lfm("x1", c1, r1), lfm("x2", c2, r2)], None))
}

/// Crossing time of the two linear IFs, if they cross.
pub fn lfm_crossing(c1: f64, r1: f64, c2: f64, r2: f64) -> Option<f64> {
    (r1 != r2).then(|| (c2 - c1) / (r1 - r2))
}

/// `1.2cos(2300πt + 90 sin(20πt)) + cos(2438πt) + (1 + (t²+t)e^(1−t^1.5))`.
pub fn gen_s_with_trend(fs: f64, n: usize) -> Result<(SampledSignal, GroundTruth)> {
    check(fs, n)?;
    if fs < 2.0 * 2050.0 {
        return invalid("sample rate must be at least 4100 Hz for this signal");
    }
    let s1 = TruthComponent::new(
        "s1",
        |_| 1.2,
        |t| 1150.0 * t + 90.0 * (20.0 * PI * t).sin() / (2.0 * PI),
        |t| 1150.0 + 900.0 * (20.0 * PI * t).cos(),
        |t| -900.0 * 20.0 * PI * (20.0 * PI * t).sin(),
    );
    let s2 = TruthComponent::new("s2", |_| 1.0, |t| 1219.0 * t, |_| 1219.0, |_| 0.0);
    let trend: Func = Arc::new(|t: f64| 1.0 + (t * t + t) * (1.0 - t.powf(1.5)).exp());
    Ok(build(fs, n, vec![s1, s2], Some(trend)))
}

/// `amp·cos(2π carrier t + depth·sin(2π mod_rate t))`.
pub fn gen_sinusoidal_fm(fs: f64, n: usize, carrier: f64, depth: f64, mod_rate: f64, amp: f64) -> Result<(SampledSignal, GroundTruth)> {
    gen_sinusoidal_fm_phased(fs, n, carrier, depth, mod_rate, amp, 0.0)
}

/// Sinusoidal FM with a modulation phase offset in radians.
pub fn gen_sinusoidal_fm_phased(
    fs: f64,
    n: usize,
    carrier: f64,
    depth: f64,
    mod_rate: f64,
    amp: f64,
    mod_phase: f64,
) -> Result<(SampledSignal, GroundTruth)> {
    check(fs, n)?;
    let w = 2.0 * PI * mod_rate;
    let c = TruthComponent::new(
        "sfm",
        move |_| amp,
        move |t| carrier * t + depth * (w * t + mod_phase).sin() / (2.0 * PI),
        move |t| carrier + depth * mod_rate * (w * t + mod_phase).cos(),
        move |t| -depth * mod_rate * w * (w * t + mod_phase).sin(),
    );
    Ok(build(fs, n, vec![c], None))
}

/// Sums the waveforms and truths of several generated signals.
pub fn combine(parts: Vec<(SampledSignal, GroundTruth)>) -> Result<(SampledSignal, GroundTruth)> {
    let Some((first, _)) = parts.first() else {
        return invalid("nothing to combine");
    };
    let (fs, n) = (first.sample_rate(), first.len());
    let mut comps = Vec::new();
    let mut trends = Vec::new();
    for (s, g) in &parts {
        if s.len() != n || s.sample_rate() != fs {
            return invalid("combined signals must share length and sample rate");
        }
        comps.extend(g.components.iter().cloned());
        if let Some(t) = &g.trend {
            trends.push(t.clone());
        }
    }
    let trend: Option<Func> = (!trends.is_empty()).then(|| Arc::new(move |t: f64| trends.iter().map(|f| f(t)).sum::<f64>()) as Func);
    Ok(build(fs, n, comps, trend))
}

/// Noise-free marker for [`add_awgn`].
pub const NO_NOISE: f64 = f64::INFINITY;

/// Adds white Gaussian noise at `snr_db` relative to the signal's full
/// power. Complex signals get circular noise.
pub fn add_awgn(x: &SampledSignal, snr_db: f64, seed: u64) -> Result<SampledSignal> {
    if snr_db == f64::INFINITY {
        return Ok(x.clone());
    }
    if snr_db.is_nan() {
        return invalid("SNR must be a number");
    }
    let p = x.power();
    if p == 0.0 {
        return invalid("cannot set an SNR on a zero signal");
    }
    let noise_power = p / 10f64.powf(snr_db / 10.0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples: Vec<Complex64> = if x.is_real() {
        let sd = noise_power.sqrt();
        x.samples()
            .iter()
            .map(|z| {
                let e: f64 = StandardNormal.sample(&mut rng);
                Complex64::new(z.re + sd * e, 0.0)
            })
            .collect()
    } else {
        let sd = (noise_power / 2.0).sqrt();
        x.samples()
            .iter()
            .map(|z| {
                let a: f64 = StandardNormal.sample(&mut rng);
                let b: f64 = StandardNormal.sample(&mut rng);
                z + Complex64::new(sd * a, sd * b)
            })
            .collect()
    };
    SampledSignal::new(samples, x.sample_rate(), x.start_time(), x.is_real())
}

/// Relative L2 error `‖truth − estimate‖/‖truth‖` after dropping `trim`
/// samples at each end.
pub fn rmse(estimate: &SampledSignal, truth: &SampledSignal, trim: usize) -> Result<f64> {
    rmse_range(estimate, truth, trim..truth.len().saturating_sub(trim))
}

/// Relative L2 error over an explicit sample range.
pub fn rmse_range(estimate: &SampledSignal, truth: &SampledSignal, range: std::ops::Range<usize>) -> Result<f64> {
    if estimate.len() != truth.len() {
        return invalid(format!("length mismatch: {} vs {}", estimate.len(), truth.len()));
    }
    if range.start >= range.end || range.end > truth.len() {
        return invalid("empty or out-of-bounds comparison range");
    }
    let (e, t) = (&estimate.samples()[range.clone()], &truth.samples()[range]);
    let num: f64 = e.iter().zip(t).map(|(a, b)| (a - b).norm_sqr()).sum();
    let den: f64 = t.iter().map(|b| b.norm_sqr()).sum();
    if den == 0.0 {
        return invalid("truth is zero on the comparison range");
    }
    Ok((num / den).sqrt())
}

/// Pairs every truth waveform with a distinct estimate over `range`,
/// lowest error first. Truths left without a partner are scored against
/// silence, which gives 1.
pub fn match_components(
    truths: &[SampledSignal],
    estimates: &[&SampledSignal],
    range: std::ops::Range<usize>,
) -> Result<Vec<(Option<usize>, f64)>> {
    let mut pairs = Vec::new();
    for (i, t) in truths.iter().enumerate() {
        for (j, e) in estimates.iter().enumerate() {
            pairs.push((rmse_range(e, t, range.clone())?, i, j));
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut out = vec![(None, 1.0); truths.len()];
    let mut used = vec![false; estimates.len()];
    for (e, i, j) in pairs {
        if out[i].0.is_none() && !used[j] {
            out[i] = (Some(j), e);
            used[j] = true;
        }
    }
    for (i, t) in truths.iter().enumerate() {
        if out[i].0.is_none() {
            let zero = SampledSignal::new(vec![Complex64::new(0.0, 0.0); t.len()], t.sample_rate(), t.start_time(), t.is_real())?;
            out[i].1 = rmse_range(&zero, t, range.clone())?;
        }
    }
    Ok(out)
}

/// Finds a root of `f` in `[a, b]` by bisection; `f(a)` and `f(b)` must
/// have opposite signs.
pub fn bisect(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> Option<f64> {
    let (mut fa, fb) = (f(a), f(b));
    if fa * fb > 0.0 {
        return None;
    }
    while b - a > tol {
        let m = 0.5 * (a + b);
        let fm = f(m);
        if fa * fm <= 0.0 {
            b = m;
        } else {
            a = m;
            fa = fm;
        }
    }
    Some(0.5 * (a + b))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd_check(c: &TruthComponent, ts: impl Iterator<Item = f64>) {
        let h = 1e-5;
        for t in ts {
            let fd = (c.phase(t + h) - c.phase(t - h)) / (2.0 * h);
            let f = c.inst_freq(t);
            assert!((fd - f).abs() <= 1e-6 * f.abs().max(1.0), "{} IF at {t}: {fd} vs {f}", c.name);
            let fd2 = (c.inst_freq(t + h) - c.inst_freq(t - h)) / (2.0 * h);
            let r = c.chirp_rate(t);
            assert!((fd2 - r).abs() <= 1e-6 * r.abs().max(1.0), "{} chirp at {t}: {fd2} vs {r}", c.name);
        }
    }

    #[test]
    fn two_component_values() {
        let (x, g) = gen_two_component(20.0, 256).unwrap();
        assert_eq!(x.len(), 256);
        assert!((x.samples()[0].re - (1f64.cos() + 1.0)).abs() < 1e-15);
        assert!((g.time(255) - 12.75).abs() < 1e-12);
        let t0 = bisect(|t| g.components[0].inst_freq(t) - g.components[1].inst_freq(t), 2.0, 5.0, 1e-12).unwrap();
        assert!((t0 - 3.381_293_824_239_09).abs() < 1e-9, "{t0}");
        for c in &g.components {
            fd_check(c, (1..60).map(|i| i as f64 * 0.2));
        }
    }

    #[test]
    fn two_lfm_crossing() {
        let n = 256.0;
        let (c1, c2, r1, r2) = (15.0 / n, 43.0 / n, 43.0 / (n * n), -20.0 / (n * n));
        let (_, g) = gen_two_lfm(1.0, 256, c1, r1, c2, r2).unwrap();
        let t0 = lfm_crossing(c1, r1, c2, r2).unwrap();
        assert!((t0 - 28.0 * n / 63.0).abs() < 1e-9);
        let root = bisect(|t| g.components[0].inst_freq(t) - g.components[1].inst_freq(t), 0.0, 255.0, 1e-10).unwrap();
        assert!((root - t0).abs() < 1e-8);
        for c in &g.components {
            fd_check(c, (1..25).map(|i| i as f64 * 10.0));
        }
    }

    #[test]
    fn tones_when_rates_vanish() {
        let (x, _) = gen_two_lfm(1.0, 64, 0.1, 0.0, 0.3, 0.0).unwrap();
        for (k, z) in x.samples().iter().enumerate() {
            let t = k as f64;
            let want = (2.0 * PI * 0.1 * t).cos() + (2.0 * PI * 0.3 * t).cos();
            assert!((z.re - want).abs() < 1e-12);
        }
        assert_eq!(lfm_crossing(0.1, 0.0, 0.3, 0.0), None);
    }

    #[test]
    fn trend_signal_start_and_crossing() {
        let (x, g) = gen_s_with_trend(8000.0, 1 << 14).unwrap();
        assert!((x.samples()[0].re - 3.2).abs() < 1e-12);
        assert!(g.has_trend());
        let t0 = bisect(|t| g.components[0].inst_freq(t) - 1219.0, 0.0, 0.045, 1e-13).unwrap();
        let analytic = (69.0f64 / 900.0).acos() / (20.0 * PI);
        assert!((t0 - analytic).abs() < 1e-10);
        assert!((t0 - 0.023_778_613_597_98).abs() < 1e-11, "{t0}");
        for c in &g.components {
            fd_check(c, (1..40).map(|i| i as f64 * 0.05));
        }
        assert!(gen_s_with_trend(4000.0, 100).is_err());
    }

    #[test]
    fn sinusoidal_fm() {
        let (x, g) = gen_sinusoidal_fm(1000.0, 500, 100.0, 0.0, 3.0, 2.0).unwrap();
        for (k, z) in x.samples().iter().enumerate() {
            assert!((z.re - 2.0 * (2.0 * PI * 100.0 * k as f64 / 1000.0).cos()).abs() < 1e-9);
        }
        assert_eq!(g.components[0].inst_freq(0.3), 100.0);
        let (_, g) = gen_sinusoidal_fm(1000.0, 500, 100.0, 20.0, 3.0, 1.0).unwrap();
        fd_check(&g.components[0], (1..20).map(|i| i as f64 * 0.05));
        let a = gen_sinusoidal_fm_phased(1000.0, 1000, 200.0, 30.0, 2.0, 1.0, 0.0).unwrap();
        let b = gen_sinusoidal_fm_phased(1000.0, 1000, 200.0, 30.0, 2.0, 1.0, PI).unwrap();
        let (_, both) = combine(vec![a, b]).unwrap();
        let d = |t: f64| both.components[0].inst_freq(t) - both.components[1].inst_freq(t);
        assert!(bisect(d, 0.05, 0.2, 1e-9).is_some());
    }

    #[test]
    fn generators_are_pure() {
        let a = gen_s_with_trend(8000.0, 2048).unwrap().0;
        let b = gen_s_with_trend(8000.0, 2048).unwrap().0;
        assert_eq!(a, b);
    }

    #[test]
    fn awgn_snr_and_determinism() {
        let (x, _) = gen_s_with_trend(8000.0, 1 << 14).unwrap();
        for snr in [-10.0, 0.0, 10.0, 20.0] {
            let y = add_awgn(&x, snr, 7).unwrap();
            let noise: f64 = y.samples().iter().zip(x.samples()).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>() / x.len() as f64;
            let measured = 10.0 * (x.power() / noise).log10();
            assert!((measured - snr).abs() < 0.2, "{measured} vs {snr}");
        }
        assert_eq!(add_awgn(&x, 5.0, 1).unwrap(), add_awgn(&x, 5.0, 1).unwrap());
        assert_ne!(add_awgn(&x, 5.0, 1).unwrap(), add_awgn(&x, 5.0, 2).unwrap());
        assert_eq!(add_awgn(&x, NO_NOISE, 1).unwrap(), x);
        let zero = SampledSignal::from_real(&[0.0; 8], 1.0, 0.0).unwrap();
        assert!(add_awgn(&zero, 0.0, 1).is_err());
    }

    #[test]
    fn rmse_basics() {
        let (x, _) = gen_two_component(20.0, 256).unwrap();
        assert_eq!(rmse(&x, &x, 10).unwrap(), 0.0);
        let zero = SampledSignal::from_real(&[0.0; 256], 20.0, 0.0).unwrap();
        assert!((rmse(&zero, &x, 10).unwrap() - 1.0).abs() < 1e-15);
        assert!(rmse(&zero, &x, 128).is_err());
    }

    #[test]
    fn rmse_of_noise_matches_expectation() {
        let (x, _) = gen_two_lfm(1.0, 4096, 0.1, 0.0, 0.27, 1e-5).unwrap();
        let snr = 6.0;
        let expected = 10f64.powf(-snr / 20.0);
        let mean = (0..20u64)
            .map(|seed| rmse(&add_awgn(&x, snr, seed).unwrap(), &x, 0).unwrap())
            .sum::<f64>()
            / 20.0;
        assert!((mean - expected).abs() < 0.05 * expected, "{mean} vs {expected}");
    }

    #[test]
    fn matching_pairs_best_first() {
        let (_, g) = gen_two_lfm(1.0, 128, 0.1, 0.0, 0.3, 0.0).unwrap();
        let (a, b) = (g.component_signal(0), g.component_signal(1));
        let got = match_components(&[a.clone(), b.clone()], &[&b, &a], 0..128).unwrap();
        assert_eq!(got, vec![(Some(1), 0.0), (Some(0), 0.0)]);
        let got = match_components(&[a.clone(), b.clone()], &[&b], 0..128).unwrap();
        assert_eq!(got[1], (Some(0), 0.0));
        assert_eq!(got[0], (None, 1.0));
    }
}
