//! Mode reconstruction from ridges: single-ridge read-off and the group
//! solve that removes cross-talk between nearby components.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::ops::Range;

use crate::error::{invalid, Result};
use crate::model::{ChirpRateGrid, ComponentEstimate, FrequencyGrid, RidgePoint, RidgeSet, SampledSignal, TFCCube};
use crate::transforms::{amplitude_kernel, omega_kernel};

const CONDITION_LIMIT: f64 = 1e8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// Read each component straight off the transform at its ridge.
    Ct3s,
    /// Solve the per-frame mixing system.
    #[default]
    Gfct3s,
}

/// `A(λm−λl)·Ω(λm−λl, ηm−ηl)`.
pub fn mixing_entry(eta_m: f64, lambda_m: f64, eta_l: f64, lambda_l: f64, sigma: f64) -> Complex64 {
    let dl = lambda_m - lambda_l;
    amplitude_kernel(sigma, dl) * omega_kernel(sigma, dl, eta_m - eta_l)
}

/// Mixing matrix of one frame, row-major.
#[derive(Debug, Clone)]
pub struct MixingMatrix {
    size: usize,
    entries: Vec<Complex64>,
    condition: f64,
}

impl MixingMatrix {
    /// Builds the matrix from `(eta, lambda)` ridge positions.
    pub fn new(positions: &[(f64, f64)], sigma: f64) -> Self {
        Self::between(positions, positions, sigma)
    }

    /// Response at observation cell `m` of a unit component at position `l`.
    pub fn between(cells: &[(f64, f64)], positions: &[(f64, f64)], sigma: f64) -> Self {
        assert_eq!(cells.len(), positions.len(), "one observation per component");
        let size = positions.len();
        let mut entries = Vec::with_capacity(size * size);
        for &(em, lm) in cells {
            for &(el, ll) in positions {
                entries.push(mixing_entry(em, lm, el, ll, sigma));
            }
        }
        let mut m = Self {
            size,
            entries,
            condition: 1.0,
        };
        if size > 0 {
            let sv = m.to_matrix().singular_values();
            let (hi, lo) = (sv.max(), sv.min());
            m.condition = if lo > 0.0 { hi / lo } else { f64::INFINITY };
        }
        m
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn get(&self, m: usize, l: usize) -> Complex64 {
        self.entries[m * self.size + l]
    }

    pub fn condition(&self) -> f64 {
        self.condition
    }

    fn to_matrix(&self) -> DMatrix<Complex64> {
        DMatrix::from_row_slice(self.size, self.size, &self.entries)
    }
}

/// Per-frame solve diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameSolve {
    pub frame: usize,
    pub size: usize,
    pub condition: f64,
    pub damped: bool,
    /// The solve failed and the single-ridge values were kept.
    pub fallback: bool,
}

/// Solves `A X = observed` for one frame.
pub fn solve_frame(frame: usize, positions: &[(f64, f64)], observed: &[Complex64], sigma: f64, method: Method) -> (Vec<Complex64>, FrameSolve) {
    solve_frame_at(frame, positions, positions, observed, sigma, method)
}

/// As [`solve_frame`], with the transform observed at grid `cells` rather
/// than at the (possibly off-grid) ridge positions.
pub fn solve_frame_at(
    frame: usize,
    cells: &[(f64, f64)],
    positions: &[(f64, f64)],
    observed: &[Complex64],
    sigma: f64,
    method: Method,
) -> (Vec<Complex64>, FrameSolve) {
    let mut info = FrameSolve {
        frame,
        size: positions.len(),
        condition: 1.0,
        damped: false,
        fallback: false,
    };
    if method == Method::Ct3s || (positions.len() < 2 && cells == positions) {
        return (observed.to_vec(), info);
    }
    let a = MixingMatrix::between(cells, positions, sigma);
    info.condition = a.condition;
    let am = a.to_matrix();
    let b = DVector::from_column_slice(observed);
    let solved = if a.condition <= CONDITION_LIMIT {
        am.clone().lu().solve(&b)
    } else {
        info.damped = true;
        damped_solve(&am, &b)
    };
    match solved {
        Some(x) if x.iter().all(|z| z.re.is_finite() && z.im.is_finite()) => (x.iter().copied().collect(), info),
        _ => {
            info.fallback = true;
            (observed.to_vec(), info)
        }
    }
}

// Tikhonov-regularised least squares through the SVD.
fn damped_solve(a: &DMatrix<Complex64>, b: &DVector<Complex64>) -> Option<DVector<Complex64>> {
    let max_row = a.row_iter().map(|r| r.norm()).fold(0.0, f64::max);
    let eps = 1e-8 * max_row;
    let svd = a.clone().svd(true, true);
    let u = svd.u.as_ref()?;
    let v_t = svd.v_t.as_ref()?;
    let mut x = DVector::zeros(a.ncols());
    for (i, &s) in svd.singular_values.iter().enumerate() {
        let coef = u.column(i).dotc(b) * (s / (s * s + eps * eps));
        x += v_t.row(i).adjoint() * coef;
    }
    Some(x)
}

/// Sample range reconstructed from frame `j`: every sample whose nearest
/// frame centre is `j`, the final frame also taking the tail.
pub fn frame_sample_range(j: usize, hop: usize, is_last: bool, n: usize) -> Range<usize> {
    let lo = (j * hop).saturating_sub(hop / 2);
    let hi = if is_last { n } else { (j * hop + hop - hop / 2).min(n) };
    lo..hi
}

/// Local linear-chirp model of a component around frame `j`, evaluated on
/// `range`. Real signals take `2 Re` (or `Re` for the trend).
pub fn synthesize_frame(value: Complex64, point: &RidgePoint, j: usize, hop: usize, sample_rate: f64, range: Range<usize>, real: Option<bool>, out: &mut [Complex64]) {
    let centre = (j * hop) as f64;
    for (k, o) in range.zip(out.iter_mut()) {
        let tau = (k as f64 - centre) / sample_rate;
        let phase = 2.0 * PI * (point.eta * tau + 0.5 * point.lambda * tau * tau);
        let z = value * Complex64::from_polar(1.0, phase);
        *o = match real {
            None => z,
            Some(true) => Complex64::new(z.re, 0.0),
            Some(false) => Complex64::new(2.0 * z.re, 0.0),
        };
    }
}

/// Solved value of every component present at a frame.
#[derive(Debug, Clone)]
pub struct FrameComponents {
    pub frame: usize,
    /// `(component, is_trend, point, value)`.
    pub entries: Vec<(usize, bool, RidgePoint, Complex64)>,
    pub solve: FrameSolve,
}

/// Reads the cube at the ridge of every component present in `frame` and
/// solves for the component values.
pub fn separate_frame(
    frame: usize,
    slice: &[Complex64],
    points: &[(usize, bool, RidgePoint)],
    freq_grid: &FrequencyGrid,
    chirp_grid: &ChirpRateGrid,
    sigma: f64,
    method: Method,
) -> Result<FrameComponents> {
    let n_chirp = chirp_grid.len();
    let mut cells = Vec::with_capacity(points.len());
    let mut positions = Vec::with_capacity(points.len());
    let mut observed = Vec::with_capacity(points.len());
    for (_, _, p) in points {
        if freq_grid.nearest(p.eta).is_none() || chirp_grid.nearest(p.lambda).is_none() {
            return invalid(format!("ridge point ({}, {}) at frame {frame} is off the cube grid", p.eta, p.lambda));
        }
        // observe at the ridge's own cell, which may sit off its refined position
        let (k, j) = (p.freq_bin.min(freq_grid.len() - 1), p.chirp_bin.min(n_chirp - 1));
        cells.push((freq_grid.value(k), chirp_grid.value(j)));
        positions.push((p.eta, p.lambda));
        observed.push(slice[k * n_chirp + j]);
    }
    let (values, solve) = solve_frame_at(frame, &cells, &positions, &observed, sigma, method);
    Ok(FrameComponents {
        frame,
        entries: points.iter().zip(values).map(|(&(c, t, p), v)| (c, t, p, v)).collect(),
        solve,
    })
}

/// Output of a batch separation.
#[derive(Debug, Clone)]
pub struct Separation {
    pub components: Vec<ComponentEstimate>,
    pub frames: Vec<FrameSolve>,
}

impl Separation {
    pub fn flagged_frames(&self) -> usize {
        self.frames.iter().filter(|f| f.fallback).count()
    }
}

/// Accumulates per-frame solutions into component waveforms and tracks.
#[derive(Debug)]
pub struct ComponentBuilder {
    hop: usize,
    sample_rate: f64,
    is_real: bool,
    n: usize,
    start_time: f64,
    frame_times: Vec<f64>,
    components: Vec<(usize, bool)>,
    waves: Vec<Vec<Complex64>>,
    amp: Vec<Vec<f64>>,
    ifs: Vec<Vec<f64>>,
    chirps: Vec<Vec<f64>>,
}

impl ComponentBuilder {
    pub fn new(ridge: &RidgeSet, cube: &TFCCube) -> Self {
        let nf = cube.n_frames();
        let n = cube.signal_len();
        let components: Vec<(usize, bool)> = ridge.tracks.iter().map(|t| (t.component, t.is_trend)).collect();
        let k = components.len();
        Self {
            hop: cube.hop(),
            sample_rate: cube.sample_rate(),
            is_real: cube.is_real(),
            n,
            start_time: cube.frame_times().first().copied().unwrap_or(0.0),
            frame_times: cube.frame_times().to_vec(),
            components,
            waves: vec![vec![Complex64::new(0.0, 0.0); n]; k],
            amp: vec![vec![0.0; nf]; k],
            ifs: vec![vec![f64::NAN; nf]; k],
            chirps: vec![vec![f64::NAN; nf]; k],
        }
    }

    pub fn add(&mut self, fc: &FrameComponents) {
        let nf = self.frame_times.len();
        let j = fc.frame;
        let range = frame_sample_range(j, self.hop, j + 1 == nf, self.n);
        for &(c, is_trend, p, v) in &fc.entries {
            let Some(slot) = self.components.iter().position(|&(cc, _)| cc == c) else { continue };
            let real = self.is_real.then_some(is_trend);
            let out = &mut self.waves[slot][range.clone()];
            synthesize_frame(v, &p, j, self.hop, self.sample_rate, range.clone(), real, out);
            self.amp[slot][j] = if self.is_real && !is_trend { 2.0 * v.norm() } else { v.norm() };
            self.ifs[slot][j] = p.eta;
            self.chirps[slot][j] = p.lambda;
        }
    }

    pub fn finish(self) -> Result<Vec<ComponentEstimate>> {
        let mut out = Vec::with_capacity(self.components.len());
        for (i, (c, is_trend)) in self.components.into_iter().enumerate() {
            let waveform = if self.is_real {
                let re: Vec<f64> = self.waves[i].iter().map(|z| z.re).collect();
                SampledSignal::from_real(&re, self.sample_rate, self.start_time)?
            } else {
                SampledSignal::from_complex(self.waves[i].clone(), self.sample_rate, self.start_time)?
            };
            out.push(ComponentEstimate {
                component: c,
                is_trend,
                waveform,
                amplitude_track: self.amp[i].clone(),
                if_track: self.ifs[i].clone(),
                chirp_track: self.chirps[i].clone(),
                frame_times: self.frame_times.clone(),
            });
        }
        Ok(out)
    }
}

/// Separates every component of `ridge` from `cube`.
pub fn separate(cube: &TFCCube, ridge: &RidgeSet, method: Method) -> Result<Separation> {
    if ridge.n_frames() != cube.n_frames() {
        return invalid("ridge and cube have different frame counts");
    }
    let frames: Vec<FrameComponents> = (0..cube.n_frames())
        .into_par_iter()
        .map(|f| {
            let points: Vec<(usize, bool, RidgePoint)> = ridge
                .tracks
                .iter()
                .filter_map(|t| t.point_at(f).map(|p| (t.component, t.is_trend, *p)))
                .collect();
            separate_frame(f, cube.frame(f), &points, cube.freq_grid(), cube.chirp_grid(), cube.sigma(), method)
        })
        .collect::<Result<_>>()?;
    let mut builder = ComponentBuilder::new(ridge, cube);
    for fc in &frames {
        builder.add(fc);
    }
    Ok(Separation {
        components: builder.finish()?,
        frames: frames.into_iter().map(|f| f.solve).collect(),
    })
}

/// Single-ridge reconstruction.
pub fn ct3s_reconstruct(cube: &TFCCube, ridge: &RidgeSet) -> Result<Vec<ComponentEstimate>> {
    Ok(separate(cube, ridge, Method::Ct3s)?.components)
}

/// Group reconstruction through the per-frame mixing solve.
pub fn gfct3s_separate(cube: &TFCCube, ridge: &RidgeSet) -> Result<Separation> {
    separate(cube, ridge, Method::Gfct3s)
}

/// `min(1, (L²/(B₁²N²Δ))^(1/3))`; the window width is then `c0/α²`.
pub fn choose_c0(l: f64, b1: f64, n_support: f64, delta: f64) -> Result<f64> {
    if [l, b1, n_support, delta].iter().any(|v| !(v.is_finite() && *v > 0.0)) {
        return invalid("choose_c0 needs positive finite inputs");
    }
    Ok((l * l / (b1 * b1 * n_support * n_support * delta)).cbrt().min(1.0))
}
