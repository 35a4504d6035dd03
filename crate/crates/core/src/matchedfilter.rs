//! Time-frequency filter-matched chirplet transform.
//!
//! For every cell the magnitude of the cube is averaged along the line
//! `eta + lambda u` over `u` in `[-b, b]` frames with a rectangular window.
//! Shifted frequencies snap to the nearest bin; terms that fall outside the
//! frame range or the frequency grid are dropped and the average is taken
//! over the remaining ones.

use rayon::prelude::*;

use crate::error::{invalid, Result};
use crate::model::{ChirpRateGrid, FrequencyGrid, RidgePoint, TFCCube};
use crate::ridges::FrameClusters;

#[derive(Debug, Clone)]
pub struct MatchedCube {
    pub(crate) data: Vec<f64>,
    pub(crate) frame_times: Vec<f64>,
    pub(crate) freq_grid: FrequencyGrid,
    pub(crate) chirp_grid: ChirpRateGrid,
    pub(crate) half_width_b: usize,
    pub(crate) sigma: f64,
    pub(crate) hop: usize,
    pub(crate) signal_len: usize,
    pub(crate) sample_rate: f64,
    pub(crate) is_real: bool,
}

impl MatchedCube {
    pub fn dims(&self) -> (usize, usize, usize) {
        (self.frame_times.len(), self.freq_grid.len(), self.chirp_grid.len())
    }

    #[inline]
    pub fn get(&self, frame: usize, freq: usize, chirp: usize) -> f64 {
        let (_, nf, nc) = self.dims();
        self.data[(frame * nf + freq) * nc + chirp]
    }

    pub fn frame(&self, frame: usize) -> &[f64] {
        let stride = self.freq_grid.len() * self.chirp_grid.len();
        &self.data[frame * stride..(frame + 1) * stride]
    }

    pub fn data(&self) -> &[f64] {
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

    pub fn half_width_b(&self) -> usize {
        self.half_width_b
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn hop(&self) -> usize {
        self.hop
    }

    pub fn signal_len(&self) -> usize {
        self.signal_len
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn is_real(&self) -> bool {
        self.is_real
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(0.0, f64::max)
    }
}

/// Frequency-bin offsets of the matched lines, indexed `[u + b][chirp]`.
#[derive(Debug, Clone)]
pub struct LineShifts {
    b: usize,
    n_chirp: usize,
    shifts: Vec<i64>,
}

impl LineShifts {
    pub fn new(b: usize, freq_grid: &FrequencyGrid, chirp_grid: &ChirpRateGrid, hop_seconds: f64) -> Self {
        let mut shifts = Vec::with_capacity((2 * b + 1) * chirp_grid.len());
        for u in -(b as i64)..=b as i64 {
            for &lambda in chirp_grid.values() {
                let dη = lambda * u as f64 * hop_seconds;
                shifts.push((dη / freq_grid.bin_width()).round() as i64);
            }
        }
        Self {
            b,
            n_chirp: chirp_grid.len(),
            shifts,
        }
    }

    pub fn b(&self) -> usize {
        self.b
    }

    #[inline]
    fn get(&self, u_index: usize, chirp: usize) -> i64 {
        self.shifts[u_index * self.n_chirp + chirp]
    }
}

/// Matched average for one frame. `neighbours[i]` holds the magnitude slice
/// of frame `t + i - b`, or `None` when that frame does not exist.
pub fn matched_frame(
    neighbours: &[Option<&[f64]>],
    shifts: &LineShifts,
    n_freq: usize,
    out: &mut [f64],
) {
    let n_chirp = shifts.n_chirp;
    debug_assert_eq!(neighbours.len(), 2 * shifts.b + 1);
    debug_assert_eq!(out.len(), n_freq * n_chirp);
    for k in 0..n_freq {
        for j in 0..n_chirp {
            let mut acc = 0.0;
            let mut count = 0usize;
            for (ui, slice) in neighbours.iter().enumerate() {
                let Some(slice) = slice else { continue };
                let kk = k as i64 + shifts.get(ui, j);
                if kk < 0 || kk >= n_freq as i64 {
                    continue;
                }
                acc += slice[kk as usize * n_chirp + j];
                count += 1;
            }
            out[k * n_chirp + j] = if count == 0 { 0.0 } else { acc / count as f64 };
        }
    }
}

/// Filter-matched chirplet transform with half width `b` frames.
pub fn filter_matched_ct(cube: &TFCCube, b: usize) -> Result<MatchedCube> {
    let (n_frames, n_freq, n_chirp) = cube.dims();
    if b >= n_frames {
        return invalid(format!("matched half width {b} must be smaller than the frame count {n_frames}"));
    }
    let cells = n_freq * n_chirp;
    let mags: Vec<f64> = cube.data().par_iter().map(|z| z.norm()).collect();
    let shifts = LineShifts::new(b, cube.freq_grid(), cube.chirp_grid(), cube.hop_seconds());
    let mut data = vec![0.0; mags.len()];
    data.par_chunks_mut(cells).enumerate().for_each(|(t, out)| {
        let neighbours: Vec<Option<&[f64]>> = (0..=2 * b)
            .map(|i| {
                let f = t as i64 + i as i64 - b as i64;
                (0..n_frames as i64)
                    .contains(&f)
                    .then(|| &mags[f as usize * cells..(f as usize + 1) * cells])
            })
            .collect();
        matched_frame(&neighbours, &shifts, n_freq, out);
    });
    Ok(MatchedCube {
        data,
        frame_times: cube.frame_times().to_vec(),
        freq_grid: cube.freq_grid().clone(),
        chirp_grid: cube.chirp_grid().clone(),
        half_width_b: b,
        sigma: cube.sigma(),
        hop: cube.hop(),
        signal_len: cube.signal_len(),
        sample_rate: cube.sample_rate(),
        is_real: cube.is_real(),
    })
}

/// Ridge candidates of one frame: the matched-cube argmax of every cluster,
/// with the magnitude read from the original transform.
pub fn frame_ridge(
    frame: usize,
    time: f64,
    matched: &[f64],
    original: &[num_complex::Complex64],
    clusters: &FrameClusters,
    freq_grid: &FrequencyGrid,
    chirp_grid: &ChirpRateGrid,
) -> Vec<RidgePoint> {
    let n_chirp = chirp_grid.len();
    clusters
        .clusters
        .iter()
        .enumerate()
        .filter_map(|(label, cluster)| {
            // cells are sorted, so the first maximum is the lexicographic tie-break
            let mut best: Option<((usize, usize), f64)> = None;
            for &(k, j) in &cluster.cells {
                let v = matched[k * n_chirp + j];
                if best.is_none_or(|(_, bv)| v > bv) {
                    best = Some(((k, j), v));
                }
            }
            best.map(|((k, j), _)| RidgePoint {
                frame,
                time,
                eta: freq_grid.value(k),
                lambda: chirp_grid.value(j),
                freq_bin: k,
                chirp_bin: j,
                magnitude: original[k * n_chirp + j].norm(),
                cluster: label,
            })
        })
        .collect()
}

/// Ridge of the filter-matched transform for every frame and cluster.
/// Empty clusters yield no point for that frame.
pub fn matched_ridge(mcube: &MatchedCube, cube: &TFCCube, clusters: &[FrameClusters]) -> Result<Vec<Vec<RidgePoint>>> {
    if mcube.dims() != cube.dims() {
        return invalid("matched cube and transform have different shapes");
    }
    Ok(clusters
        .iter()
        .map(|fc| {
            frame_ridge(
                fc.frame,
                cube.frame_times()[fc.frame],
                mcube.frame(fc.frame),
                cube.frame(fc.frame),
                fc,
                cube.freq_grid(),
                cube.chirp_grid(),
            )
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{make_grids, AnalysisConfig, SampledSignal};
    use crate::transforms::chirplet_transform;
    use num_complex::Complex64;
    use std::f64::consts::PI;

    fn lfm(n: usize, c: f64, r: f64) -> SampledSignal {
        let s = (0..n)
            .map(|k| {
                let t = k as f64;
                Complex64::from_polar(1.0, 2.0 * PI * (c * t + 0.5 * r * t * t))
            })
            .collect();
        SampledSignal::from_complex(s, 1.0, 0.0).unwrap()
    }

    #[test]
    fn zero_width_is_magnitude() {
        let x = lfm(96, 0.1, 0.001);
        let cfg = AnalysisConfig::new(4.0);
        let (f, c) = make_grids(32, 1.0, false).unwrap();
        let cube = chirplet_transform(&x, &cfg, &f, &c).unwrap();
        let m = filter_matched_ct(&cube, 0).unwrap();
        for (a, z) in m.data().iter().zip(cube.data()) {
            assert_eq!(*a, z.norm());
        }
    }

    #[test]
    fn width_must_fit_frames() {
        let x = lfm(40, 0.1, 0.0);
        let cfg = AnalysisConfig::new(2.0);
        let (f, c) = make_grids(32, 1.0, false).unwrap();
        let cube = chirplet_transform(&x, &cfg, &f, &c).unwrap();
        assert!(filter_matched_ct(&cube, 40).is_err());
        assert!(filter_matched_ct(&cube, 39).is_ok());
    }

    #[test]
    fn constant_slices_stay_constant() {
        let shifts = LineShifts::new(
            2,
            &FrequencyGrid::from_indices(0, 6, 1.0).unwrap(),
            &ChirpRateGrid::symmetric(1, 1.0).unwrap(),
            1.0,
        );
        let slice = vec![2.5; 18];
        let neigh: Vec<Option<&[f64]>> = vec![None, Some(&slice), Some(&slice), Some(&slice), None];
        let mut out = vec![0.0; 18];
        matched_frame(&neigh, &shifts, 6, &mut out);
        assert!(out.iter().all(|&v| (v - 2.5).abs() < 1e-15));
    }

    #[test]
    fn single_lfm_ridge_and_level() {
        let n = 256;
        let (c0, r) = (60.0 / 256.0, 30.0 / 65536.0);
        let x = lfm(n, c0, r);
        let mut cfg = AnalysisConfig::new(12.0);
        cfg.frame_len = Some(256);
        let (f, c) = make_grids(256, 1.0, false).unwrap();
        let cube = chirplet_transform(&x, &cfg, &f, &c).unwrap();
        let m = filter_matched_ct(&cube, 8).unwrap();
        let (_, nf, nc) = m.dims();
        for t in (64..192).step_by(8) {
            let slice = m.frame(t);
            let (best, peak) = slice
                .iter()
                .enumerate()
                .fold((0, -1.0), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
            let (k, j) = (best / nc, best % nc);
            assert!(k < nf);
            assert!((f.value(k) - (c0 + r * t as f64)).abs() <= 0.5 * f.bin_width() + 1e-12);
            assert!((c.value(j) - r).abs() < 1e-15);
            assert!((peak - 1.0).abs() < 0.02, "peak {peak} at t={t}");
        }
    }
}
