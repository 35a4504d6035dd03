//! Sliding-window processing of an unbounded sample stream.
//!
//! Each new frame costs one chirplet slice. A frame is matched, clustered
//! and handed to the track linker once the `b` slices after it exist, and
//! its components are solved and synthesised as soon as the linker
//! finalises it. Results equal the batch pipeline on the same samples.

use std::collections::VecDeque;

use num_complex::Complex64;

use crate::error::{invalid, Result};
use crate::matchedfilter::{frame_ridge, matched_frame, LineShifts};
use crate::model::{frame_count, AnalysisConfig, ChirpRateGrid, FrequencyGrid, RidgePoint, SampledSignal, ThresholdPolicy};
use crate::ridges::{cluster_frame, drop_trend_leakage, slice_threshold, ClusterParams, LinkParams, LinkStats, LinkedFrame, TrackLinker};
use crate::refine::refine_candidates;
use crate::separation::{frame_sample_range, separate_frame, synthesize_frame, FrameComponents, FrameSolve, Method};
use crate::transforms::ChirpletEngine;

/// Sampling description of the incoming stream.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StreamFormat {
    pub sample_rate: f64,
    pub start_time: f64,
    pub is_real: bool,
}

impl StreamFormat {
    pub fn of(x: &SampledSignal) -> Self {
        Self {
            sample_rate: x.sample_rate(),
            start_time: x.start_time(),
            is_real: x.is_real(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StreamComponent {
    pub component: usize,
    pub is_trend: bool,
    pub point: RidgePoint,
    /// Solved coefficient at the ridge.
    pub value: Complex64,
    pub amplitude: f64,
    /// Reconstructed samples starting at the frame's `sample_start`.
    pub samples: Vec<Complex64>,
}

/// Everything emitted for one finished frame.
#[derive(Debug, Clone, PartialEq)]
pub struct StreamFrame {
    pub frame: usize,
    pub time: f64,
    pub sample_start: usize,
    pub components: Vec<StreamComponent>,
    pub solve: FrameSolve,
}

#[derive(Debug)]
pub struct StreamProcessor {
    engine: ChirpletEngine,
    format: StreamFormat,
    method: Method,
    hop: usize,
    refine: bool,
    include_trend: bool,
    policy: ThresholdPolicy,
    cluster: ClusterParams,
    shifts: LineShifts,
    linker: TrackLinker,
    // samples[i] is absolute sample `sample_base + i`
    samples: VecDeque<Complex64>,
    sample_base: usize,
    received: usize,
    // slices[i] and mags[i] belong to frame `slice_base + i`
    slices: VecDeque<Vec<Complex64>>,
    mags: VecDeque<Vec<f64>>,
    slice_base: usize,
    next_slice: usize,
    next_matched: usize,
    next_final: usize,
    solved: VecDeque<FrameComponents>,
    slices_computed: usize,
    flushed: bool,
}

impl StreamProcessor {
    pub fn new(
        cfg: &AnalysisConfig,
        format: StreamFormat,
        freq_grid: FrequencyGrid,
        chirp_grid: ChirpRateGrid,
        method: Method,
    ) -> Result<Self> {
        cfg.validate()?;
        if let ThresholdPolicy::GlobalFraction(_) = cfg.threshold_policy {
            return invalid("a global-fraction threshold needs the whole cube and cannot be streamed");
        }
        if !format.start_time.is_finite() {
            return invalid("start time must be finite");
        }
        let engine = ChirpletEngine::from_config(cfg, format.sample_rate, freq_grid, chirp_grid)?;
        let hop_s = cfg.frame_hop as f64 / format.sample_rate;
        let link = LinkParams::from_config(cfg, engine.freq_grid(), engine.chirp_grid(), hop_s)?;
        let shifts = LineShifts::new(cfg.matched_half_width_b, engine.freq_grid(), engine.chirp_grid(), hop_s);
        Ok(Self {
            engine,
            format,
            method,
            hop: cfg.frame_hop,
            refine: cfg.refine_ridges,
            include_trend: cfg.include_trend,
            policy: cfg.threshold_policy,
            cluster: ClusterParams::from(cfg),
            shifts,
            linker: TrackLinker::new(link),
            samples: VecDeque::new(),
            sample_base: 0,
            received: 0,
            slices: VecDeque::new(),
            mags: VecDeque::new(),
            slice_base: 0,
            next_slice: 0,
            next_matched: 0,
            next_final: 0,
            solved: VecDeque::new(),
            slices_computed: 0,
            flushed: false,
        })
    }

    /// Uses the grids implied by the configuration's frame length.
    pub fn with_default_grids(cfg: &AnalysisConfig, format: StreamFormat, method: Method) -> Result<Self> {
        let (f, c) = crate::model::make_grids(cfg.resolved_frame_len(format.sample_rate), format.sample_rate, format.is_real)?;
        Self::new(cfg, format, f, c, method)
    }

    pub fn format(&self) -> StreamFormat {
        self.format
    }

    pub fn samples_received(&self) -> usize {
        self.received
    }

    /// Chirplet slices computed so far.
    pub fn slices_computed(&self) -> usize {
        self.slices_computed
    }

    /// Frames held back by the matched filter.
    pub fn latency_frames(&self) -> usize {
        self.shifts.b()
    }

    pub fn link_stats(&self) -> LinkStats {
        self.linker.stats()
    }

    /// Appends a chunk that must share the stream's sample rate and kind.
    pub fn push_samples(&mut self, chunk: &SampledSignal) -> Result<Vec<StreamFrame>> {
        let fs = self.format.sample_rate;
        if (chunk.sample_rate() - fs).abs() > 1e-12 * fs {
            return invalid(format!("chunk sample rate {} Hz differs from the stream's {fs} Hz", chunk.sample_rate()));
        }
        if chunk.is_real() != self.format.is_real {
            return invalid("chunk and stream disagree on real versus complex samples");
        }
        self.push(chunk.samples())
    }

    /// Appends raw samples at the stream's rate.
    pub fn push(&mut self, chunk: &[Complex64]) -> Result<Vec<StreamFrame>> {
        if self.flushed {
            return invalid("stream has already been flushed");
        }
        if chunk.is_empty() {
            return Ok(Vec::new());
        }
        if chunk.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return invalid("chunk contains non-finite samples");
        }
        if self.format.is_real && chunk.iter().any(|z| z.im != 0.0) {
            return invalid("real stream received samples with imaginary parts");
        }
        self.samples.extend(chunk.iter().copied());
        self.received += chunk.len();
        let w = self.engine.window().half_width();
        while self.next_slice * self.hop + w < self.received {
            self.compute_slice();
        }
        let b = self.shifts.b();
        while self.next_matched + b < self.next_slice {
            self.match_frame(None);
        }
        self.trim();
        Ok(self.emit(false))
    }

    /// Ends the stream: pads past the last sample like the batch transform
    /// and emits every remaining frame.
    pub fn flush(&mut self) -> Result<Vec<StreamFrame>> {
        if self.flushed {
            return Ok(Vec::new());
        }
        self.flushed = true;
        if self.received == 0 {
            return Ok(Vec::new());
        }
        let support = self.engine.window().support();
        if self.received < support {
            return invalid(format!(
                "signal of {} samples is shorter than the {support}-sample window",
                self.received
            ));
        }
        let n_frames = frame_count(self.received, self.hop);
        while self.next_slice < n_frames {
            self.compute_slice();
        }
        while self.next_matched < n_frames {
            self.match_frame(Some(n_frames));
        }
        let tail = self.linker.finish();
        self.solve(tail);
        Ok(self.emit(true))
    }

    fn frame_time(&self, frame: usize) -> f64 {
        self.format.start_time + (frame * self.hop) as f64 / self.format.sample_rate
    }

    fn compute_slice(&mut self) {
        let w = self.engine.window().half_width() as i64;
        let centre = (self.next_slice * self.hop) as i64;
        let segment: Vec<Complex64> = (centre - w..=centre + w)
            .map(|k| {
                if k < self.sample_base as i64 || k >= self.received as i64 {
                    // only reached before the start or past the end at flush
                    Complex64::new(0.0, 0.0)
                } else {
                    self.samples[k as usize - self.sample_base]
                }
            })
            .collect();
        let mut out = vec![Complex64::new(0.0, 0.0); self.engine.frame_cells()];
        self.engine.frame(&segment, &mut out);
        self.mags.push_back(out.iter().map(|z| z.norm()).collect());
        self.slices.push_back(out);
        self.next_slice += 1;
        self.slices_computed += 1;
    }

    fn match_frame(&mut self, n_frames: Option<usize>) {
        let t = self.next_matched;
        let b = self.shifts.b();
        let end = n_frames.unwrap_or(self.next_slice);
        let neighbours: Vec<Option<&[f64]>> = (0..=2 * b)
            .map(|i| {
                let f = t as i64 + i as i64 - b as i64;
                (f >= 0 && (f as usize) < end).then(|| self.mags[f as usize - self.slice_base].as_slice())
            })
            .collect();
        let (nf, nc) = (self.engine.freq_grid().len(), self.engine.chirp_grid().len());
        let mut matched = vec![0.0; nf * nc];
        matched_frame(&neighbours, &self.shifts, nf, &mut matched);
        let threshold = slice_threshold(&matched, self.policy, 0.0);
        let clusters = cluster_frame(t, &matched, nf, nc, threshold, self.cluster);
        let time = self.frame_time(t);
        let mut cands = frame_ridge(
            t,
            time,
            &matched,
            &self.slices[t - self.slice_base],
            &clusters,
            self.engine.freq_grid(),
            self.engine.chirp_grid(),
        );
        let sigma = self.engine.window().sigma();
        let slice = &self.slices[t - self.slice_base];
        let (fg, cg) = (self.engine.freq_grid(), self.engine.chirp_grid());
        if self.include_trend {
            drop_trend_leakage(&mut cands, slice, fg, cg, sigma);
        }
        if self.refine {
            refine_candidates(&mut cands, slice, fg, cg, sigma, self.include_trend);
        }
        self.next_matched += 1;
        let linked = self.linker.push(t, time, &cands);
        self.solve(linked);
    }

    fn solve(&mut self, linked: Vec<LinkedFrame>) {
        let nc = self.engine.chirp_grid().len();
        for lf in linked {
            debug_assert_eq!(lf.frame, self.next_final);
            let slice = &self.slices[lf.frame - self.slice_base];
            let points: Vec<(usize, bool, RidgePoint)> = lf
                .points
                .iter()
                .map(|&(c, trend, mut p)| {
                    p.magnitude = slice[p.freq_bin * nc + p.chirp_bin].norm();
                    (c, trend, p)
                })
                .collect();
            let sigma = self.engine.window().sigma();
            let fc = separate_frame(
                lf.frame,
                slice,
                &points,
                self.engine.freq_grid(),
                self.engine.chirp_grid(),
                sigma,
                self.method,
            )
            .expect("linked ridge points lie on the grid");
            self.solved.push_back(fc);
            self.next_final += 1;
        }
    }

    // Drops samples and slices no later frame can touch.
    fn trim(&mut self) {
        let b = self.shifts.b();
        let keep_frame = self.next_final.min(self.next_matched.saturating_sub(b));
        while self.slice_base < keep_frame {
            self.slices.pop_front();
            self.mags.pop_front();
            self.slice_base += 1;
        }
        let w = self.engine.window().half_width();
        let keep_sample = (self.next_slice * self.hop).saturating_sub(w).min(self.received);
        while self.sample_base < keep_sample {
            self.samples.pop_front();
            self.sample_base += 1;
        }
    }

    // A solved frame is synthesised once it is known not to be the last
    // one, or at flush.
    fn emit(&mut self, at_end: bool) -> Vec<StreamFrame> {
        let mut out = Vec::new();
        let n_frames = frame_count(self.received, self.hop);
        while let Some(fc) = self.solved.front() {
            let j = fc.frame;
            let is_last = at_end && j + 1 == n_frames;
            if !at_end && self.received <= (j + 1) * self.hop {
                break;
            }
            let fc = self.solved.pop_front().expect("front exists");
            out.push(self.synthesize(fc, is_last));
        }
        out
    }

    fn synthesize(&self, fc: FrameComponents, is_last: bool) -> StreamFrame {
        let j = fc.frame;
        let range = frame_sample_range(j, self.hop, is_last, if is_last { self.received } else { usize::MAX });
        let real = self.format.is_real;
        let components = fc
            .entries
            .iter()
            .map(|&(component, is_trend, point, value)| {
                let mut samples = vec![Complex64::new(0.0, 0.0); range.len()];
                synthesize_frame(
                    value,
                    &point,
                    j,
                    self.hop,
                    self.format.sample_rate,
                    range.clone(),
                    real.then_some(is_trend),
                    &mut samples,
                );
                StreamComponent {
                    component,
                    is_trend,
                    point,
                    value,
                    amplitude: if real && !is_trend { 2.0 * value.norm() } else { value.norm() },
                    samples,
                }
            })
            .collect();
        StreamFrame {
            frame: j,
            time: self.frame_time(j),
            sample_start: range.start,
            components,
            solve: fc.solve,
        }
    }
}
