//! Ridge extraction: per-frame thresholding and clustering of the
//! (frequency, chirp) plane, and linking of per-frame peaks into tracks.

use std::collections::{BTreeMap, HashMap, VecDeque};

use rayon::prelude::*;

use crate::error::{invalid, Result};
use crate::matchedfilter::MatchedCube;
use crate::model::{AnalysisConfig, ChirpRateGrid, FrequencyGrid, RidgePoint, RidgeSet, RidgeTrack, ThresholdPolicy};
use crate::transforms::{amplitude_kernel, omega_kernel};

/// Candidates within this many bins of the `(0, 0)` cell join the trend.
pub const TREND_RADIUS: usize = 2;
/// A candidate no stronger than this multiple of the trend's own response
/// at its cell is attributed to the trend.
pub const TREND_LEAKAGE_RATIO: f64 = 1.5;

/// Connected set of above-threshold cells in one frame slice.
#[derive(Debug, Clone, PartialEq)]
pub struct Cluster {
    /// `(freq_bin, chirp_bin)` cells, sorted.
    pub cells: Vec<(usize, usize)>,
    pub peak: (usize, usize),
    pub peak_value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameClusters {
    pub frame: usize,
    pub threshold: f64,
    pub clusters: Vec<Cluster>,
}

#[derive(Debug, Clone, Copy)]
pub struct ClusterParams {
    pub min_size: usize,
    pub split_peaks: bool,
    /// A secondary peak survives as its own cluster only when it exceeds
    /// the saddle joining it to a higher peak by this factor.
    pub peak_valley_ratio: f64,
}

impl From<&AnalysisConfig> for ClusterParams {
    fn from(cfg: &AnalysisConfig) -> Self {
        Self {
            min_size: cfg.min_cluster_size,
            split_peaks: cfg.split_peaks,
            peak_valley_ratio: cfg.peak_valley_ratio,
        }
    }
}

/// Threshold value for one slice. `global_max` is only consulted by
/// [`ThresholdPolicy::GlobalFraction`].
pub fn slice_threshold(values: &[f64], policy: ThresholdPolicy, global_max: f64) -> f64 {
    match policy {
        ThresholdPolicy::Absolute(v) => v,
        ThresholdPolicy::FrameFraction(f) => f * values.iter().copied().fold(0.0, f64::max),
        ThresholdPolicy::GlobalFraction(f) => f * global_max,
    }
}

/// Cells at or above `threshold`. Zero cells never pass, so an all-zero
/// slice gives an empty mask whatever the threshold.
pub fn threshold_mask(values: &[f64], threshold: f64) -> Vec<bool> {
    values.iter().map(|&v| v > 0.0 && v >= threshold).collect()
}

fn neighbours(k: usize, j: usize, n_freq: usize, n_chirp: usize) -> impl Iterator<Item = (usize, usize)> {
    (-1i64..=1)
        .flat_map(|dk| (-1i64..=1).map(move |dj| (dk, dj)))
        .filter(|&d| d != (0, 0))
        .filter_map(move |(dk, dj)| {
            let kk = k as i64 + dk;
            let jj = j as i64 + dj;
            (kk >= 0 && jj >= 0 && kk < n_freq as i64 && jj < n_chirp as i64).then_some((kk as usize, jj as usize))
        })
}

/// 8-connected components of a mask, each sorted, ordered by first cell.
pub fn connected_components(mask: &[bool], n_freq: usize, n_chirp: usize) -> Vec<Vec<(usize, usize)>> {
    let mut seen = vec![false; mask.len()];
    let mut out = Vec::new();
    let mut stack = Vec::new();
    for start in 0..mask.len() {
        if !mask[start] || seen[start] {
            continue;
        }
        seen[start] = true;
        stack.push(start);
        let mut comp = Vec::new();
        while let Some(c) = stack.pop() {
            let (k, j) = (c / n_chirp, c % n_chirp);
            comp.push((k, j));
            for (kk, jj) in neighbours(k, j, n_freq, n_chirp) {
                let idx = kk * n_chirp + jj;
                if mask[idx] && !seen[idx] {
                    seen[idx] = true;
                    stack.push(idx);
                }
            }
        }
        comp.sort_unstable();
        out.push(comp);
    }
    out
}

// Total order on cells: higher value first, then lower index.
fn above(values: &[f64], a: usize, b: usize) -> bool {
    values[a] > values[b] || (values[a] == values[b] && a < b)
}

/// Splits a connected component into the ascent basins of its local maxima,
/// then merges basins whose saddle is too shallow relative to the lower peak.
/// Saddles are visited from the highest down, so a basin is compared with
/// the best peak already joined to it.
pub fn split_basins(cells: &[(usize, usize)], values: &[f64], n_freq: usize, n_chirp: usize, ratio: f64) -> Vec<Vec<(usize, usize)>> {
    let mut scratch = vec![usize::MAX; values.len()];
    split_basins_in(cells, values, n_freq, n_chirp, ratio, &mut scratch)
}

// `index` maps flat cells to positions in `cells`; it must be all `usize::MAX`
// on entry and is left that way.
fn split_basins_in(
    cells: &[(usize, usize)],
    values: &[f64],
    n_freq: usize,
    n_chirp: usize,
    ratio: f64,
    index: &mut [usize],
) -> Vec<Vec<(usize, usize)>> {
    let flat: Vec<usize> = cells.iter().map(|&(k, j)| k * n_chirp + j).collect();
    for (i, &c) in flat.iter().enumerate() {
        index[c] = i;
    }
    let out = basins(cells, &flat, values, n_freq, n_chirp, ratio, index);
    for &c in &flat {
        index[c] = usize::MAX;
    }
    out
}

fn basins(
    cells: &[(usize, usize)],
    flat: &[usize],
    values: &[f64],
    n_freq: usize,
    n_chirp: usize,
    ratio: f64,
    index: &[usize],
) -> Vec<Vec<(usize, usize)>> {
    // steepest ascent pointer for every cell
    let mut up = vec![usize::MAX; cells.len()];
    for (i, &(k, j)) in cells.iter().enumerate() {
        let mut best = flat[i];
        for (kk, jj) in neighbours(k, j, n_freq, n_chirp) {
            let idx = kk * n_chirp + jj;
            if index[idx] != usize::MAX && above(values, idx, best) {
                best = idx;
            }
        }
        up[i] = index[best];
    }
    let mut label = vec![usize::MAX; cells.len()];
    let mut peaks = Vec::new();
    for i in 0..cells.len() {
        let mut path = Vec::new();
        let mut c = i;
        while label[c] == usize::MAX && up[c] != c {
            path.push(c);
            c = up[c];
        }
        if label[c] == usize::MAX {
            label[c] = peaks.len();
            peaks.push(values[flat[c]]);
        }
        let l = label[c];
        for p in path {
            label[p] = l;
        }
    }
    if peaks.len() == 1 {
        return vec![cells.to_vec()];
    }

    // highest saddle between every pair of adjacent basins
    let mut saddle: HashMap<(usize, usize), f64> = HashMap::new();
    for (i, &(k, j)) in cells.iter().enumerate() {
        for (kk, jj) in neighbours(k, j, n_freq, n_chirp) {
            let o = index[kk * n_chirp + jj];
            if o == usize::MAX {
                continue;
            }
            let (a, b) = (label[i], label[o]);
            if a < b {
                let s = values[flat[i]].min(values[flat[o]]);
                let e = saddle.entry((a, b)).or_insert(f64::MIN);
                *e = e.max(s);
            }
        }
    }
    let mut saddles: Vec<((usize, usize), f64)> = saddle.into_iter().collect();
    saddles.sort_by(|x, y| y.1.total_cmp(&x.1).then(x.0.cmp(&y.0)));

    let mut parent: Vec<usize> = (0..peaks.len()).collect();
    fn root(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    let peak = peaks;
    for ((a, b), s) in saddles {
        let (ra, rb) = (root(&mut parent, a), root(&mut parent, b));
        if ra == rb || peak[ra].min(peak[rb]) / s >= ratio {
            continue;
        }
        let (keep, gone) = if peak[ra] > peak[rb] || (peak[ra] == peak[rb] && ra < rb) { (ra, rb) } else { (rb, ra) };
        parent[gone] = keep;
    }

    let mut by_root: BTreeMap<usize, Vec<(usize, usize)>> = BTreeMap::new();
    for (i, &cell) in cells.iter().enumerate() {
        let r = root(&mut parent, label[i]);
        by_root.entry(r).or_default().push(cell);
    }
    by_root.into_values().collect()
}

/// Thresholds and clusters one slice. Clusters smaller than `min_size` are
/// dropped; the rest are ordered by peak cell.
pub fn cluster_slice(values: &[f64], n_freq: usize, n_chirp: usize, threshold: f64, params: ClusterParams) -> Vec<Cluster> {
    let mask = threshold_mask(values, threshold);
    let mut parts = Vec::new();
    let mut scratch = Vec::new();
    for comp in connected_components(&mask, n_freq, n_chirp) {
        if params.split_peaks && comp.len() > 1 {
            if scratch.is_empty() {
                scratch = vec![usize::MAX; values.len()];
            }
            parts.extend(split_basins_in(&comp, values, n_freq, n_chirp, params.peak_valley_ratio, &mut scratch));
        } else {
            parts.push(comp);
        }
    }
    let mut clusters: Vec<Cluster> = parts
        .into_iter()
        .filter(|c| c.len() >= params.min_size.max(1))
        .map(|cells| {
            let mut peak = cells[0];
            let mut peak_value = values[peak.0 * n_chirp + peak.1];
            for &(k, j) in &cells[1..] {
                let v = values[k * n_chirp + j];
                if v > peak_value {
                    peak = (k, j);
                    peak_value = v;
                }
            }
            Cluster { cells, peak, peak_value }
        })
        .collect();
    clusters.sort_by_key(|c| c.peak);
    clusters
}

/// Per-frame clusters of the filter-matched cube.
/// Clusters one matched slice.
pub fn cluster_frame(frame: usize, slice: &[f64], n_freq: usize, n_chirp: usize, threshold: f64, params: ClusterParams) -> FrameClusters {
    FrameClusters {
        frame,
        threshold,
        clusters: cluster_slice(slice, n_freq, n_chirp, threshold, params),
    }
}

pub fn cluster_cube(mcube: &MatchedCube, policy: ThresholdPolicy, params: ClusterParams) -> Vec<FrameClusters> {
    let (n_frames, n_freq, n_chirp) = mcube.dims();
    let global_max = mcube.max();
    (0..n_frames)
        .into_par_iter()
        .map(|f| {
            let slice = mcube.frame(f);
            cluster_frame(f, slice, n_freq, n_chirp, slice_threshold(slice, policy, global_max), params)
        })
        .collect()
}

/// Median smoothing of a point sequence at index `i` over `[i-hw, i+hw]`.
/// IF and chirp rate are smoothed independently and stay on their grids.
fn smooth_at(points: &[RidgePoint], i: usize, hw: usize) -> RidgePoint {
    let window = &points[i - hw..=i + hw];
    let mut by_eta: Vec<&RidgePoint> = window.iter().collect();
    by_eta.sort_by(|a, b| a.eta.total_cmp(&b.eta));
    let mut by_lambda: Vec<&RidgePoint> = window.iter().collect();
    by_lambda.sort_by(|a, b| a.lambda.total_cmp(&b.lambda));
    let mut p = points[i];
    p.eta = by_eta[hw].eta;
    p.freq_bin = by_eta[hw].freq_bin;
    p.lambda = by_lambda[hw].lambda;
    p.chirp_bin = by_lambda[hw].chirp_bin;
    p
}

/// Running median over a track's points with a window of `2h+1` points,
/// shrunk symmetrically near the ends.
pub fn smooth_points(points: &[RidgePoint], h: usize) -> Vec<RidgePoint> {
    let n = points.len();
    (0..n).map(|i| smooth_at(points, i, h.min(i).min(n - 1 - i))).collect()
}

/// Removes candidates that the trend's response explains: a slowly varying
/// trend with value `S(0, 0)` contributes `S(0, 0) A(lambda) Omega(lambda, eta)`
/// at `(eta, lambda)`, which under a strong trend can form a ridge of its own.
pub fn drop_trend_leakage(
    cands: &mut Vec<RidgePoint>,
    slice: &[num_complex::Complex64],
    freq_grid: &FrequencyGrid,
    chirp_grid: &ChirpRateGrid,
    sigma: f64,
) {
    let (Some(k0), Some(j0)) = (freq_grid.zero_index(), chirp_grid.zero_index()) else {
        return;
    };
    let trend = slice[k0 * chirp_grid.len() + j0].norm();
    cands.retain(|p| {
        if p.freq_bin.abs_diff(k0) <= TREND_RADIUS && p.chirp_bin.abs_diff(j0) <= TREND_RADIUS {
            return true;
        }
        let leak = trend * (amplitude_kernel(sigma, p.lambda) * omega_kernel(sigma, p.lambda, p.eta)).norm();
        p.magnitude > TREND_LEAKAGE_RATIO * leak
    });
}

/// Applies [`smooth_points`] to every non-trend track.
pub fn smooth_ridge(ridge: &RidgeSet, h: usize) -> RidgeSet {
    RidgeSet {
        frame_times: ridge.frame_times.clone(),
        tracks: ridge
            .tracks
            .iter()
            .map(|t| RidgeTrack {
                component: t.component,
                is_trend: t.is_trend,
                points: if t.is_trend { t.points.clone() } else { smooth_points(&t.points, h) },
            })
            .collect(),
    }
}

#[derive(Debug, Clone, Copy)]
pub struct LinkParams {
    pub rho: f64,
    pub delta: f64,
    pub hop_seconds: f64,
    pub max_components: usize,
    pub min_track_len: usize,
    pub max_gap: usize,
    pub smooth_half_window: usize,
    /// Bins of the `(0, 0)` cell when a trend component is tracked.
    pub trend_bins: Option<(usize, usize)>,
    /// Candidates within this many bins of the trend cell join the trend.
    pub trend_radius: usize,
}

impl LinkParams {
    pub fn from_config(cfg: &AnalysisConfig, freq_grid: &FrequencyGrid, chirp_grid: &ChirpRateGrid, hop_seconds: f64) -> Result<Self> {
        let trend_bins = if cfg.include_trend {
            match (freq_grid.zero_index(), chirp_grid.zero_index()) {
                (Some(k), Some(j)) => Some((k, j)),
                _ => return invalid("trend tracking needs zero frequency and zero chirp rate on the grids"),
            }
        } else {
            None
        };
        Ok(Self {
            rho: cfg.rho,
            delta: cfg.delta,
            hop_seconds,
            max_components: cfg.max_components.limit(),
            min_track_len: cfg.min_track_len.max(1),
            max_gap: cfg.max_gap,
            smooth_half_window: cfg.smooth_half_window,
            trend_bins,
            trend_radius: TREND_RADIUS,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Status {
    Tentative,
    Admitted(usize),
    // confirmed, waiting for a free component slot
    Waiting,
}

#[derive(Debug)]
struct Track {
    points: Vec<RidgePoint>,
    // points already discarded from the front
    offset: usize,
    status: Status,
    gap: usize,
    alive: bool,
    strength: f64,
}

impl Track {
    fn len(&self) -> usize {
        self.offset + self.points.len()
    }

    fn last(&self) -> &RidgePoint {
        self.points.last().expect("tracks are never empty")
    }

    fn local_index(&self, frame: usize) -> Option<usize> {
        self.points.binary_search_by_key(&frame, |p| p.frame).ok()
    }
}

/// One finished frame of linked ridges: `(component, is_trend, point)`,
/// sorted by component.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkedFrame {
    pub frame: usize,
    pub time: f64,
    pub points: Vec<(usize, bool, RidgePoint)>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LinkStats {
    pub admitted: usize,
    /// Confirmed tracks that ended without a free component slot.
    pub rejected: usize,
    pub pruned: usize,
}

/// Incremental frame-by-frame track linker. Frames are emitted once every
/// track touching them is decided and its smoothing window is available,
/// so the output does not depend on how the input is chunked.
#[derive(Debug)]
pub struct TrackLinker {
    params: LinkParams,
    tracks: Vec<Track>,
    pending: VecDeque<(usize, f64, Option<RidgePoint>)>,
    next_frame: usize,
    next_component: usize,
    // component ids of admitted tracks that ended recently, with their last point
    freed: Vec<(usize, RidgePoint)>,
    stats: LinkStats,
}

impl TrackLinker {
    pub fn new(params: LinkParams) -> Self {
        Self {
            params,
            tracks: Vec::new(),
            pending: VecDeque::new(),
            next_frame: 0,
            next_component: 1,
            freed: Vec::new(),
            stats: LinkStats::default(),
        }
    }

    pub fn stats(&self) -> LinkStats {
        self.stats
    }

    /// Frames pushed so far.
    pub fn frames_seen(&self) -> usize {
        self.next_frame
    }

    fn is_trend(&self, p: &RidgePoint) -> bool {
        match self.params.trend_bins {
            Some((k0, j0)) => {
                let r = self.params.trend_radius;
                p.freq_bin.abs_diff(k0) <= r && p.chirp_bin.abs_diff(j0) <= r
            }
            None => false,
        }
    }

    /// Adds the candidates of the next frame and returns every frame that
    /// became final.
    pub fn push(&mut self, frame: usize, time: f64, candidates: &[RidgePoint]) -> Vec<LinkedFrame> {
        assert_eq!(frame, self.next_frame, "frames must be pushed in order");
        self.next_frame += 1;
        let mut trend = None;
        let mut cands: Vec<RidgePoint> = Vec::with_capacity(candidates.len());
        for c in candidates {
            if self.is_trend(c) {
                if trend.is_none_or(|t: RidgePoint| c.magnitude > t.magnitude) {
                    trend = Some(*c);
                }
            } else {
                cands.push(*c);
            }
        }
        let trend_point = self.params.trend_bins.map(|(k0, j0)| RidgePoint {
            frame,
            time,
            eta: 0.0,
            lambda: 0.0,
            freq_bin: k0,
            chirp_bin: j0,
            magnitude: trend.map_or(0.0, |t| t.magnitude),
            cluster: trend.map_or(usize::MAX, |t| t.cluster),
        });
        self.associate(frame, &cands);
        self.pending.push_back((frame, time, trend_point));
        self.drain()
    }

    /// Ends every track and emits the remaining frames.
    pub fn finish(&mut self) -> Vec<LinkedFrame> {
        for t in &mut self.tracks {
            t.alive = false;
        }
        self.prune();
        self.drain()
    }

    fn associate(&mut self, frame: usize, cands: &[RidgePoint]) {
        let p = self.params;
        let mut edges = Vec::new();
        for (ti, t) in self.tracks.iter().enumerate() {
            if !t.alive {
                continue;
            }
            let last = t.last();
            let steps = (frame - last.frame) as f64;
            let predicted = last.eta + last.lambda * steps * p.hop_seconds;
            for (ci, c) in cands.iter().enumerate() {
                let cost = (c.eta - predicted).abs() + p.rho * (c.lambda - last.lambda).abs();
                if cost <= p.delta {
                    edges.push((cost, ti, ci));
                }
            }
        }
        edges.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        let mut track_used = vec![false; self.tracks.len()];
        let mut cand_used = vec![false; cands.len()];
        for (_, ti, ci) in edges {
            if track_used[ti] || cand_used[ci] {
                continue;
            }
            track_used[ti] = true;
            cand_used[ci] = true;
            let t = &mut self.tracks[ti];
            t.points.push(cands[ci]);
            t.strength += cands[ci].magnitude;
            t.gap = 0;
        }
        for (ti, t) in self.tracks.iter_mut().enumerate() {
            if t.alive && !track_used[ti] {
                t.gap += 1;
                if t.gap > p.max_gap {
                    t.alive = false;
                    if let Status::Admitted(c) = t.status {
                        self.freed.push((c, *t.last()));
                    }
                }
            }
        }
        for (ci, c) in cands.iter().enumerate() {
            if !cand_used[ci] {
                self.tracks.push(Track {
                    points: vec![*c],
                    offset: 0,
                    status: Status::Tentative,
                    gap: 0,
                    alive: true,
                    strength: c.magnitude,
                });
            }
        }

        for t in &mut self.tracks {
            if t.alive && t.status == Status::Tentative && t.len() >= p.min_track_len {
                t.status = Status::Waiting;
            }
        }
        let active = self
            .tracks
            .iter()
            .filter(|t| t.alive && matches!(t.status, Status::Admitted(_)))
            .count();
        let mut waiting: Vec<(f64, usize)> = self
            .tracks
            .iter()
            .enumerate()
            .filter(|(_, t)| t.alive && t.status == Status::Waiting)
            .map(|(i, t)| (t.strength, i))
            .collect();
        waiting.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        let window = p.min_track_len + p.max_gap;
        self.freed.retain(|(_, q)| q.frame + window >= frame);
        let admit: Vec<usize> = waiting.iter().take(p.max_components.saturating_sub(active)).map(|&(_, i)| i).collect();
        let mut ids = self.reuse_slots(&admit);
        for (&i, id) in admit.iter().zip(ids.iter_mut()) {
            let c = *id.get_or_insert_with(|| {
                self.next_component += 1;
                self.next_component - 1
            });
            self.tracks[i].status = Status::Admitted(c);
            self.stats.admitted += 1;
        }
        self.prune();
    }

    // Hands recently freed component ids to tracks about to be admitted
    // that plausibly continue them, pairing by ascending linking cost from
    // the freed track's last point. A track's points up to that point's
    // frame are dropped so a component never has two points in one frame.
    fn reuse_slots(&mut self, admit: &[usize]) -> Vec<Option<usize>> {
        let p = self.params;
        let mut pairs = Vec::new();
        for (a, &i) in admit.iter().enumerate() {
            let t = &self.tracks[i];
            for (s, (_, q)) in self.freed.iter().enumerate() {
                let Some(first) = t.points.iter().find(|r| r.frame > q.frame) else { continue };
                let steps = (first.frame - q.frame) as f64;
                let predicted = q.eta + q.lambda * steps * p.hop_seconds;
                let cost = (first.eta - predicted).abs() + p.rho * (first.lambda - q.lambda).abs();
                pairs.push((cost, a, s));
            }
        }
        pairs.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));
        let mut ids = vec![None; admit.len()];
        let mut taken = vec![false; self.freed.len()];
        for (_, a, s) in pairs {
            if ids[a].is_some() || taken[s] {
                continue;
            }
            taken[s] = true;
            let (c, q) = self.freed[s];
            ids[a] = Some(c);
            let t = &mut self.tracks[admit[a]];
            let cut = t.points.iter().take_while(|r| r.frame <= q.frame).count();
            t.points.drain(..cut);
            // the kept points start a fresh smoothing sequence
            t.offset = 0;
        }
        let mut s = 0;
        self.freed.retain(|_| {
            s += 1;
            !taken[s - 1]
        });
        ids
    }

    fn prune(&mut self) {
        let (mut pruned, mut rejected) = (0, 0);
        self.tracks.retain(|t| {
            if t.alive {
                return true;
            }
            match t.status {
                Status::Tentative => pruned += 1,
                Status::Waiting => rejected += 1,
                Status::Admitted(_) => return true,
            }
            false
        });
        self.stats.pruned += pruned;
        self.stats.rejected += rejected;
    }

    fn ready(&self, frame: usize) -> bool {
        let h = self.params.smooth_half_window;
        self.tracks.iter().all(|t| match t.local_index(frame) {
            None => true,
            Some(i) => match t.status {
                Status::Tentative => false,
                Status::Waiting => true,
                Status::Admitted(_) => !t.alive || t.points.len() > i + h,
            },
        })
    }

    fn drain(&mut self) -> Vec<LinkedFrame> {
        let h = self.params.smooth_half_window;
        let mut out = Vec::new();
        while let Some(&(frame, time, trend)) = self.pending.front() {
            if !self.ready(frame) {
                break;
            }
            self.pending.pop_front();
            let mut points = Vec::new();
            if let Some(tp) = trend {
                points.push((0, true, tp));
            }
            for t in &self.tracks {
                let Status::Admitted(c) = t.status else { continue };
                let Some(i) = t.local_index(frame) else { continue };
                let abs = t.offset + i;
                let after = if t.alive { h } else { t.len() - 1 - abs };
                let hw = h.min(abs).min(after);
                points.push((c, false, smooth_at(&t.points, i, hw)));
            }
            points.sort_by_key(|p| p.0);
            out.push(LinkedFrame { frame, time, points });
            self.discard_before(frame + 1);
        }
        out
    }

    // Drops state no later frame can need.
    fn discard_before(&mut self, next: usize) {
        let h = self.params.smooth_half_window;
        self.tracks.retain(|t| t.alive || t.last().frame >= next);
        for t in &mut self.tracks {
            // keep h points before the next pending frame, and always the last one
            let first_needed = t.points.iter().position(|p| p.frame >= next).unwrap_or(t.points.len() - 1);
            let cut = first_needed.saturating_sub(h).min(t.points.len() - 1);
            if cut > 0 {
                t.points.drain(..cut);
                t.offset += cut;
            }
        }
    }
}

/// Collects linked frames into a [`RidgeSet`].
#[derive(Debug, Default)]
pub struct RidgeAssembler {
    frame_times: Vec<f64>,
    tracks: BTreeMap<usize, RidgeTrack>,
}

impl RidgeAssembler {
    pub fn add(&mut self, f: &LinkedFrame) {
        debug_assert_eq!(f.frame, self.frame_times.len());
        self.frame_times.push(f.time);
        for &(component, is_trend, p) in &f.points {
            self.tracks
                .entry(component)
                .or_insert_with(|| RidgeTrack {
                    component,
                    is_trend,
                    points: Vec::new(),
                })
                .points
                .push(p);
        }
    }

    pub fn finish(self) -> RidgeSet {
        RidgeSet {
            frame_times: self.frame_times,
            tracks: self.tracks.into_values().collect(),
        }
    }
}

/// Links per-frame candidates into component tracks.
pub fn link_tracks(candidates: &[Vec<RidgePoint>], frame_times: &[f64], params: LinkParams) -> Result<(RidgeSet, LinkStats)> {
    if candidates.len() != frame_times.len() {
        return invalid("one candidate list per frame is required");
    }
    let mut linker = TrackLinker::new(params);
    let mut asm = RidgeAssembler::default();
    for (f, (c, &t)) in candidates.iter().zip(frame_times).enumerate() {
        for lf in linker.push(f, t, c) {
            asm.add(&lf);
        }
    }
    for lf in linker.finish() {
        asm.add(&lf);
    }
    Ok((asm.finish(), linker.stats()))
}
