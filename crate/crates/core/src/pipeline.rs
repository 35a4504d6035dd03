//! Batch pipeline: transform, matched filter, ridges, separation.

use crate::error::Result;
use crate::matchedfilter::{filter_matched_ct, matched_ridge, MatchedCube};
use crate::model::{make_grids, AnalysisConfig, ChirpRateGrid, FrequencyGrid, RidgeSet, SampledSignal, TFCCube};
use crate::refine::refine_candidates;
use rayon::prelude::*;
use crate::ridges::{cluster_cube, drop_trend_leakage, link_tracks, ClusterParams, FrameClusters, LinkParams, LinkStats};
use crate::separation::{separate, Method, Separation};
use crate::transforms::{chirplet_transform_with, ChirpletEngine};
use crate::RidgePoint;

/// Everything the batch pipeline produces.
#[derive(Debug, Clone)]
pub struct Analysis {
    pub cube: TFCCube,
    pub matched: MatchedCube,
    pub clusters: Vec<FrameClusters>,
    pub candidates: Vec<Vec<RidgePoint>>,
    pub ridges: RidgeSet,
    pub link_stats: LinkStats,
    pub separation: Separation,
}

/// Ridge extraction output.
#[derive(Debug, Clone)]
pub struct RidgeStage {
    pub clusters: Vec<FrameClusters>,
    pub candidates: Vec<Vec<RidgePoint>>,
    pub ridges: RidgeSet,
    pub link_stats: LinkStats,
}

/// Clusters the matched cube, reads ridge candidates and links them.
pub fn extract_ridges(cube: &TFCCube, matched: &MatchedCube, cfg: &AnalysisConfig) -> Result<RidgeStage> {
    let clusters = cluster_cube(matched, cfg.threshold_policy, ClusterParams::from(cfg));
    let mut candidates = matched_ridge(matched, cube, &clusters)?;
    candidates.par_iter_mut().enumerate().for_each(|(j, c)| {
        let (slice, fg, cg) = (cube.frame(j), cube.freq_grid(), cube.chirp_grid());
        if cfg.include_trend {
            drop_trend_leakage(c, slice, fg, cg, cube.sigma());
        }
        if cfg.refine_ridges {
            refine_candidates(c, slice, fg, cg, cube.sigma(), cfg.include_trend);
        }
    });
    let params = LinkParams::from_config(cfg, cube.freq_grid(), cube.chirp_grid(), cube.hop_seconds())?;
    let (mut ridges, link_stats) = link_tracks(&candidates, cube.frame_times(), params)?;
    fill_magnitudes(&mut ridges, cube);
    if link_stats.rejected > 0 {
        log::warn!(
            "{} confirmed track(s) dropped by the component limit of {}",
            link_stats.rejected,
            params.max_components
        );
    }
    warn_near_dc(&ridges, cube.freq_grid(), cube.is_real());
    Ok(RidgeStage {
        clusters,
        candidates,
        ridges,
        link_stats,
    })
}

/// Grids implied by the configuration's frame length.
pub fn default_grids(x: &SampledSignal, cfg: &AnalysisConfig) -> Result<(FrequencyGrid, ChirpRateGrid)> {
    make_grids(cfg.resolved_frame_len(x.sample_rate()), x.sample_rate(), x.is_real())
}

/// Sets every ridge magnitude to `|S|` at its final bin.
pub fn fill_magnitudes(ridges: &mut RidgeSet, cube: &TFCCube) {
    for t in &mut ridges.tracks {
        for p in &mut t.points {
            p.magnitude = cube.get(p.frame, p.freq_bin, p.chirp_bin).norm();
        }
    }
}

pub(crate) fn warn_near_dc(ridges: &RidgeSet, freq_grid: &FrequencyGrid, is_real: bool) {
    if !is_real {
        return;
    }
    for t in ridges.tracks.iter().filter(|t| !t.is_trend) {
        let low = t.points.iter().filter(|p| p.eta.abs() < 2.0 * freq_grid.bin_width()).count();
        if low > 0 {
            log::warn!("component {} is within two bins of DC at {low} frames; its negative-frequency image interferes there", t.component);
        }
    }
}

/// Runs the full pipeline with explicit grids.
pub fn analyze_with_grids(
    x: &SampledSignal,
    cfg: &AnalysisConfig,
    freq_grid: &FrequencyGrid,
    chirp_grid: &ChirpRateGrid,
    method: Method,
) -> Result<Analysis> {
    cfg.validate()?;
    let engine = ChirpletEngine::from_config(cfg, x.sample_rate(), freq_grid.clone(), chirp_grid.clone())?;
    let cube = chirplet_transform_with(x, &engine, cfg.frame_hop)?;
    let matched = filter_matched_ct(&cube, cfg.matched_half_width_b)?;
    let RidgeStage {
        clusters,
        candidates,
        ridges,
        link_stats,
    } = extract_ridges(&cube, &matched, cfg)?;
    let separation = separate(&cube, &ridges, method)?;
    let flagged = separation.flagged_frames();
    if flagged > 0 {
        log::warn!("{flagged} frame(s) fell back to single-ridge values after a failed solve");
    }
    Ok(Analysis {
        cube,
        matched,
        clusters,
        candidates,
        ridges,
        link_stats,
        separation,
    })
}

/// Runs the full pipeline on the default grids.
pub fn analyze(x: &SampledSignal, cfg: &AnalysisConfig, method: Method) -> Result<Analysis> {
    let (f, c) = default_grids(x, cfg)?;
    analyze_with_grids(x, cfg, &f, &c, method)
}
