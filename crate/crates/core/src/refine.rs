//! Off-grid ridge refinement.
//!
//! Near its ridge, the transform of a sum of linear chirps is
//! `S(eta, lambda) = sum_l x_l A(lambda - lambda_l) Omega(lambda - lambda_l, eta - eta_l)`.
//! Fitting the positions of interacting ridges jointly, with the values
//! `x_l` solved by least squares for each trial, removes the pull one
//! component's response exerts on another's grid argmax. The transform's
//! chirp-rate resolution `1 / (2 pi sigma^2)` often spans many grid bins,
//! which is where that pull is largest.

use std::collections::BTreeSet;
use std::f64::consts::PI;

use argmin::core::{CostFunction, Error as ArgminError, Executor};
use argmin::solver::neldermead::NelderMead;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::model::{ChirpRateGrid, FrequencyGrid, RidgePoint};
use crate::ridges::TREND_RADIUS;
use crate::separation::mixing_entry;

/// Ridges whose mutual response exceeds this are fitted together.
const COUPLING: f64 = 1e-2;
/// Frequency bins either side of a ridge used in the fit.
const FREQ_RADIUS: usize = 2;
/// Upper limit on chirp bins either side of a ridge used in the fit.
const MAX_CHIRP_RADIUS: usize = 8;

/// Maps the optimiser's unit-box parameters to ridge positions.
#[derive(Debug, Clone)]
struct Layout {
    /// Starting position of every column; the `free` ones move.
    start: Vec<(f64, f64)>,
    free: Vec<usize>,
    steps: (f64, f64),
}

impl Layout {
    fn positions(&self, theta: &[f64]) -> Vec<(f64, f64)> {
        let mut pos = self.start.clone();
        for (i, &c) in self.free.iter().enumerate() {
            pos[c].0 += theta[2 * i] * self.steps.0;
            pos[c].1 += theta[2 * i + 1] * self.steps.1;
        }
        pos
    }
}

struct GroupFit {
    layout: Layout,
    cells: Vec<(f64, f64)>,
    observed: DVector<Complex64>,
    norm: f64,
    sigma: f64,
}

impl GroupFit {
    /// Residual energy of the best fit at `theta`, relative to the data.
    fn residual(&self, theta: &[f64]) -> f64 {
        let pos = self.layout.positions(theta);
        let c = DMatrix::from_fn(self.cells.len(), pos.len(), |m, l| {
            mixing_entry(self.cells[m].0, self.cells[m].1, pos[l].0, pos[l].1, self.sigma)
        });
        let ch = c.adjoint();
        let Some(x) = (&ch * &c).lu().solve(&(&ch * &self.observed)) else {
            return 1.0;
        };
        let r = (&self.observed - &c * x).norm_squared() / self.norm;
        if r.is_finite() {
            r
        } else {
            1.0
        }
    }
}

impl CostFunction for GroupFit {
    type Param = Vec<f64>;
    type Output = f64;

    fn cost(&self, theta: &Self::Param) -> Result<f64, ArgminError> {
        let excess: f64 = theta.iter().map(|t| (t.abs() - 1.0).max(0.0)).sum();
        if excess > 0.0 {
            return Ok(2.0 + excess);
        }
        Ok(self.residual(theta))
    }
}

fn find(parent: &mut [usize], i: usize) -> usize {
    let mut r = i;
    while parent[r] != r {
        r = parent[r];
    }
    parent[i] = r;
    r
}

// Refines the non-fixed points of one frame; bins are left on the
// observed cells.
fn refine_frame(
    slice: &[Complex64],
    points: &[(usize, bool, RidgePoint)],
    freq_grid: &FrequencyGrid,
    chirp_grid: &ChirpRateGrid,
    sigma: f64,
) -> Vec<(usize, bool, RidgePoint)> {
    let mut out = points.to_vec();
    let n = points.len();
    if n == 0 {
        return out;
    }
    let mut parent: Vec<usize> = (0..n).collect();
    for a in 0..n {
        for b in a + 1..n {
            let (pa, pb) = (&points[a].2, &points[b].2);
            if mixing_entry(pa.eta, pa.lambda, pb.eta, pb.lambda, sigma).norm() > COUPLING {
                let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
                parent[ra.max(rb)] = ra.min(rb);
            }
        }
    }

    let (nf, nc) = (freq_grid.len(), chirp_grid.len());
    let (fbw, cbw) = (freq_grid.bin_width(), chirp_grid.bin_width());
    let resolution = 1.0 / (2.0 * PI * sigma * sigma);
    let chirp_radius = ((resolution / cbw).ceil() as usize).clamp(1, MAX_CHIRP_RADIUS);
    let steps = (fbw, (0.5 * resolution).clamp(cbw, chirp_radius as f64 * cbw));

    for root in 0..n {
        let members: Vec<usize> = (0..n).filter(|&i| find(&mut parent, i) == root).collect();
        let free: Vec<usize> = (0..members.len()).filter(|&i| !points[members[i]].1).collect();
        if free.is_empty() {
            continue;
        }
        let mut cells = BTreeSet::new();
        for &i in &members {
            let p = &points[i].2;
            let (k0, j0) = (p.freq_bin, p.chirp_bin);
            for k in k0.saturating_sub(FREQ_RADIUS)..=(k0 + FREQ_RADIUS).min(nf - 1) {
                for j in j0.saturating_sub(chirp_radius)..=(j0 + chirp_radius).min(nc - 1) {
                    cells.insert((k, j));
                }
            }
        }
        if cells.len() < 2 * members.len() + 1 {
            continue;
        }
        let observed = DVector::from_iterator(cells.len(), cells.iter().map(|&(k, j)| slice[k * nc + j]));
        let norm = observed.norm_squared();
        if !(norm > 0.0) {
            continue;
        }
        let layout = Layout {
            start: members.iter().map(|&i| (points[i].2.eta, points[i].2.lambda)).collect(),
            free: free.clone(),
            steps,
        };
        let fit = GroupFit {
            layout: layout.clone(),
            cells: cells.iter().map(|&(k, j)| (freq_grid.value(k), chirp_grid.value(j))).collect(),
            observed,
            norm,
            sigma,
        };
        let dim = 2 * free.len();
        let origin = vec![0.0; dim];
        let mut simplex = vec![origin.clone()];
        for d in 0..dim {
            let mut v = origin.clone();
            v[d] = 0.3;
            simplex.push(v);
        }
        let Ok(solver) = NelderMead::new(simplex).with_sd_tolerance(1e-10) else {
            continue;
        };
        let start_cost = fit.residual(&origin);
        let Ok(res) = Executor::new(fit, solver)
            .configure(|s| s.max_iters(150 * dim as u64))
            .run()
        else {
            continue;
        };
        let Some(best) = res.state.best_param.clone() else { continue };
        if !(res.state.best_cost < start_cost) {
            continue;
        }
        let pos = layout.positions(&best);
        for &i in &free {
            let p = &mut out[members[i]].2;
            p.eta = pos[i].0.clamp(freq_grid.value(0), freq_grid.value(nf - 1));
            p.lambda = pos[i].1.clamp(chirp_grid.value(0), chirp_grid.value(nc - 1));
        }
    }
    out
}

/// Refines one frame's ridge candidates before they are linked. With
/// `trend`, candidates near the `(0, 0)` cell are held there and a fixed
/// trend column is added when none is present.
pub fn refine_candidates(
    cands: &mut [RidgePoint],
    slice: &[Complex64],
    freq_grid: &FrequencyGrid,
    chirp_grid: &ChirpRateGrid,
    sigma: f64,
    trend: bool,
) {
    if cands.is_empty() {
        return;
    }
    let zero = match (trend, freq_grid.zero_index(), chirp_grid.zero_index()) {
        (true, Some(k), Some(j)) => Some((k, j)),
        _ => None,
    };
    let near_zero = |p: &RidgePoint| {
        zero.is_some_and(|(k0, j0)| p.freq_bin.abs_diff(k0) <= TREND_RADIUS && p.chirp_bin.abs_diff(j0) <= TREND_RADIUS)
    };
    let mut points: Vec<(usize, bool, RidgePoint)> = cands
        .iter()
        .enumerate()
        .map(|(i, p)| {
            if near_zero(p) {
                (i, true, RidgePoint { eta: 0.0, lambda: 0.0, ..*p })
            } else {
                (i, false, *p)
            }
        })
        .collect();
    if let Some((k0, j0)) = zero {
        if !points.iter().any(|q| q.1) {
            let p = RidgePoint { eta: 0.0, lambda: 0.0, freq_bin: k0, chirp_bin: j0, ..cands[0] };
            points.push((usize::MAX, true, p));
        }
    }
    for (i, fixed, p) in refine_frame(slice, &points, freq_grid, chirp_grid, sigma) {
        if !fixed {
            cands[i] = p;
        }
    }
}
