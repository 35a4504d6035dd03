mod common;

use std::f64::consts::PI;

use chirpsep::matchedfilter::filter_matched_ct;
use chirpsep::separation::{solve_frame, Method};
use chirpsep::signals::{self, GroundTruth};
use chirpsep::transforms::{chirplet_at, chirplet_transform, ct_closed_form_lfm, GaussianWindow};
use chirpsep::{make_grids, AnalysisConfig, SampledSignal};
use common::*;
use num_complex::Complex64;
use proptest::prelude::*;

fn ct_cube(x: &SampledSignal, sigma: f64, hop: usize) -> chirpsep::TFCCube {
    let mut cfg = AnalysisConfig::new(sigma);
    cfg.frame_hop = hop;
    let (fg, cg) = make_grids(cfg.resolved_frame_len(x.sample_rate()), x.sample_rate(), x.is_real()).unwrap();
    chirplet_transform(x, &cfg, &fg, &cg).unwrap()
}

fn argmax(v: &[f64]) -> usize {
    (0..v.len()).fold(0, |best, i| if v[i] > v[best] { i } else { best })
}

// five-point central difference
fn derivative(f: impl Fn(f64) -> f64, t: f64, h: f64) -> f64 {
    (-f(t + 2.0 * h) + 8.0 * f(t + h) - 8.0 * f(t - h) + f(t - 2.0 * h)) / (12.0 * h)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn grid_round_trip(half in 4usize..256, fs in 0.5f64..2.0e4, real in any::<bool>(), u in 0.0f64..1.0) {
        let (fg, cg) = make_grids(2 * half, fs, real).unwrap();
        for i in 0..fg.len() {
            prop_assert_eq!(fg.nearest(fg.value(i)), Some(i));
            prop_assert!((fg.position(fg.value(i)) - i as f64).abs() < 1e-9);
        }
        for j in 0..cg.len() {
            prop_assert_eq!(cg.nearest(cg.value(j)), Some(j));
            prop_assert!((cg.position(cg.value(j)) - j as f64).abs() < 1e-9);
        }
        // any in-range value snaps to a bin within half a bin width
        let lo = fg.value(0);
        let v = lo + u * (fg.value(fg.len() - 1) - lo);
        let k = fg.nearest(v).unwrap();
        prop_assert!((fg.value(k) - v).abs() <= 0.5 * fg.bin_width() * (1.0 + 1e-9));
    }

    #[test]
    fn matched_filter_scales_and_is_bounded(
        x in random_signal(64..160, false),
        real in any::<bool>(),
        sigma in 2.0f64..5.0,
        hop in 1usize..3,
        b in 0usize..4,
        s in 0.05f64..20.0,
    ) {
        let v: Vec<Complex64> = if real { x.iter().map(|z| Complex64::new(z.re, 0.0)).collect() } else { x };
        let mk = |v: Vec<Complex64>| if real {
            SampledSignal::from_real(&v.iter().map(|z| z.re).collect::<Vec<_>>(), 1.0, 0.0).unwrap()
        } else {
            SampledSignal::from_complex(v, 1.0, 0.0).unwrap()
        };
        let cube = ct_cube(&mk(v.clone()), sigma, hop);
        let scaled = ct_cube(&mk(v.iter().map(|z| z * s).collect()), sigma, hop);
        let Ok(m) = filter_matched_ct(&cube, b) else { return Ok(()) };
        let ms = filter_matched_ct(&scaled, b).unwrap();

        let top = m.max();
        let cube_top = cube.data().iter().map(|z| z.norm()).fold(0.0, f64::max);
        prop_assert!(top <= cube_top + 1e-12);
        for (a, c) in m.data().iter().zip(ms.data()) {
            prop_assert!((c - s * a).abs() <= 1e-9 * s * top);
        }
        let (frames, _, _) = m.dims();
        for f in 0..frames {
            let (p, q) = (m.frame(f), ms.frame(f));
            let (i, k) = (argmax(p), argmax(q));
            // only exact ties (conjugate pairs on the zero-frequency row) may swap
            prop_assert!(i == k || (p[k] - p[i]).abs() <= 1e-12 * top, "frame {f}: {i} vs {k}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// An on-grid chirp whose IF moves exactly one bin per frame keeps its
    /// matched ridge at the true cell for every half-width.
    #[test]
    fn ridge_is_independent_of_b(
        sigma in 3.0f64..6.0,
        per_bin in prop::sample::select(vec![4usize, 8, 16]),
        up in any::<bool>(),
        k0 in 25i64..36,
    ) {
        let t_len = 128usize;
        let frames = 61usize;
        let hop = per_bin;
        let j = (t_len / per_bin) as f64 * if up { 1.0 } else { -1.0 };
        let start = if up { -k0 } else { k0 } as f64;
        let (c, r) = (start / t_len as f64, j / (t_len * t_len) as f64);
        let x = complex_lfm(1.0, hop * (frames - 1) + 1, c, r);

        let mut cfg = AnalysisConfig::new(sigma);
        cfg.frame_hop = hop;
        cfg.frame_len = Some(t_len);
        let (fg, cg) = make_grids(t_len, 1.0, false).unwrap();
        let cube = chirplet_transform(&x, &cfg, &fg, &cg).unwrap();
        let w = cfg.half_width(1.0).div_ceil(hop);
        let lambda_bin = cg.nearest(r).unwrap();
        for b in 0..=20 {
            let m = filter_matched_ct(&cube, b).unwrap();
            for f in 20 + w..frames - 20 - w {
                let eta = c + r * (f * hop) as f64;
                let truth = fg.nearest(eta).unwrap() * cg.len() + lambda_bin;
                prop_assert_eq!(argmax(m.frame(f)), truth, "b {} frame {}", b, f);
            }
        }
    }

    #[test]
    fn transform_matches_closed_form_for_lfms(
        c in -0.4f64..0.4,
        r in -1e-3f64..1e-3,
        sigma in 3.0f64..8.0,
        d_eta in -0.1f64..0.1,
        d_lambda in -0.01f64..0.01,
        u in 0.3f64..0.7,
    ) {
        let n = 400;
        let x = complex_lfm(1.0, n, c, r);
        let cfg = AnalysisConfig::new(sigma);
        let window = GaussianWindow::new(sigma, cfg.half_width(1.0), 1.0).unwrap();
        let centre = (u * n as f64) as usize;
        let t = centre as f64;
        let (eta, lambda) = (c + r * t + d_eta, r + d_lambda);
        let direct = chirplet_at(&x, &window, centre, eta, lambda);
        let oracle = ct_closed_form_lfm(x.samples()[centre], c + r * t, r, eta, lambda, sigma);
        // truncation at four widths leaves about 1e-4 of the window mass out
        prop_assert!((direct - oracle).norm() < 3e-4, "{direct} vs {oracle}");
    }

    #[test]
    fn solve_is_exact_on_lfm_mixtures(case in separated_lfms(), u in 0.0f64..1.0) {
        let x = case.signal();
        let cfg = AnalysisConfig::new(case.sigma);
        let w = cfg.half_width(1.0);
        prop_assume!(case.n > 2 * w + 1);
        let window = GaussianWindow::new(case.sigma, w, 1.0).unwrap();
        let centre = w + (u * (case.n - 2 * w - 1) as f64) as usize;
        let t = centre as f64;
        let positions: Vec<(f64, f64)> = case.lines.iter().map(|&(c, r)| (c + r * t, r)).collect();
        let observed: Vec<Complex64> = positions.iter().map(|&(e, l)| chirplet_at(&x, &window, centre, e, l)).collect();
        let (values, _) = solve_frame(0, &positions, &observed, case.sigma, Method::Gfct3s);
        for (v, &(c, r)) in values.iter().zip(&case.lines) {
            let truth = Complex64::from_polar(1.0, 2.0 * PI * (c * t + 0.5 * r * t * t));
            prop_assert!((v - truth).norm() < 1e-4, "{v} vs {truth}");
        }
    }

    #[test]
    fn truth_tracks_are_phase_derivatives(
        which in 0usize..4,
        c1 in 0.05f64..0.45, r1 in -5e-4f64..5e-4,
        carrier in 50.0f64..200.0, depth in 0.5f64..20.0, rate in 0.5f64..5.0,
        u in 0.05f64..0.95,
    ) {
        let (_, truth): (SampledSignal, GroundTruth) = match which {
            0 => signals::gen_two_component(50.0, 500).unwrap(),
            1 => signals::gen_two_lfm(1.0, 400, c1, r1, 0.5 - c1, -r1).unwrap(),
            2 => signals::gen_s_with_trend(8000.0, 8000).unwrap(),
            _ => signals::gen_sinusoidal_fm(1000.0, 2000, carrier, depth, rate, 1.0).unwrap(),
        };
        let duration = truth.len as f64 / truth.sample_rate;
        let h = 1e-5 * duration;
        let t = u * duration;
        for comp in &truth.components {
            // tolerances are relative to each track's typical size, since
            // chirp rates pass through zero
            let scale = |g: &dyn Fn(f64) -> f64| (0..=100).map(|i| g(i as f64 * duration / 100.0).abs()).fold(1.0, f64::max);
            let f_scale = scale(&|s| comp.inst_freq(s));
            let r_scale = scale(&|s| comp.chirp_rate(s));
            let f = derivative(|s| comp.phase(s), t, h);
            let r = derivative(|s| comp.inst_freq(s), t, h);
            prop_assert!((f - comp.inst_freq(t)).abs() < 1e-6 * f_scale, "{}: IF {f} vs {}", comp.name, comp.inst_freq(t));
            prop_assert!((r - comp.chirp_rate(t)).abs() < 1e-6 * r_scale, "{}: rate {r} vs {}", comp.name, comp.chirp_rate(t));
        }
    }

    /// The amplitude read off the transform of a real chirp near zero
    /// frequency improves as the window widens, because the negative
    /// frequency image leaks less.
    #[test]
    fn amplitude_estimate_improves_with_sigma(c in 0.01f64..0.04, r in 1e-5f64..5e-5, down in any::<bool>()) {
        let r = if down { -r } else { r };
        let n = 600;
        let x = SampledSignal::from_real(
            &(0..n).map(|k| { let t = k as f64; (2.0 * PI * (c * t + 0.5 * r * t * t)).cos() }).collect::<Vec<_>>(),
            1.0,
            0.0,
        ).unwrap();
        let mut last = f64::INFINITY;
        for sigma in [2.0, 4.0, 8.0, 20.0] {
            let cfg = AnalysisConfig::new(sigma);
            let window = GaussianWindow::new(sigma, cfg.half_width(1.0), 1.0).unwrap();
            let err = (200..400)
                .step_by(5)
                .map(|centre| {
                    let t = centre as f64;
                    (2.0 * chirplet_at(&x, &window, centre, c + r * t, r).norm() - 1.0).abs()
                })
                .fold(0.0, f64::max);
            prop_assert!(err < last, "sigma {sigma}: {err} after {last}");
            last = err;
        }
    }
}
