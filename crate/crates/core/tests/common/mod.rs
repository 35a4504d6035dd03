#![allow(dead_code)]

use std::f64::consts::PI;
use std::ops::Range;

use chirpsep::{signals, SampledSignal};
use num_complex::Complex64;
use proptest::prelude::*;

/// `exp(i 2π (c t + r t² / 2))` sampled at `fs`.
pub fn complex_lfm(fs: f64, n: usize, c: f64, r: f64) -> SampledSignal {
    let v = (0..n)
        .map(|k| {
            let t = k as f64 / fs;
            Complex64::from_polar(1.0, 2.0 * PI * (c * t + 0.5 * r * t * t))
        })
        .collect();
    SampledSignal::from_complex(v, fs, 0.0).unwrap()
}

pub fn complex() -> impl Strategy<Value = Complex64> {
    (-2.0f64..2.0, -2.0f64..2.0).prop_map(|(re, im)| Complex64::new(re, im))
}

/// Random samples; imaginary parts are zero when `real`.
pub fn random_signal(len: Range<usize>, real: bool) -> impl Strategy<Value = Vec<Complex64>> {
    len.prop_flat_map(move |n| {
        prop::collection::vec(complex(), n)
            .prop_map(move |v| if real { v.into_iter().map(|z| Complex64::new(z.re, 0.0)).collect() } else { v })
    })
}

/// Complex LFMs at unit rate whose IFs stay at least four frequency bins
/// apart over the whole signal.
#[derive(Debug, Clone)]
pub struct SeparatedLfms {
    pub n: usize,
    pub sigma: f64,
    pub b: usize,
    pub frame_len: usize,
    pub lines: Vec<(f64, f64)>,
}

impl SeparatedLfms {
    pub fn signal(&self) -> SampledSignal {
        let mut v = vec![Complex64::new(0.0, 0.0); self.n];
        for &(c, r) in &self.lines {
            for (acc, z) in v.iter_mut().zip(complex_lfm(1.0, self.n, c, r).samples()) {
                *acc += z;
            }
        }
        SampledSignal::from_complex(v, 1.0, 0.0).unwrap()
    }
}

pub fn separated_lfms() -> impl Strategy<Value = SeparatedLfms> {
    (96usize..160, 3.0f64..7.0, 0usize..4, 2usize..4)
        .prop_flat_map(|(n, sigma, b, k)| {
            let frame_len = chirpsep::AnalysisConfig::new(sigma).resolved_frame_len(1.0);
            let rmax = 0.3 / n as f64;
            let line = (-0.35f64..0.35, -rmax..rmax);
            (Just((n, sigma, b, frame_len)), prop::collection::vec(line, k))
        })
        .prop_filter("IFs closer than four bins or near Nyquist", |((n, _, _, t_len), lines)| {
            let margin = 4.0 / *t_len as f64;
            (0..*n).all(|k| {
                let t = k as f64;
                let ifs: Vec<f64> = lines.iter().map(|(c, r)| c + r * t).collect();
                ifs.iter().all(|f| f.abs() < 0.45)
                    && ifs.iter().enumerate().all(|(i, a)| ifs[i + 1..].iter().all(|b| (a - b).abs() >= margin))
            })
        })
        .prop_map(|((n, sigma, b, frame_len), lines)| SeparatedLfms { n, sigma, b, frame_len, lines })
}

/// A real two-chirp signal at unit rate with its window scale.
pub fn two_lfm_case() -> impl Strategy<Value = (SampledSignal, f64)> {
    (120usize..200, 4.0f64..7.0, 0.05f64..0.45, 0.05f64..0.45, -1.0f64..1.0, -1.0f64..1.0).prop_map(
        |(n, sigma, f1, f2, s1, s2)| {
            let nf = n as f64;
            // end frequencies stay inside (0.05, 0.45)
            let r1 = s1 * (f1 - 0.05).min(0.45 - f1) / nf;
            let r2 = s2 * (f2 - 0.05).min(0.45 - f2) / nf;
            let (x, _) = signals::gen_two_lfm(1.0, n, f1, r1, f2, r2).unwrap();
            (x, sigma)
        },
    )
}
