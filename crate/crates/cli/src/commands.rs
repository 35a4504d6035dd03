use std::f64::consts::PI;
use std::fs::{self, File};
use std::io::{BufRead, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use chirpsep::io::{self as cio, CubeFile};
use chirpsep::matchedfilter::filter_matched_ct;
use chirpsep::pipeline::{analyze_with_grids, extract_ridges};
use chirpsep::separation::{separate, Method};
use chirpsep::signals::{self, GroundTruth};
use chirpsep::stream::{StreamFormat, StreamFrame, StreamProcessor};
use chirpsep::transforms::{chirplet_transform_with, ChirpletEngine};
use chirpsep::{ComponentEstimate, SampledSignal};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::args::*;
use crate::error::{usage, CliError};
use crate::manifest::{self, Recorder};

type Res<T> = Result<T, CliError>;

fn create(path: &Path) -> Res<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let f = File::create(path).map_err(|e| std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))?;
    Ok(BufWriter::new(f))
}

fn finish(rec: Recorder, path: &Path) -> Res<()> {
    manifest::write(path, &rec.finish())
}

pub fn build_signal(a: &GenerateArgs) -> Res<(SampledSignal, GroundTruth)> {
    let (fs, n) = (a.fs, a.n);
    let out = match a.generator {
        Generator::TwoLfm => {
            let given = [a.c1, a.r1, a.c2, a.r2];
            let bins = a.bins || given.iter().all(Option::is_none);
            let defaults = [15.0, 43.0, 43.0, -20.0];
            let v: Vec<f64> = given.iter().zip(defaults).map(|(g, d)| g.unwrap_or(d)).collect();
            let (cs, rs) = if bins { (fs / n as f64, (fs / n as f64).powi(2)) } else { (1.0, 1.0) };
            signals::gen_two_lfm(fs, n, v[0] * cs, v[1] * rs, v[2] * cs, v[3] * rs)?
        }
        Generator::TwoComponent => signals::gen_two_component(fs, n)?,
        Generator::STrend => signals::gen_s_with_trend(fs, n)?,
        Generator::SinusoidalFm | Generator::MicroDoppler => {
            let (Some(carrier), Some(depth), Some(rate)) = (a.carrier, a.depth, a.mod_rate) else {
                return usage("FM generators need --carrier, --depth and --mod-rate");
            };
            let amp = a.amp.unwrap_or(1.0);
            if a.generator == Generator::SinusoidalFm {
                signals::gen_sinusoidal_fm(fs, n, carrier, depth, rate, amp)?
            } else {
                let (x, mut g) = signals::combine(vec![
                    signals::gen_sinusoidal_fm_phased(fs, n, carrier, depth, rate, amp, 0.0)?,
                    signals::gen_sinusoidal_fm_phased(fs, n, carrier, depth, rate, amp, PI)?,
                ])?;
                for (i, c) in g.components.iter_mut().enumerate() {
                    c.name = format!("sfm{}", i + 1);
                }
                (x, g)
            }
        }
    };
    Ok(out)
}

pub fn generate(a: GenerateArgs) -> Res<()> {
    let mut rec = Recorder::new("generate");
    rec.params(&a);
    rec.seed = a.snr.map(|_| a.seed);
    let (clean, truth) = build_signal(&a)?;
    let x = match a.snr {
        Some(snr) => signals::add_awgn(&clean, snr, a.seed)?,
        None => clean,
    };
    cio::write_signal(&a.out, &x)?;
    rec.output(&a.out);
    if let Some(p) = &a.truth {
        let mut w = create(p)?;
        cio::write_truth_csv(&mut w, &truth)?;
        w.flush()?;
        rec.output(p);
    }
    if let Some(p) = &a.truth_tracks {
        let mut w = create(p)?;
        cio::write_truth_tracks_csv(&mut w, &truth, 1)?;
        w.flush()?;
        rec.output(p);
    }
    finish(rec, &manifest::path_for(&a.out))
}

pub fn transform(a: TransformArgs, file: &AnalysisArgs) -> Res<()> {
    let mut rec = Recorder::new("transform");
    let x = cio::read_signal(&a.input)?;
    rec.input(&a.input);
    let r = a.analysis.merged(file).resolve()?;
    rec.params(&r);
    let (f, c) = r.grids(x.sample_rate(), x.is_real())?;
    let engine = ChirpletEngine::from_config(&r.config, x.sample_rate(), f, c)?;
    let cube = chirplet_transform_with(&x, &engine, r.config.frame_hop)?;
    let mut w = create(&a.out)?;
    cio::write_cube(&mut w, &cube)?;
    w.flush()?;
    rec.output(&a.out);
    finish(rec, &manifest::path_for(&a.out))
}

fn read_transform(path: &Path) -> Res<chirpsep::TFCCube> {
    match cio::read_cube_path(path)? {
        CubeFile::Transform(c) => Ok(c),
        CubeFile::Matched(_) => usage(format!("{} holds a matched cube, not a transform", path.display())),
    }
}

pub fn matched(a: MatchArgs, file: &AnalysisArgs) -> Res<()> {
    let mut rec = Recorder::new("match");
    let cube = read_transform(&a.cube)?;
    rec.input(&a.cube);
    let b = a.b.or(file.b).unwrap_or(0);
    rec.params(&serde_json::json!({ "b": b }));
    let m = filter_matched_ct(&cube, b)?;
    let mut w = create(&a.out)?;
    cio::write_matched(&mut w, &m)?;
    w.flush()?;
    rec.output(&a.out);
    finish(rec, &manifest::path_for(&a.out))
}

pub fn ridges(a: RidgesArgs, file: &AnalysisArgs) -> Res<()> {
    let mut rec = Recorder::new("ridges");
    let mut args = a.analysis.merged(file);
    let cube = match (&a.input, &a.cube) {
        (Some(input), _) => {
            let x = cio::read_signal(input)?;
            rec.input(input);
            let r = args.resolve()?;
            let (f, c) = r.grids(x.sample_rate(), x.is_real())?;
            let engine = ChirpletEngine::from_config(&r.config, x.sample_rate(), f, c)?;
            chirplet_transform_with(&x, &engine, r.config.frame_hop)?
        }
        (None, Some(path)) => {
            rec.input(path);
            let cube = read_transform(path)?;
            args.sigma.get_or_insert(cube.sigma());
            cube
        }
        (None, None) => return usage("give --input or --cube"),
    };
    let r = args.resolve()?;
    rec.params(&r);
    let m = match &a.matched {
        Some(path) => {
            rec.input(path);
            match cio::read_cube_path(path)? {
                CubeFile::Matched(m) if m.dims() == cube.dims() => m,
                CubeFile::Matched(_) => return usage("matched cube and transform differ in shape"),
                CubeFile::Transform(_) => return usage(format!("{} is not a matched cube", path.display())),
            }
        }
        None => filter_matched_ct(&cube, r.config.matched_half_width_b)?,
    };
    let stage = extract_ridges(&cube, &m, &r.config)?;
    log::info!("{} track(s), {:?}", stage.ridges.component_count(), stage.link_stats);
    let mut w = create(&a.out)?;
    cio::write_ridges_csv(&mut w, &stage.ridges)?;
    w.flush()?;
    rec.output(&a.out);
    finish(rec, &manifest::path_for(&a.out))
}

fn component_name(c: &ComponentEstimate) -> String {
    if c.is_trend {
        "trend".to_owned()
    } else {
        format!("component_{}", c.component)
    }
}

/// Truth waveforms from a `generate --truth` CSV, trend last.
fn read_truth(path: &Path, like: &SampledSignal) -> Res<Vec<(String, SampledSignal)>> {
    let cols = cio::read_columns_csv(std::io::BufReader::new(cio::open(path)?))?;
    let mut out = Vec::new();
    for (name, values) in cols.into_iter().skip(1) {
        if values.len() != like.len() {
            return usage(format!("truth has {} samples, signal {}", values.len(), like.len()));
        }
        out.push((name, SampledSignal::from_real(&values, like.sample_rate(), like.start_time())?));
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
struct Score {
    truth: String,
    component: Option<usize>,
    rmse: f64,
}

/// Oscillatory truths pair with oscillatory estimates, the trend with the
/// trend component.
fn score(truth: &[(String, SampledSignal)], est: &[ComponentEstimate], trim: usize) -> Res<Vec<Score>> {
    let n = truth.first().map_or(0, |t| t.1.len());
    if 2 * trim >= n {
        return usage(format!("trim {trim} leaves nothing of {n} samples"));
    }
    let range = trim..n - trim;
    let mut out = Vec::new();
    for trend in [false, true] {
        let ts: Vec<&(String, SampledSignal)> = truth.iter().filter(|t| (t.0 == "trend") == trend).collect();
        let es: Vec<&ComponentEstimate> = est.iter().filter(|e| e.is_trend == trend).collect();
        let sigs: Vec<SampledSignal> = ts.iter().map(|t| t.1.clone()).collect();
        let waves: Vec<&SampledSignal> = es.iter().map(|e| &e.waveform).collect();
        for (t, (j, e)) in ts.iter().zip(signals::match_components(&sigs, &waves, range.clone())?) {
            out.push(Score {
                truth: t.0.clone(),
                component: j.map(|j| es[j].component),
                rmse: e,
            });
        }
    }
    Ok(out)
}

fn average(scores: &[Score]) -> f64 {
    let osc: Vec<f64> = scores.iter().filter(|s| s.truth != "trend").map(|s| s.rmse).collect();
    osc.iter().sum::<f64>() / osc.len().max(1) as f64
}

pub fn separate_cmd(a: SeparateArgs, file: &AnalysisArgs) -> Res<()> {
    let mut rec = Recorder::new("separate");
    let x = cio::read_signal(&a.input)?;
    rec.input(&a.input);
    let r = a.analysis.merged(file).resolve()?;
    rec.params(&r);
    let (f, c) = r.grids(x.sample_rate(), x.is_real())?;
    let analysis = analyze_with_grids(&x, &r.config, &f, &c, r.method)?;
    fs::create_dir_all(&a.out_dir)?;
    let comps = &analysis.separation.components;
    for comp in comps {
        let path = a.out_dir.join(format!("{}.{}", component_name(comp), a.format.extension()));
        cio::write_signal(&path, &comp.waveform)?;
        rec.output(&path);
    }
    let tracks = a.out_dir.join("tracks.csv");
    let mut w = create(&tracks)?;
    cio::write_tracks_csv(&mut w, comps)?;
    w.flush()?;
    rec.output(&tracks);
    let ridges = a.out_dir.join("ridges.csv");
    let mut w = create(&ridges)?;
    cio::write_ridges_csv(&mut w, &analysis.ridges)?;
    w.flush()?;
    rec.output(&ridges);
    println!(
        "{} component(s){}",
        comps.iter().filter(|c| !c.is_trend).count(),
        if comps.iter().any(|c| c.is_trend) { " and a trend" } else { "" }
    );
    if let Some(tp) = &a.truth {
        rec.input(tp);
        let truth = read_truth(tp, &x)?;
        let trim = a.trim.unwrap_or_else(|| r.config.half_width(x.sample_rate()));
        let scores = score(&truth, comps, trim)?;
        let path = a.out_dir.join("rmse.csv");
        let mut wr = csv_writer(&path)?;
        wr.write_record(["truth", "component", "rmse"]).map_err(csv_io)?;
        for s in &scores {
            let comp = s.component.map_or_else(|| "none".to_owned(), |c| c.to_string());
            println!("rmse {:>8} -> {:>6}: {:.6}", s.truth, comp, s.rmse);
            wr.write_record([s.truth.clone(), comp, s.rmse.to_string()]).map_err(csv_io)?;
        }
        wr.flush()?;
        println!("average rmse {:.6}", average(&scores));
        rec.output(&path);
    }
    finish(rec, &a.out_dir.join("manifest.json"))
}

fn csv_writer(path: &Path) -> Res<csv::Writer<BufWriter<File>>> {
    Ok(csv::Writer::from_writer(create(path)?))
}

fn csv_io(e: csv::Error) -> CliError {
    CliError::Io(e.into())
}

#[derive(Debug, Clone)]
struct Cell {
    method: Method,
    snr: f64,
    seed: u64,
    scores: Vec<Score>,
    wall: f64,
}

pub fn benchmark(a: BenchmarkArgs, file: &AnalysisArgs) -> Res<()> {
    let mut rec = Recorder::new("benchmark");
    rec.seed = Some(a.seed_base);
    let r = a.analysis.clone().merged(file).resolve()?;
    rec.params(&serde_json::json!({
        "signal": a.signal, "fs": a.fs, "n": a.n, "snr_min": a.snr_min, "snr_max": a.snr_max,
        "snr_step": a.snr_step, "seeds": a.seeds, "seed_base": a.seed_base, "trim": a.trim, "analysis": r,
    }));
    if !(a.snr_step > 0.0 && a.snr_min <= a.snr_max) {
        return usage("need snr_step > 0 and snr_min <= snr_max");
    }
    let gen = GenerateArgs {
        generator: a.signal,
        fs: a.fs,
        n: a.n,
        out: PathBuf::new(),
        truth: None,
        truth_tracks: None,
        snr: None,
        seed: 0,
        bins: false,
        c1: None,
        r1: None,
        c2: None,
        r2: None,
        carrier: None,
        depth: None,
        mod_rate: None,
        amp: None,
    };
    let (clean, truth) = build_signal(&gen)?;
    let mut named: Vec<(String, SampledSignal)> = truth
        .components
        .iter()
        .enumerate()
        .map(|(i, c)| (c.name.clone(), truth.component_signal(i)))
        .collect();
    if truth.has_trend() {
        named.push(("trend".to_owned(), truth.trend_signal()));
    }
    let (f, c) = r.grids(clean.sample_rate(), clean.is_real())?;
    let trim = a.trim.unwrap_or_else(|| r.config.half_width(a.fs));
    let steps = ((a.snr_max - a.snr_min) / a.snr_step + 1e-9).floor() as usize;
    let jobs: Vec<(f64, u64)> = (0..=steps)
        .flat_map(|i| (0..a.seeds).map(move |s| (i, s)))
        .map(|(i, s)| (a.snr_min + i as f64 * a.snr_step, a.seed_base + s))
        .collect();
    let cells: Vec<Vec<Cell>> = jobs
        .par_iter()
        .map(|&(snr, seed)| -> Res<Vec<Cell>> {
            let noisy = signals::add_awgn(&clean, snr, seed)?;
            let started = Instant::now();
            let engine = ChirpletEngine::from_config(&r.config, noisy.sample_rate(), f.clone(), c.clone())?;
            let cube = chirplet_transform_with(&noisy, &engine, r.config.frame_hop)?;
            let m = filter_matched_ct(&cube, r.config.matched_half_width_b)?;
            let stage = extract_ridges(&cube, &m, &r.config)?;
            let shared = started.elapsed().as_secs_f64();
            let t = Instant::now();
            let ct = separate(&cube, &stage.ridges, Method::Ct3s)?;
            let c_wall = shared + t.elapsed().as_secs_f64();
            let t = Instant::now();
            let gf = separate(&cube, &stage.ridges, Method::Gfct3s)?;
            let g_wall = shared + t.elapsed().as_secs_f64();
            Ok(vec![
                Cell {
                    method: Method::Ct3s,
                    snr,
                    seed,
                    scores: score(&named, &ct.components, trim)?,
                    wall: c_wall,
                },
                Cell {
                    method: Method::Gfct3s,
                    snr,
                    seed,
                    scores: score(&named, &gf.components, trim)?,
                    wall: g_wall,
                },
            ])
        })
        .collect::<Res<_>>()?;
    let mut cells: Vec<Cell> = cells.into_iter().flatten().collect();
    cells.sort_by(|x, y| {
        (x.method as u8)
            .cmp(&(y.method as u8))
            .then(x.snr.total_cmp(&y.snr))
            .then(x.seed.cmp(&y.seed))
    });

    let mut wr = csv_writer(&a.out)?;
    let mut head = vec!["method".to_owned(), "snr_db".to_owned(), "seed".to_owned()];
    head.extend(named.iter().map(|(n, _)| format!("rmse_{n}")));
    head.extend(["rmse_avg".to_owned(), "wall_s".to_owned()]);
    wr.write_record(&head).map_err(csv_io)?;
    for cell in &cells {
        let mut row = vec![method_name(cell.method).to_owned(), cell.snr.to_string(), cell.seed.to_string()];
        for (name, _) in &named {
            let s = cell.scores.iter().find(|s| &s.truth == name).expect("every truth is scored");
            row.push(s.rmse.to_string());
        }
        row.push(average(&cell.scores).to_string());
        row.push(format!("{:.6}", cell.wall));
        wr.write_record(&row).map_err(csv_io)?;
    }
    wr.flush()?;
    rec.output(&a.out);
    for m in [Method::Ct3s, Method::Gfct3s] {
        for i in 0..=steps {
            let snr = a.snr_min + i as f64 * a.snr_step;
            let sel: Vec<f64> = cells
                .iter()
                .filter(|c| c.method == m && c.snr == snr)
                .map(|c| average(&c.scores))
                .collect();
            println!("{:>6} snr {:>6.1} dB  mean rmse {:.6}", method_name(m), snr, sel.iter().sum::<f64>() / sel.len().max(1) as f64);
        }
    }
    finish(rec, &manifest::path_for(&a.out))
}

fn method_name(m: Method) -> &'static str {
    match m {
        Method::Ct3s => "ct3s",
        Method::Gfct3s => "gfct3s",
    }
}

#[derive(Serialize)]
struct ComponentRecord<'a> {
    component: usize,
    trend: bool,
    amplitude: f64,
    if_hz: f64,
    chirp_hz_per_s: f64,
    sample_start: usize,
    samples: &'a [f64],
    #[serde(skip_serializing_if = "Option::is_none")]
    samples_imag: Option<&'a [f64]>,
}

#[derive(Serialize)]
struct FrameRecord<'a> {
    frame: usize,
    frame_time: f64,
    components: Vec<ComponentRecord<'a>>,
}

fn write_frames(out: &mut impl Write, frames: &[StreamFrame], complex: bool) -> Res<()> {
    for fr in frames {
        let parts: Vec<(Vec<f64>, Vec<f64>)> = fr
            .components
            .iter()
            .map(|c| (c.samples.iter().map(|z| z.re).collect(), c.samples.iter().map(|z| z.im).collect()))
            .collect();
        let rec = FrameRecord {
            frame: fr.frame,
            frame_time: fr.time,
            components: fr
                .components
                .iter()
                .zip(&parts)
                .map(|(c, (re, im))| ComponentRecord {
                    component: c.component,
                    trend: c.is_trend,
                    amplitude: c.amplitude,
                    if_hz: c.point.eta,
                    chirp_hz_per_s: c.point.lambda,
                    sample_start: fr.sample_start,
                    samples: re,
                    samples_imag: complex.then_some(im.as_slice()),
                })
                .collect(),
        };
        serde_json::to_writer(&mut *out, &rec).map_err(|e| CliError::Io(e.into()))?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

fn parse_line(line: &str, complex: bool, lineno: usize) -> Res<Option<Complex64>> {
    let fields: Vec<&str> = line.split([',', ' ', '\t']).filter(|s| !s.is_empty()).collect();
    let num = |s: &str| -> Res<f64> {
        s.parse()
            .map_err(|_| CliError::Core(chirpsep::Error::Format(format!("line {lineno}: cannot parse {s:?}"))))
    };
    match (fields.as_slice(), complex) {
        ([], _) => Ok(None),
        ([re], false) => Ok(Some(Complex64::new(num(re)?, 0.0))),
        ([re, im], true) => Ok(Some(Complex64::new(num(re)?, num(im)?))),
        _ => Err(CliError::Core(chirpsep::Error::Format(format!(
            "line {lineno}: expected {} number(s)",
            if complex { 2 } else { 1 }
        )))),
    }
}

pub fn stream(a: StreamArgs, file: &AnalysisArgs) -> Res<()> {
    let mut rec = Recorder::new("stream");
    let r = a.analysis.clone().merged(file).resolve()?;
    rec.params(&serde_json::json!({ "fs": a.fs, "complex": a.complex, "chunk": a.chunk, "analysis": r }));
    if a.chunk == 0 {
        return usage("--chunk must be positive");
    }
    let format = StreamFormat {
        sample_rate: a.fs,
        start_time: 0.0,
        is_real: !a.complex,
    };
    let (f, c) = r.grids(a.fs, !a.complex)?;
    let mut sp = StreamProcessor::new(&r.config, format, f, c, r.method)?;
    let stdin = std::io::stdin();
    let stdout = std::io::stdout();
    let mut out = std::io::BufWriter::new(stdout.lock());
    let mut buf = Vec::with_capacity(a.chunk);
    for (i, line) in stdin.lock().lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.starts_with('#') {
            continue;
        }
        if let Some(z) = parse_line(line, a.complex, i + 1)? {
            buf.push(z);
        }
        if buf.len() == a.chunk {
            let frames = sp.push(&buf)?;
            write_frames(&mut out, &frames, a.complex)?;
            out.flush()?;
            buf.clear();
        }
    }
    let frames = sp.push(&buf)?;
    write_frames(&mut out, &frames, a.complex)?;
    let frames = sp.flush()?;
    write_frames(&mut out, &frames, a.complex)?;
    out.flush()?;
    log::info!("{} samples, {:?}", sp.samples_received(), sp.link_stats());
    if let Some(p) = &a.manifest {
        finish(rec, p)?;
    }
    Ok(())
}

enum Axis {
    Time,
    Freq,
    Chirp,
}

fn parse_slice(s: &str) -> Res<(Axis, f64)> {
    let Some((k, v)) = s.split_once('=') else {
        return usage(format!("slice must look like lambda=<value>, got {s:?}"));
    };
    let axis = match k.trim() {
        "t" | "time" => Axis::Time,
        "eta" | "freq" => Axis::Freq,
        "lambda" | "chirp" => Axis::Chirp,
        other => return usage(format!("unknown slice axis {other:?}; use t, eta or lambda")),
    };
    let v: f64 = v.trim().parse().map_err(|_| CliError::Usage(format!("bad slice value in {s:?}")))?;
    Ok((axis, v))
}

/// Nearest index to `v` on a uniform axis, warning when `v` lies outside.
fn snap(values: &[f64], v: f64, bins: bool, what: &str) -> usize {
    let n = values.len();
    if bins {
        let i = v.round();
        if i < 0.0 || i >= n as f64 || i != v {
            log::warn!("{what} index {v} snapped into 0..{n}");
        }
        return i.clamp(0.0, (n - 1) as f64) as usize;
    }
    let step = if n > 1 { values[1] - values[0] } else { 1.0 };
    let (lo, hi) = (values[0] - 0.5 * step, values[n - 1] + 0.5 * step);
    if v < lo || v > hi {
        log::warn!("{what} {v} outside [{}, {}], snapped to the nearest bin", values[0], values[n - 1]);
    }
    let i = ((v - values[0]) / step).round();
    i.clamp(0.0, (n - 1) as f64) as usize
}

pub fn export_plot(a: ExportPlotArgs) -> Res<()> {
    let mut rec = Recorder::new("export-plot");
    rec.params(&serde_json::json!({ "slice": a.slice, "bins": a.bins }));
    let (axis, v) = parse_slice(&a.slice)?;
    let cube = cio::read_cube_path(&a.cube)?;
    rec.input(&a.cube);
    let times = cube.frame_times();
    let etas = cube.freq_grid().values();
    let lams = cube.chirp_grid().values();
    let mut w = create(&a.out)?;
    match axis {
        Axis::Time => {
            let t = snap(times, v, a.bins, "time");
            log::info!("slice at frame {t}, t = {}", times[t]);
            cio::write_grid_csv(&mut w, "eta_hz\\lambda_hz_per_s", etas, lams, |i, j| cube.magnitude(t, i, j))?;
        }
        Axis::Freq => {
            let k = snap(etas, v, a.bins, "frequency");
            log::info!("slice at eta = {} Hz", etas[k]);
            cio::write_grid_csv(&mut w, "time_s\\lambda_hz_per_s", times, lams, |i, j| cube.magnitude(i, k, j))?;
        }
        Axis::Chirp => {
            let j = snap(lams, v, a.bins, "chirp rate");
            log::info!("slice at lambda = {} Hz/s", lams[j]);
            cio::write_grid_csv(&mut w, "time_s\\eta_hz", times, etas, |i, k| cube.magnitude(i, k, j))?;
        }
    }
    w.flush()?;
    rec.output(&a.out);
    finish(rec, &manifest::path_for(&a.out))
}
