//! File formats: signals (CSV or binary with a JSON sidecar), cubes,
//! magnitude slices, ridges and component tracks.
//!
//! Binary signal layout, little endian:
//!
//! | offset | size | content                                   |
//! |--------|------|-------------------------------------------|
//! | 0      | 8    | magic `CHIRPSIG`                          |
//! | 8      | 4    | u32 format version (1)                    |
//! | 12     | 4    | u32 flags, bit 0 set for complex samples  |
//! | 16     | 8·n  | f64 samples; complex ones as `re, im`     |
//!
//! The sidecar `<name>.json` holds `sample_rate`, `start_time`, `is_real`
//! and `len`.
//!
//! Cube layout: magic `CHIRPCUB`, u32 version, u32 flags (bit 0 magnitude
//! cube, bit 1 real input signal), then u64 `n_frames, n_freq, n_chirp,
//! hop, signal_len, b`, f64 `sigma, sample_rate, freq_bin_width,
//! chirp_bin_width`, the f64 frame times, frequency values and chirp values,
//! and finally the data in (frame, freq, chirp) row-major order, as `re, im`
//! pairs or single magnitudes.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matchedfilter::MatchedCube;
use crate::model::{ChirpRateGrid, ComponentEstimate, FrequencyGrid, RidgeSet, SampledSignal, TFCCube};
use crate::signals::GroundTruth;

pub const SIGNAL_MAGIC: &[u8; 8] = b"CHIRPSIG";
pub const CUBE_MAGIC: &[u8; 8] = b"CHIRPCUB";
pub const FORMAT_VERSION: u32 = 1;

fn bad(msg: impl Into<String>) -> Error {
    Error::Format(msg.into())
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => bad(format!("{other:?}")),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignalMeta {
    pub sample_rate: f64,
    pub start_time: f64,
    pub is_real: bool,
    pub len: usize,
}

/// `signal.bin` → `signal.json`.
pub fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("json")
}

fn with_path(path: &Path, e: std::io::Error) -> Error {
    Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
}

pub fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| with_path(path, e))
}

fn create(path: &Path) -> Result<File> {
    File::create(path).map_err(|e| with_path(path, e))
}

fn is_binary(path: &Path) -> Result<bool> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("csv") => Ok(false),
        Some("bin") => Ok(true),
        _ => Err(bad(format!("{}: signal files must end in .csv or .bin", path.display()))),
    }
}

pub fn read_signal(path: &Path) -> Result<SampledSignal> {
    if is_binary(path)? {
        let meta: SignalMeta = serde_json::from_reader(BufReader::new(open(&sidecar_path(path))?))
            .map_err(|e| bad(format!("{}: {e}", sidecar_path(path).display())))?;
        read_signal_bin(BufReader::new(open(path)?), &meta)
    } else {
        read_signal_csv(BufReader::new(open(path)?))
    }
}

pub fn write_signal(path: &Path, x: &SampledSignal) -> Result<()> {
    if is_binary(path)? {
        let mut w = BufWriter::new(create(path)?);
        write_signal_bin(&mut w, x)?;
        w.flush()?;
        let meta = SignalMeta {
            sample_rate: x.sample_rate(),
            start_time: x.start_time(),
            is_real: x.is_real(),
            len: x.len(),
        };
        let side = BufWriter::new(create(&sidecar_path(path))?);
        serde_json::to_writer_pretty(side, &meta).map_err(|e| bad(e.to_string()))?;
        Ok(())
    } else {
        let mut w = BufWriter::new(create(path)?);
        write_signal_csv(&mut w, x)?;
        w.flush()?;
        Ok(())
    }
}

/// CSV with header `time,real` or `time,real,imag`; the rate comes from
/// the (uniform) time column.
pub fn read_signal_csv<R: Read>(r: R) -> Result<SampledSignal> {
    let mut rd = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
    let header: Vec<String> = rd.headers().map_err(csv_err)?.iter().map(str::to_owned).collect();
    let complex = match header.as_slice() {
        [t, re] if t == "time" && re == "real" => false,
        [t, re, im] if t == "time" && re == "real" && im == "imag" => true,
        _ => return Err(bad(format!("expected header time,real[,imag], got {}", header.join(",")))),
    };
    let mut times = Vec::new();
    let mut samples = Vec::new();
    for (line, rec) in rd.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        let field = |i: usize| -> Result<f64> {
            rec.get(i)
                .ok_or_else(|| bad(format!("row {}: missing column", line + 2)))?
                .parse::<f64>()
                .map_err(|e| bad(format!("row {}: {e}", line + 2)))
        };
        times.push(field(0)?);
        samples.push(Complex64::new(field(1)?, if complex { field(2)? } else { 0.0 }));
    }
    let sample_rate = rate_from_times(&times)?;
    SampledSignal::new(samples, sample_rate, times[0], !complex)
}

fn rate_from_times(times: &[f64]) -> Result<f64> {
    if times.len() < 2 {
        return Err(bad("at least two samples are needed to infer the sample rate"));
    }
    let dt = (times[times.len() - 1] - times[0]) / (times.len() - 1) as f64;
    if !(dt.is_finite() && dt > 0.0) {
        return Err(bad("time column must increase"));
    }
    if times.windows(2).any(|w| ((w[1] - w[0]) - dt).abs() > 1e-6 * dt) {
        return Err(bad("time column is not uniformly spaced"));
    }
    let fs = 1.0 / dt;
    // times written from an integer rate round-trip to within rounding
    let snapped = fs.round();
    Ok(if snapped > 0.0 && (fs - snapped).abs() <= 1e-9 * fs { snapped } else { fs })
}

pub fn write_signal_csv<W: Write>(w: W, x: &SampledSignal) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    if x.is_real() {
        wr.write_record(["time", "real"]).map_err(csv_err)?;
    } else {
        wr.write_record(["time", "real", "imag"]).map_err(csv_err)?;
    }
    for (k, z) in x.samples().iter().enumerate() {
        let t = x.time_at(k).to_string();
        if x.is_real() {
            wr.write_record([t, z.re.to_string()]).map_err(csv_err)?;
        } else {
            wr.write_record([t, z.re.to_string(), z.im.to_string()]).map_err(csv_err)?;
        }
    }
    wr.flush()?;
    Ok(())
}

fn write_header<W: Write>(w: &mut W, magic: &[u8; 8], flags: u32) -> Result<()> {
    w.write_all(magic)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())?;
    w.write_all(&flags.to_le_bytes())?;
    Ok(())
}

fn read_header<R: Read>(r: &mut R, magic: &[u8; 8]) -> Result<u32> {
    let mut m = [0u8; 8];
    r.read_exact(&mut m)?;
    if &m != magic {
        return Err(bad(format!("bad magic, expected {}", String::from_utf8_lossy(magic))));
    }
    let version = read_u32(r)?;
    if version != FORMAT_VERSION {
        return Err(bad(format!("unsupported format version {version}")));
    }
    read_u32(r)
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

fn read_f64s<R: Read>(r: &mut R, n: usize) -> Result<Vec<f64>> {
    (0..n).map(|_| read_f64(r)).collect()
}

fn write_f64s<W: Write>(w: &mut W, values: &[f64]) -> Result<()> {
    for v in values {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn write_signal_bin<W: Write>(w: &mut W, x: &SampledSignal) -> Result<()> {
    write_header(w, SIGNAL_MAGIC, u32::from(!x.is_real()))?;
    for z in x.samples() {
        w.write_all(&z.re.to_le_bytes())?;
        if !x.is_real() {
            w.write_all(&z.im.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_signal_bin<R: Read>(mut r: R, meta: &SignalMeta) -> Result<SampledSignal> {
    let flags = read_header(&mut r, SIGNAL_MAGIC)?;
    let complex = flags & 1 == 1;
    if complex == meta.is_real {
        return Err(bad("binary header and sidecar disagree on real versus complex"));
    }
    let per = if complex { 2 } else { 1 };
    let values = read_f64s(&mut r, meta.len * per)?;
    let mut rest = Vec::new();
    r.read_to_end(&mut rest)?;
    if !rest.is_empty() {
        return Err(bad(format!("{} trailing bytes after {} samples", rest.len(), meta.len)));
    }
    let samples = values
        .chunks(per)
        .map(|c| Complex64::new(c[0], if complex { c[1] } else { 0.0 }))
        .collect();
    SampledSignal::new(samples, meta.sample_rate, meta.start_time, meta.is_real)
}

struct CubeHead<'a> {
    magnitude: bool,
    is_real: bool,
    dims: (usize, usize, usize),
    hop: usize,
    signal_len: usize,
    b: usize,
    sigma: f64,
    sample_rate: f64,
    frame_times: &'a [f64],
    freq_grid: &'a FrequencyGrid,
    chirp_grid: &'a ChirpRateGrid,
}

fn write_cube_head<W: Write>(w: &mut W, h: &CubeHead) -> Result<()> {
    let flags = u32::from(h.magnitude) | (u32::from(h.is_real) << 1);
    write_header(w, CUBE_MAGIC, flags)?;
    for v in [h.dims.0, h.dims.1, h.dims.2, h.hop, h.signal_len, h.b] {
        w.write_all(&(v as u64).to_le_bytes())?;
    }
    write_f64s(w, &[h.sigma, h.sample_rate, h.freq_grid.bin_width(), h.chirp_grid.bin_width()])?;
    write_f64s(w, h.frame_times)?;
    write_f64s(w, h.freq_grid.values())?;
    write_f64s(w, h.chirp_grid.values())
}

pub fn write_cube<W: Write>(w: &mut W, cube: &TFCCube) -> Result<()> {
    write_cube_head(
        w,
        &CubeHead {
            magnitude: false,
            is_real: cube.is_real(),
            dims: cube.dims(),
            hop: cube.hop(),
            signal_len: cube.signal_len(),
            b: 0,
            sigma: cube.sigma(),
            sample_rate: cube.sample_rate(),
            frame_times: cube.frame_times(),
            freq_grid: cube.freq_grid(),
            chirp_grid: cube.chirp_grid(),
        },
    )?;
    for z in cube.data() {
        w.write_all(&z.re.to_le_bytes())?;
        w.write_all(&z.im.to_le_bytes())?;
    }
    Ok(())
}

pub fn write_matched<W: Write>(w: &mut W, m: &MatchedCube) -> Result<()> {
    write_cube_head(
        w,
        &CubeHead {
            magnitude: true,
            is_real: m.is_real(),
            dims: m.dims(),
            hop: m.hop(),
            signal_len: m.signal_len(),
            b: m.half_width_b(),
            sigma: m.sigma(),
            sample_rate: m.sample_rate(),
            frame_times: m.frame_times(),
            freq_grid: m.freq_grid(),
            chirp_grid: m.chirp_grid(),
        },
    )?;
    write_f64s(w, m.data())
}

/// Contents of a cube file.
#[derive(Debug, Clone)]
pub enum CubeFile {
    Transform(TFCCube),
    Matched(MatchedCube),
}

impl CubeFile {
    pub fn dims(&self) -> (usize, usize, usize) {
        match self {
            CubeFile::Transform(c) => c.dims(),
            CubeFile::Matched(m) => m.dims(),
        }
    }

    pub fn frame_times(&self) -> &[f64] {
        match self {
            CubeFile::Transform(c) => c.frame_times(),
            CubeFile::Matched(m) => m.frame_times(),
        }
    }

    pub fn freq_grid(&self) -> &FrequencyGrid {
        match self {
            CubeFile::Transform(c) => c.freq_grid(),
            CubeFile::Matched(m) => m.freq_grid(),
        }
    }

    pub fn chirp_grid(&self) -> &ChirpRateGrid {
        match self {
            CubeFile::Transform(c) => c.chirp_grid(),
            CubeFile::Matched(m) => m.chirp_grid(),
        }
    }

    /// Magnitude at a cell.
    pub fn magnitude(&self, frame: usize, freq: usize, chirp: usize) -> f64 {
        match self {
            CubeFile::Transform(c) => c.get(frame, freq, chirp).norm(),
            CubeFile::Matched(m) => m.get(frame, freq, chirp),
        }
    }
}

pub fn read_cube<R: Read>(mut r: R) -> Result<CubeFile> {
    let flags = read_header(&mut r, CUBE_MAGIC)?;
    let magnitude = flags & 1 == 1;
    let is_real = flags & 2 == 2;
    let mut head = [0usize; 6];
    for v in &mut head {
        *v = usize::try_from(read_u64(&mut r)?).map_err(|_| bad("dimension does not fit in memory"))?;
    }
    let [n_frames, n_freq, n_chirp, hop, signal_len, b] = head;
    let [sigma, sample_rate, df, dc] = [read_f64(&mut r)?, read_f64(&mut r)?, read_f64(&mut r)?, read_f64(&mut r)?];
    let frame_times = read_f64s(&mut r, n_frames)?;
    let freq_grid = FrequencyGrid::new(read_f64s(&mut r, n_freq)?, df)?;
    let chirp_grid = ChirpRateGrid::new(read_f64s(&mut r, n_chirp)?, dc)?;
    let cells = n_frames
        .checked_mul(n_freq)
        .and_then(|v| v.checked_mul(n_chirp))
        .ok_or_else(|| bad("cube dimensions overflow"))?;
    let out = if magnitude {
        let data = read_f64s(&mut r, cells)?;
        if data.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(bad("magnitude cube holds negative or non-finite values"));
        }
        CubeFile::Matched(MatchedCube {
            data,
            frame_times,
            freq_grid,
            chirp_grid,
            half_width_b: b,
            sigma,
            hop,
            signal_len,
            sample_rate,
            is_real,
        })
    } else {
        let raw = read_f64s(&mut r, 2 * cells)?;
        let data = raw.chunks(2).map(|c| Complex64::new(c[0], c[1])).collect();
        CubeFile::Transform(TFCCube::from_parts(
            data,
            frame_times,
            freq_grid,
            chirp_grid,
            sigma,
            hop,
            signal_len,
            sample_rate,
            is_real,
        )?)
    };
    let mut rest = [0u8; 1];
    if r.read(&mut rest)? != 0 {
        return Err(bad("trailing bytes after cube data"));
    }
    Ok(out)
}

pub fn read_cube_path(path: &Path) -> Result<CubeFile> {
    read_cube(BufReader::new(open(path)?))
}

/// Two-dimensional grid as CSV: the header holds `corner` and the column
/// coordinates, every row starts with its row coordinate.
pub fn write_grid_csv<W: Write>(
    w: W,
    corner: &str,
    rows: &[f64],
    cols: &[f64],
    value: impl Fn(usize, usize) -> f64,
) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    let mut head = vec![corner.to_owned()];
    head.extend(cols.iter().map(f64::to_string));
    wr.write_record(&head).map_err(csv_err)?;
    for (i, r) in rows.iter().enumerate() {
        let mut rec = vec![r.to_string()];
        rec.extend((0..cols.len()).map(|j| value(i, j).to_string()));
        wr.write_record(&rec).map_err(csv_err)?;
    }
    wr.flush()?;
    Ok(())
}

pub fn write_ridges_csv<W: Write>(w: W, ridges: &RidgeSet) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["component", "frame_time", "eta_hz", "lambda_hz_per_s", "magnitude"])
        .map_err(csv_err)?;
    for t in &ridges.tracks {
        for p in &t.points {
            wr.write_record([
                t.component.to_string(),
                p.time.to_string(),
                p.eta.to_string(),
                p.lambda.to_string(),
                p.magnitude.to_string(),
            ])
            .map_err(csv_err)?;
        }
    }
    wr.flush()?;
    Ok(())
}

/// Per-frame amplitude, IF and chirp rate of every component; frames where
/// a component is absent are skipped.
pub fn write_tracks_csv<W: Write>(w: W, components: &[ComponentEstimate]) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["component", "is_trend", "time", "amplitude", "if_hz", "chirp_hz_per_s"])
        .map_err(csv_err)?;
    for c in components {
        for (j, &t) in c.frame_times.iter().enumerate() {
            if !c.present(j) {
                continue;
            }
            wr.write_record([
                c.component.to_string(),
                c.is_trend.to_string(),
                t.to_string(),
                c.amplitude_track[j].to_string(),
                c.if_track[j].to_string(),
                c.chirp_track[j].to_string(),
            ])
            .map_err(csv_err)?;
        }
    }
    wr.flush()?;
    Ok(())
}

/// Clean waveforms of the ground truth: `time` then one column per
/// component, then `trend` when present.
pub fn write_truth_csv<W: Write>(w: W, truth: &GroundTruth) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    let mut head = vec!["time".to_owned()];
    head.extend(truth.components.iter().map(|c| c.name.clone()));
    if truth.has_trend() {
        head.push("trend".to_owned());
    }
    wr.write_record(&head).map_err(csv_err)?;
    for k in 0..truth.len {
        let t = truth.time(k);
        let mut rec = vec![t.to_string()];
        rec.extend(truth.components.iter().map(|c| c.value(t).to_string()));
        if truth.has_trend() {
            rec.push(truth.trend(t).to_string());
        }
        wr.write_record(&rec).map_err(csv_err)?;
    }
    wr.flush()?;
    Ok(())
}

/// Truth IF and chirp-rate curves, one row per component and sample.
pub fn write_truth_tracks_csv<W: Write>(w: W, truth: &GroundTruth, decimate: usize) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    for row in truth.rows(decimate) {
        wr.serialize(row).map_err(csv_err)?;
    }
    wr.flush()?;
    Ok(())
}

/// Numeric CSV as named columns.
pub fn read_columns_csv<R: Read>(r: R) -> Result<Vec<(String, Vec<f64>)>> {
    let mut rd = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
    let mut cols: Vec<(String, Vec<f64>)> = rd
        .headers()
        .map_err(csv_err)?
        .iter()
        .map(|h| (h.to_owned(), Vec::new()))
        .collect();
    for (line, rec) in rd.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        if rec.len() != cols.len() {
            return Err(bad(format!("row {} has {} fields, expected {}", line + 2, rec.len(), cols.len())));
        }
        for (col, v) in cols.iter_mut().zip(rec.iter()) {
            col.1.push(v.parse().map_err(|e| bad(format!("row {}: {e}", line + 2)))?);
        }
    }
    Ok(cols)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matchedfilter::filter_matched_ct;
    use crate::model::{make_grids, AnalysisConfig};
    use crate::signals::gen_two_lfm;
    use crate::transforms::chirplet_transform;

    fn complex_signal() -> SampledSignal {
        let s = (0..40).map(|k| Complex64::from_polar(1.0, 0.3 * k as f64)).collect();
        SampledSignal::from_complex(s, 8000.0, 0.25).unwrap()
    }

    #[test]
    fn signal_csv_round_trip() {
        for x in [complex_signal(), gen_two_lfm(1.0, 64, 0.1, 0.0, 0.3, 0.0).unwrap().0] {
            let mut buf = Vec::new();
            write_signal_csv(&mut buf, &x).unwrap();
            let y = read_signal_csv(buf.as_slice()).unwrap();
            assert_eq!(y, x);
        }
    }

    #[test]
    fn csv_rejects_bad_input() {
        assert!(read_signal_csv("t,real\n0,1\n1,2\n".as_bytes()).is_err());
        assert!(read_signal_csv("time,real\n0,1\n1,2\n3,4\n".as_bytes()).is_err());
        assert!(read_signal_csv("time,real\n0,1\n".as_bytes()).is_err());
        assert!(read_signal_csv("time,real\n0,1\n1,x\n".as_bytes()).is_err());
        let x = read_signal_csv("time, real\n0, 1\n0.5, 2\n".as_bytes()).unwrap();
        assert_eq!(x.sample_rate(), 2.0);
    }

    #[test]
    fn binary_layout() {
        let x = complex_signal();
        let mut buf = Vec::new();
        write_signal_bin(&mut buf, &x).unwrap();
        assert_eq!(&buf[..8], b"CHIRPSIG");
        assert_eq!(u32::from_le_bytes(buf[8..12].try_into().unwrap()), 1);
        assert_eq!(u32::from_le_bytes(buf[12..16].try_into().unwrap()), 1);
        assert_eq!(buf.len(), 16 + 16 * x.len());
        assert_eq!(f64::from_le_bytes(buf[16..24].try_into().unwrap()), x.samples()[0].re);
    }

    #[test]
    fn binary_files_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sig.bin");
        let x = complex_signal();
        write_signal(&path, &x).unwrap();
        assert!(sidecar_path(&path).exists());
        assert_eq!(read_signal(&path).unwrap(), x);
        std::fs::write(&path, b"NOTMAGIC00000000").unwrap();
        assert!(matches!(read_signal(&path), Err(Error::Format(_))));
        assert!(matches!(read_signal(&dir.path().join("missing.csv")), Err(Error::Io(_))));
        assert!(read_signal(&dir.path().join("sig.txt")).is_err());
    }

    #[test]
    fn cubes_round_trip() {
        let (x, _) = gen_two_lfm(1.0, 64, 0.1, 0.001, 0.3, 0.0).unwrap();
        let cfg = AnalysisConfig::new(3.0);
        let (f, c) = make_grids(32, 1.0, true).unwrap();
        let cube = chirplet_transform(&x, &cfg, &f, &c).unwrap();
        let mut buf = Vec::new();
        write_cube(&mut buf, &cube).unwrap();
        let CubeFile::Transform(back) = read_cube(buf.as_slice()).unwrap() else { panic!("wrong kind") };
        assert_eq!(back.data(), cube.data());
        assert_eq!(back.frame_times(), cube.frame_times());
        assert_eq!(back.chirp_grid(), cube.chirp_grid());
        assert_eq!((back.sigma(), back.hop(), back.is_real()), (3.0, 1, true));

        let m = filter_matched_ct(&cube, 2).unwrap();
        let mut buf = Vec::new();
        write_matched(&mut buf, &m).unwrap();
        let CubeFile::Matched(mb) = read_cube(buf.as_slice()).unwrap() else { panic!("wrong kind") };
        assert_eq!(mb.data(), m.data());
        assert_eq!(mb.half_width_b(), 2);
        buf.push(0);
        assert!(read_cube(buf.as_slice()).is_err());
    }

    #[test]
    fn truth_columns_round_trip() {
        let (_, truth) = gen_two_lfm(1.0, 16, 0.1, 0.0, 0.3, 0.0).unwrap();
        let mut buf = Vec::new();
        write_truth_csv(&mut buf, &truth).unwrap();
        let cols = read_columns_csv(buf.as_slice()).unwrap();
        assert_eq!(cols.len(), 3);
        assert_eq!(cols[1].0, "x1");
        assert_eq!(cols[2].1, truth.component_signal(1).real_parts());
    }

    #[test]
    fn grid_csv_shape() {
        let mut buf = Vec::new();
        write_grid_csv(&mut buf, "t\\eta", &[0.0, 1.0], &[0.5, 0.75, 1.0], |i, j| (i * 3 + j) as f64).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "t\\eta,0.5,0.75,1");
        assert_eq!(lines[2], "1,3,4,5");
    }
}
