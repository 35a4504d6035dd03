use std::io::Write;
use std::path::Path;
use std::process::{Command, Output, Stdio};

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_chirpsep"))
        .current_dir(dir)
        .args(args)
        .env_remove("RUST_LOG")
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = run(dir, args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn column(path: &Path, col: usize) -> Vec<f64> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(col).unwrap().parse().unwrap())
        .collect()
}

fn two_lfm(dir: &Path) {
    ok(
        dir,
        &["generate", "two-lfm", "--fs", "256", "--n", "256", "--out", "x.csv", "--truth", "truth.csv", "--truth-tracks", "tracks.csv"],
    );
}

#[test]
fn generate_writes_signal_truth_and_manifest() {
    let d = tempfile::tempdir().unwrap();
    two_lfm(d.path());
    let x = column(&d.path().join("x.csv"), 1);
    assert_eq!(x.len(), 256);
    assert!((x[0] - 2.0).abs() < 1e-12);
    let head = std::fs::read_to_string(d.path().join("truth.csv")).unwrap();
    assert!(head.starts_with("time,x1,x2\n"));
    let m: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(d.path().join("x.csv.manifest.json")).unwrap()).unwrap();
    assert_eq!(m["subcommand"], "generate");
    assert_eq!(m["outputs"].as_array().unwrap().len(), 3);
}

#[test]
fn binary_signal_round_trips_through_generate() {
    let d = tempfile::tempdir().unwrap();
    ok(d.path(), &["generate", "two-component", "--fs", "64", "--n", "400", "--out", "s.bin"]);
    assert!(d.path().join("s.json").exists());
    ok(d.path(), &["transform", "--input", "s.bin", "--out", "c.bin", "--sigma", "0.5"]);
}

#[test]
fn missing_flag_is_a_usage_error() {
    let d = tempfile::tempdir().unwrap();
    assert_eq!(run(d.path(), &["generate", "two-lfm"]).status.code(), Some(2));
    two_lfm(d.path());
    let out = run(d.path(), &["separate", "--input", "x.csv", "--out-dir", "o"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("sigma"));
}

#[test]
fn unreadable_input_is_an_io_error() {
    let d = tempfile::tempdir().unwrap();
    let out = run(d.path(), &["separate", "--input", "absent.csv", "--out-dir", "o", "--sigma", "0.1"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("absent.csv"));
    std::fs::write(d.path().join("bad.csv"), "time,real\n0,1\nx,2\n").unwrap();
    let out = run(d.path(), &["transform", "--input", "bad.csv", "--out", "c.bin", "--sigma", "0.1"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn separate_scores_against_truth() {
    let d = tempfile::tempdir().unwrap();
    two_lfm(d.path());
    ok(
        d.path(),
        &["separate", "--input", "x.csv", "--out-dir", "sep", "--truth", "truth.csv", "--sigma", "0.1", "--b", "20", "--components", "2"],
    );
    let sep = d.path().join("sep");
    for f in ["component_1.csv", "component_2.csv", "tracks.csv", "ridges.csv", "rmse.csv", "manifest.json"] {
        assert!(sep.join(f).exists(), "{f} missing");
    }
    let rmse = column(&sep.join("rmse.csv"), 2);
    assert_eq!(rmse.len(), 2);
    assert!(rmse.iter().all(|&e| e.is_finite() && e < 0.5), "{rmse:?}");
}

#[test]
fn methods_agree_on_well_separated_tones() {
    let d = tempfile::tempdir().unwrap();
    ok(
        d.path(),
        &["generate", "two-lfm", "--fs", "256", "--n", "256", "--bins", "--c1", "30", "--r1", "0", "--c2", "90", "--r2", "0", "--out", "x.csv"],
    );
    for m in ["ct3s", "gfct3s"] {
        ok(
            d.path(),
            &["separate", "--input", "x.csv", "--out-dir", m, "--sigma", "0.1", "--components", "2", "--method", m],
        );
    }
    for c in ["component_1.csv", "component_2.csv"] {
        let a = column(&d.path().join("ct3s").join(c), 1);
        let b = column(&d.path().join("gfct3s").join(c), 1);
        assert_eq!(a.len(), 256);
        let worst = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        assert!(worst < 1e-5, "{c}: {worst}");
    }
}

#[test]
fn component_limit_warns_and_keeps_one_track() {
    let d = tempfile::tempdir().unwrap();
    two_lfm(d.path());
    let out = ok(
        d.path(),
        &["separate", "--input", "x.csv", "--out-dir", "sep", "--sigma", "0.1", "--b", "20", "--components", "1"],
    );
    assert!(String::from_utf8_lossy(&out.stderr).contains("component limit"));
    assert!(d.path().join("sep/component_1.csv").exists());
    assert!(!d.path().join("sep/component_2.csv").exists());
    let comps: std::collections::BTreeSet<u64> =
        column(&d.path().join("sep/tracks.csv"), 0).into_iter().map(|c| c as u64).collect();
    assert_eq!(comps.len(), 1);
}

#[test]
fn pipeline_stages_and_plot_export() {
    let d = tempfile::tempdir().unwrap();
    two_lfm(d.path());
    ok(d.path(), &["transform", "--input", "x.csv", "--out", "cube.bin", "--sigma", "0.1"]);
    ok(d.path(), &["match", "--cube", "cube.bin", "--out", "m.bin", "--b", "20"]);
    ok(
        d.path(),
        &["ridges", "--cube", "cube.bin", "--matched", "m.bin", "--out", "r.csv", "--components", "2", "--b", "20"],
    );
    assert!(column(&d.path().join("r.csv"), 2).len() > 400);

    ok(d.path(), &["export-plot", "--cube", "cube.bin", "--slice", "lambda=0", "--out", "p.csv"]);
    let text = std::fs::read_to_string(d.path().join("p.csv")).unwrap();
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows.len(), 1 + 256);
    assert_eq!(rows[0].split(',').count(), 1 + 128);

    let out = ok(d.path(), &["export-plot", "--cube", "m.bin", "--slice", "t=5", "--out", "q.csv"]);
    assert!(String::from_utf8_lossy(&out.stderr).contains("outside"));
    let out = run(d.path(), &["export-plot", "--cube", "m.bin", "--slice", "omega=1", "--out", "q.csv"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn stream_emits_one_record_per_frame() {
    let d = tempfile::tempdir().unwrap();
    two_lfm(d.path());
    let samples: String = column(&d.path().join("x.csv"), 1).iter().map(|v| format!("{v}\n")).collect();
    let mut child = Command::new(env!("CARGO_BIN_EXE_chirpsep"))
        .current_dir(d.path())
        .args(["stream", "--fs", "256", "--sigma", "0.1", "--b", "3", "--components", "2", "--chunk", "37"])
        .args(["--manifest", "stream.json"])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(samples.as_bytes()).unwrap();
    let out = child.wait_with_output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let records: Vec<serde_json::Value> = String::from_utf8(out.stdout)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(records.len(), 256);
    let mut total = 0;
    for (j, r) in records.iter().enumerate() {
        assert_eq!(r["frame"], j as u64);
        for c in r["components"].as_array().unwrap() {
            total += c["samples"].as_array().unwrap().len();
        }
    }
    assert!(total >= 256);
    assert!(d.path().join("stream.json").exists());
}

#[test]
fn manifest_replays_bit_exact() {
    let d = tempfile::tempdir().unwrap();
    ok(
        d.path(),
        &["generate", "s-trend", "--fs", "8192", "--n", "2048", "--snr", "5", "--seed", "7", "--out", "n.csv"],
    );
    let first = std::fs::read(d.path().join("n.csv")).unwrap();
    let m: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(d.path().join("n.csv.manifest.json")).unwrap()).unwrap();
    assert_eq!(m["seed"], 7);
    let argv: Vec<String> = m["command_line"].as_array().unwrap()[1..]
        .iter()
        .map(|v| v.as_str().unwrap().to_owned())
        .collect();
    std::fs::remove_file(d.path().join("n.csv")).unwrap();
    let argv: Vec<&str> = argv.iter().map(String::as_str).collect();
    ok(d.path(), &argv);
    assert_eq!(std::fs::read(d.path().join("n.csv")).unwrap(), first);
}

#[test]
fn config_file_supplies_defaults_and_flags_win() {
    let d = tempfile::tempdir().unwrap();
    two_lfm(d.path());
    std::fs::write(d.path().join("cfg.toml"), "sigma = 0.1\nb = 20\ncomponents = 1\n").unwrap();
    ok(
        d.path(),
        &["--config", "cfg.toml", "separate", "--input", "x.csv", "--out-dir", "a", "--components", "2"],
    );
    assert!(d.path().join("a/component_2.csv").exists());
    std::fs::write(d.path().join("bad.toml"), "sigma = 0.1\nbogus = 1\n").unwrap();
    let out = run(d.path(), &["--config", "bad.toml", "separate", "--input", "x.csv", "--out-dir", "b"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn benchmark_writes_one_row_per_cell_and_method() {
    let d = tempfile::tempdir().unwrap();
    ok(
        d.path(),
        &[
            "benchmark", "--signal", "two-lfm", "--fs", "128", "--n", "128", "--snr-min", "0", "--snr-max", "10",
            "--snr-step", "10", "--seeds", "2", "--sigma", "0.1", "--components", "2", "--out", "b.csv",
        ],
    );
    let text = std::fs::read_to_string(d.path().join("b.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "method,snr_db,seed,rmse_x1,rmse_x2,rmse_avg,wall_s");
    assert_eq!(lines.count(), 2 * 2 * 2);
}
