//! End-to-end tests of the `uwbsim` binary: flag validation, output schema,
//! manifest reproducibility and the inspection subcommands.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn uwbsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_uwbsim"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn read(path: &Path) -> String {
    fs::read_to_string(path).unwrap_or_else(|e| panic!("read {}: {e}", path.display()))
}

#[test]
fn sweep_writes_csv_svg_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let res = uwbsim(&[
        "sweep", "--scheme", "arake", "--channel", "awgn", "--snr", "0:2:20", "--bits", "2000",
        "--min-errors", "20", "--seed", "7", "--out", out.to_str().unwrap(),
    ]);
    assert!(res.status.success(), "{}", stderr(&res));

    let csv = read(&out.join("results.csv"));
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "snr_db,errors,trials,ber,ci_low,ci_high,censored");
    assert_eq!(lines.len(), 12, "11 grid points plus header");

    let svg = read(&out.join("ber_curve.svg"));
    assert!(svg.starts_with("<svg"));
    assert!(svg.contains("</svg>"));

    let manifest = read(&out.join("manifest.txt"));
    assert!(manifest.contains("scheme = arake"));
    assert!(manifest.contains("seed = 7"));
}

#[test]
fn dtr_defaults_use_standard_timings() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let res = uwbsim(&[
        "sweep", "--scheme", "dtr", "--channel", "cm1", "--snr", "8", "--bits", "2000",
        "--min-errors", "20", "--seed", "1", "--out", out.to_str().unwrap(),
    ]);
    assert!(res.status.success(), "{}", stderr(&res));
    let manifest = read(&out.join("manifest.txt"));
    assert!(manifest.contains("# tf = 10.75"));
    assert!(manifest.contains("# td = 8.75"));
    assert!(manifest.contains("# tw = 0.7"));
    assert!(manifest.contains("coherence = per-2-symbols"));

    // The AWGN channel never redraws, so the resolved policy is static.
    let out2 = dir.path().join("run2");
    let res = uwbsim(&[
        "sweep", "--scheme", "dtr", "--channel", "awgn", "--snr", "8", "--bits", "2000",
        "--min-errors", "20", "--seed", "1", "--out", out2.to_str().unwrap(),
    ]);
    assert!(res.status.success(), "{}", stderr(&res));
    assert!(read(&out2.join("manifest.txt")).contains("coherence = static"));
}

#[test]
fn negative_snr_step_is_rejected() {
    let res = uwbsim(&[
        "sweep", "--scheme", "sr", "--channel", "awgn", "--snr", "10:-2:0", "--out", "/tmp/unused",
    ]);
    assert!(!res.status.success());
    assert!(stderr(&res).contains("snr"), "stderr: {}", stderr(&res));
}

#[test]
fn unknown_config_key_is_rejected_by_name() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    fs::write(&cfg, "scheme = sr\nchannel = awgn\nsnr = 8\nbogus-knob = 3\n").unwrap();
    let res = uwbsim(&["sweep", "--config", cfg.to_str().unwrap()]);
    assert!(!res.status.success());
    assert!(stderr(&res).contains("bogus-knob"), "stderr: {}", stderr(&res));
}

#[test]
fn off_grid_sample_interval_is_rejected() {
    let res = uwbsim(&[
        "sweep", "--scheme", "sr", "--channel", "awgn", "--snr", "8", "--dt", "0.03",
        "--out", "/tmp/unused",
    ]);
    assert!(!res.status.success());
    assert!(stderr(&res).contains("dt"), "stderr: {}", stderr(&res));
}

#[test]
fn contradictory_budget_is_rejected() {
    let res = uwbsim(&[
        "sweep", "--scheme", "sr", "--channel", "awgn", "--snr", "8", "--bits", "100",
        "--min-errors", "100", "--out", "/tmp/unused",
    ]);
    assert!(!res.status.success());
    assert!(stderr(&res).contains("min-errors"), "stderr: {}", stderr(&res));
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let res = uwbsim(&[
            "sweep", "--scheme", "dtr", "--channel", "cm1", "--snr", "10,14", "--bits", "3000",
            "--min-errors", "30", "--seed", "42", "--out", out.to_str().unwrap(),
        ]);
        assert!(res.status.success(), "{}", stderr(&res));
    }
    assert_eq!(read(&a.join("results.csv")), read(&b.join("results.csv")));
}

#[test]
fn manifest_rerun_reproduces_results() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("first");
    let res = uwbsim(&[
        "sweep", "--scheme", "sr", "--channel", "cm2", "--snr", "12:4:16", "--bits", "3000",
        "--min-errors", "30", "--seed", "9", "--out", first.to_str().unwrap(),
    ]);
    assert!(res.status.success(), "{}", stderr(&res));

    let second = dir.path().join("second");
    let manifest = first.join("manifest.txt");
    let res = uwbsim(&[
        "sweep", "--config", manifest.to_str().unwrap(), "--out", second.to_str().unwrap(),
    ]);
    assert!(res.status.success(), "{}", stderr(&res));
    assert_eq!(read(&first.join("results.csv")), read(&second.join("results.csv")));
}

#[test]
fn censored_points_report_upper_bounds() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let res = uwbsim(&[
        "sweep", "--scheme", "arake", "--channel", "awgn", "--snr", "30", "--bits", "2000",
        "--min-errors", "50", "--seed", "3", "--out", out.to_str().unwrap(),
    ]);
    assert!(res.status.success(), "{}", stderr(&res));
    let csv = read(&out.join("results.csv"));
    let row: Vec<&str> = csv.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(row[6], "1", "point must be censored");
    assert_eq!(row[3], row[5], "ber column holds the upper bound");
}

#[test]
fn fixed_channel_file_is_accepted() {
    let dir = tempfile::tempdir().unwrap();
    let chan = dir.path().join("two_tap.chan");
    fs::write(&chan, "demo 11 1.0\n0.000000 0.8\n1.000000 0.6\n").unwrap();
    let out = dir.path().join("run");
    let res = uwbsim(&[
        "sweep", "--scheme", "arake",
        "--channel", &format!("file:{}", chan.display()),
        "--snr", "6", "--bits", "3000", "--min-errors", "30", "--seed", "2",
        "--out", out.to_str().unwrap(),
    ]);
    assert!(res.status.success(), "{}", stderr(&res));
    let csv = read(&out.join("results.csv"));
    assert_eq!(csv.lines().count(), 2);

    let bad = dir.path().join("bad.chan");
    fs::write(&bad, "demo 11 1.0\n0.5 0.8\n0.25 0.6\n").unwrap();
    let res = uwbsim(&[
        "sweep", "--scheme", "arake", "--channel", &format!("file:{}", bad.display()),
        "--snr", "6", "--out", "/tmp/unused",
    ]);
    assert!(!res.status.success(), "non-increasing delays must be rejected");
}

#[test]
fn awgn_sweep_tracks_the_analytic_curve() {
    // Coarse check of the whole pipeline through the binary: measured BER at
    // each point within a factor of two of Q(sqrt(2 Eb/N0)).
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let res = uwbsim(&[
        "sweep", "--scheme", "arake", "--channel", "awgn", "--snr", "2:2:6", "--bits", "100000",
        "--min-errors", "60", "--seed", "5", "--out", out.to_str().unwrap(),
    ]);
    assert!(res.status.success(), "{}", stderr(&res));
    let csv = read(&out.join("results.csv"));
    let expected = [3.75e-2, 1.25e-2, 2.39e-3];
    for (line, q) in csv.lines().skip(1).zip(expected) {
        let ber: f64 = line.split(',').nth(3).unwrap().parse().unwrap();
        assert!(ber > 0.5 * q && ber < 2.0 * q, "ber {ber} vs analytic {q}");
    }
}

#[test]
fn chanstats_is_deterministic() {
    let args = ["chanstats", "--channel", "cm1", "--n", "300", "--seed", "1"];
    let a = uwbsim(&args);
    let b = uwbsim(&args);
    assert!(a.status.success(), "{}", stderr(&a));
    let line = stdout(&a);
    assert_eq!(line, stdout(&b));
    assert!(line.contains("tau_m="));
    assert!(line.contains("tau_rms="));
    assert!(line.contains("np10db="));
    assert!(line.contains("t_mds="));
}

#[test]
fn dump_waveform_contains_frames_and_decisions() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("burst.txt");
    let res = uwbsim(&[
        "dump-waveform", "--scheme", "sr", "--bits", "+1,-1", "--ns", "1", "--out",
        file.to_str().unwrap(),
    ]);
    assert!(res.status.success(), "{}", stderr(&res));
    let text = read(&file);
    assert!(text.contains("# frames: 2"));
    assert!(text.contains("# decisions: +1,-1"), "noiseless single-tap burst decodes cleanly");
    let samples = text.lines().filter(|l| !l.starts_with('#')).count();
    // Two 5.375 ns frames at 0.025 ns per sample, plus pulse and padding tail.
    assert!(samples > 2 * 215, "expected at least two frames of samples, got {samples}");

    let bad = uwbsim(&["dump-waveform", "--scheme", "sr", "--bits", "+1,2"]);
    assert!(!bad.status.success());
}
