use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn chestseg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_chestseg"))
        .args(args)
        .env_remove("CHESTSEG_WORKERS")
        .output()
        .expect("binary runs")
}

fn ok(out: &Output) {
    assert!(
        out.status.success(),
        "stdout:\n{}\nstderr:\n{}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn listing(dir: &Path) -> BTreeSet<String> {
    let mut names = BTreeSet::new();
    for entry in walk(dir) {
        names.insert(entry.strip_prefix(dir).unwrap().to_string_lossy().replace('\\', "/"));
    }
    names
}

fn walk(dir: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    for e in fs::read_dir(dir).unwrap() {
        let path = e.unwrap().path();
        if path.is_dir() {
            out.extend(walk(&path));
        } else {
            out.push(path);
        }
    }
    out
}

fn report_value(path: &Path, key: &str) -> String {
    let text = fs::read_to_string(path).unwrap();
    text.lines()
        .find_map(|l| l.strip_prefix(&format!("{key} = ")))
        .unwrap_or_else(|| panic!("{key} missing from {}", path.display()))
        .to_string()
}

/// 96x72, 40 s, two 20 s segments.
fn small_phantom(dir: &Path) -> PathBuf {
    let spec = dir.join("spec.txt");
    fs::write(
        &spec,
        "width = 96\nheight = 72\nduration_s = 40\n\
         body_center_x = 48\nbody_center_y = 36\nbody_axis_x = 30\nbody_axis_y = 14\n\
         chest_center_x = 42\nchest_center_y = 36\nchest_axis_x = 9\nchest_axis_y = 8\n",
    )
    .unwrap();
    let out = dir.join("phantom");
    ok(&chestseg(&["synth", "--spec", p(&spec), "--seed", "3", "--out", p(&out)]));
    out.join("manifest.txt")
}

#[test]
fn help_exits_zero() {
    let out = chestseg(&["segment", "--help"]);
    ok(&out);
    assert!(String::from_utf8_lossy(&out.stdout).contains("Usage"));
}

#[test]
fn unknown_flag_fails() {
    let out = chestseg(&["segment", "--no-such-flag", "m.txt", "--out", "x"]);
    assert!(!out.status.success());
    assert!(stderr(&out).contains("--no-such-flag"));
}

#[test]
fn one_frame_sequence_is_too_short() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("spec.txt");
    fs::write(&spec, "duration_s = 0.1\n").unwrap();
    ok(&chestseg(&["synth", "--spec", p(&spec), "--out", p(&dir.path().join("ph"))]));
    let out = chestseg(&["segment", p(&dir.path().join("ph/manifest.txt")), "--out", p(&dir.path().join("seg"))]);
    assert!(!out.status.success());
    assert!(stderr(&out).contains("sequence shorter than one segment"), "{}", stderr(&out));
}

#[test]
fn bad_configuration_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.txt");
    fs::write(&cfg, "confidence_threshold = 2\n").unwrap();
    let out = chestseg(&["segment", "m.txt", "--config", p(&cfg), "--out", p(dir.path())]);
    assert!(!out.status.success());
    assert!(stderr(&out).contains("confidence threshold"), "{}", stderr(&out));

    let out = chestseg(&["segment", "m.txt", "--margin", "wide", "--out", p(dir.path())]);
    assert!(!out.status.success());
    let out = chestseg(&["segment", "missing-manifest.txt", "--out", p(dir.path())]);
    assert!(!out.status.success());
    assert!(stderr(&out).contains("missing-manifest.txt"), "{}", stderr(&out));
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = small_phantom(dir.path());
    let cfg = dir.path().join("cfg.txt");
    fs::write(&cfg, "segment_seconds = 40\nconfidence_threshold = 0.9\n").unwrap();
    let seg = dir.path().join("seg");
    ok(&chestseg(&[
        "segment",
        p(&manifest),
        "--config",
        p(&cfg),
        "--segment-seconds",
        "20",
        "--out",
        p(&seg),
    ]));
    assert_eq!(report_value(&seg.join("config.txt"), "segment_seconds"), "20");
    assert_eq!(report_value(&seg.join("config.txt"), "confidence_threshold"), "0.9");
    assert_eq!(report_value(&seg.join("report.txt"), "segments"), "2");
}

#[test]
fn artifact_sets_per_subcommand() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = small_phantom(dir.path());
    let phantom = manifest.parent().unwrap();
    let names = listing(phantom);
    for f in ["manifest.txt", "phantom.txt", "ground_truth.txt", "ground_truth_mask.pgm", "ground_truth_epoch_00.pgm"] {
        assert!(names.contains(f), "{f} missing");
    }
    assert_eq!(names.iter().filter(|n| n.starts_with("frames/")).count(), 400);
    assert_eq!(names.len(), 405);

    let seg = dir.path().join("seg");
    ok(&chestseg(&["segment", p(&manifest), "--segment-seconds", "20", "--out", p(&seg)]));
    let want: BTreeSet<String> = ["mask.pgm", "confidence.pgm", "report.txt", "config.txt"].map(String::from).into();
    assert_eq!(listing(&seg), want);

    let dbg = dir.path().join("dbg");
    ok(&chestseg(&["segment", p(&manifest), "--segment-seconds", "20", "--debug-images", "--out", p(&dbg)]));
    let mut want = want.clone();
    want.insert("ignore.pgm".into());
    for s in 0..2 {
        for f in ["inpainted", "ignore", "amplitude", "thresholded", "refined"] {
            want.insert(format!("segment_{s:02}/{f}.pgm"));
        }
    }
    assert_eq!(listing(&dbg), want);

    let ext = dir.path().join("ext");
    ok(&chestseg(&["extract", p(&manifest), "--mask", p(&seg.join("mask.pgm")), "--out", p(&ext)]));
    let want: BTreeSet<String> = ["signal.csv", "report.txt", "spectrum.pgm"].map(String::from).into();
    assert_eq!(listing(&ext), want);
    let csv = fs::read_to_string(ext.join("signal.csv")).unwrap();
    assert_eq!(csv.lines().count(), 401);

    let cmp = dir.path().join("cmp");
    ok(&chestseg(&["compare", p(&manifest), "--mask", p(&seg.join("mask.pgm")), "--rect", "30,26,24,20", "--out", p(&cmp)]));
    assert_eq!(listing(&cmp), BTreeSet::from(["report.txt".to_string()]));
    assert_eq!(report_value(&cmp.join("report.txt"), "manual_rect"), "30, 26, 24, 20");

    let ren = dir.path().join("ren");
    ok(&chestseg(&["render", p(&manifest), "--frames", "0,5", "--inpaint", "--out", p(&ren)]));
    let want: BTreeSet<String> = ["frame_00000.pgm", "frame_00000_inpainted.pgm", "frame_00005.pgm", "frame_00005_inpainted.pgm"]
        .map(String::from)
        .into();
    assert_eq!(listing(&ren), want);
    assert!(!chestseg(&["render", p(&manifest), "--frames", "400", "--out", p(&ren)]).status.success());
}

#[test]
fn worker_count_does_not_change_output() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = small_phantom(dir.path());
    let mut masks = Vec::new();
    for workers in ["1", "3"] {
        let out = dir.path().join(format!("seg{workers}"));
        let status = Command::new(env!("CARGO_BIN_EXE_chestseg"))
            .args(["segment", p(&manifest), "--segment-seconds", "20", "--out", p(&out)])
            .env("CHESTSEG_WORKERS", workers)
            .output()
            .unwrap();
        ok(&status);
        masks.push((fs::read(out.join("mask.pgm")).unwrap(), fs::read(out.join("confidence.pgm")).unwrap()));
    }
    assert_eq!(masks[0], masks[1]);

    let bad = Command::new(env!("CARGO_BIN_EXE_chestseg"))
        .args(["segment", p(&manifest), "--out", p(dir.path())])
        .env("CHESTSEG_WORKERS", "many")
        .output()
        .unwrap();
    assert!(!bad.status.success());
    assert!(stderr(&bad).contains("CHESTSEG_WORKERS"));
}

#[test]
fn default_phantom_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let ph = dir.path().join("ph");
    ok(&chestseg(&["synth", "--out", p(&ph)]));
    let manifest = ph.join("manifest.txt");
    let seg = dir.path().join("seg");
    ok(&chestseg(&["segment", p(&manifest), "--out", p(&seg)]));
    let cmp = dir.path().join("cmp");
    ok(&chestseg(&["compare", p(&manifest), "--mask", p(&seg.join("mask.pgm")), "--out", p(&cmp)]));
    let report = cmp.join("report.txt");
    assert_eq!(report_value(&report, "truth_freq_hz"), "0.25");
    assert_eq!(report_value(&report, "freq_within_one_bin"), "true");
    let err: f64 = report_value(&report, "freq_error_hz").parse().unwrap();
    assert!(err <= 10.0 / 300.0);
    let auto: f64 = report_value(&report, "auto_spectral_snr").parse().unwrap();
    let manual: f64 = report_value(&report, "manual_spectral_snr").parse().unwrap();
    assert!(auto >= manual, "{auto} < {manual}");
}
