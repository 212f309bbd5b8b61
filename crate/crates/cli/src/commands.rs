use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use chestseg::depth_io::{load_mask, normalize_frame, save_gray_image, SequenceManifest};
use chestseg::kv::KvWriter;
use chestseg::noise::inpaint_pepper;
use chestseg::phantom::{generate_phantom, save_phantom, PhantomSpec};
use chestseg::signal::{analyze_roi, manual_rectangle_mask, rough_rectangle, spectrum_plot, Rect, RoiReport};
use chestseg::{segment_sequence, with_workers, DepthSequence, Mask, Overlap, PipelineConfig};

use crate::{Cli, Command, CompareArgs, ExtractArgs, PipelineArgs, RenderArgs, SegmentArgs, SynthArgs};

pub const WORKERS_ENV: &str = "CHESTSEG_WORKERS";

pub fn run(cli: Cli) -> Result<()> {
    let workers = match std::env::var(WORKERS_ENV) {
        Ok(v) => Some(v.trim().parse::<usize>().with_context(|| format!("{WORKERS_ENV}={v} is not a count"))?),
        Err(_) => None,
    };
    with_workers(workers, || match cli.command {
        Command::Synth(a) => synth(a),
        Command::Segment(a) => segment(a),
        Command::Extract(a) => extract(a),
        Command::Compare(a) => compare(a),
        Command::Render(a) => render(a),
    })?
}

fn auto_or<T: std::str::FromStr>(flag: &str, value: &str) -> Result<Option<T>> {
    if value == "auto" {
        return Ok(None);
    }
    match value.parse() {
        Ok(v) => Ok(Some(v)),
        Err(_) => bail!("--{flag} expects a number or `auto`, got `{value}`"),
    }
}

impl PipelineArgs {
    fn resolve(&self) -> Result<PipelineConfig> {
        let mut cfg = match &self.config {
            Some(path) => PipelineConfig::read(path)?,
            None => PipelineConfig::default(),
        };
        let set = |slot: &mut f64, v: Option<f64>| {
            if let Some(v) = v {
                *slot = v;
            }
        };
        let set_n = |slot: &mut usize, v: Option<usize>| {
            if let Some(v) = v {
                *slot = v;
            }
        };
        set(&mut cfg.max_distance_mm, self.max_distance);
        set_n(&mut cfg.median_radius, self.median_radius);
        if let Some(m) = &self.margin {
            cfg.margin = auto_or("margin", m)?;
        }
        set(&mut cfg.canny.sigma, self.canny_sigma);
        set(&mut cfg.canny.low, self.canny_low);
        set(&mut cfg.canny.high, self.canny_high);
        set_n(&mut cfg.dilate_radius, self.dilate_radius);
        set(&mut cfg.segment_seconds, self.segment_seconds);
        if let Some(s) = &self.stride_seconds {
            cfg.stride_seconds = auto_or("stride-seconds", s)?;
        }
        set(&mut cfg.band_low_hz, self.band_low);
        set(&mut cfg.band_high_hz, self.band_high);
        set(&mut cfg.amp_threshold_frac, self.amp_frac);
        if let Some(w) = &self.window {
            cfg.window = w.parse().map_err(anyhow::Error::msg)?;
        }
        set_n(&mut cfg.open_radius, self.open_radius);
        set_n(&mut cfg.close_radius, self.close_radius);
        set(&mut cfg.min_area_frac, self.min_area_frac);
        set(&mut cfg.confidence_threshold, self.conf);
        set(&mut cfg.motion_threshold_mm, self.motion_thresh);
        cfg.validate()?;
        Ok(cfg)
    }
}

fn create_out(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create output directory {}", dir.display()))
}

fn write_text(path: PathBuf, text: String) -> Result<()> {
    fs::write(&path, text).with_context(|| format!("cannot write {}", path.display()))
}

fn load(manifest: &Path) -> Result<(SequenceManifest, DepthSequence)> {
    let m = SequenceManifest::read(manifest)?;
    let seq = m.load()?;
    Ok((m, seq))
}

fn synth(a: SynthArgs) -> Result<()> {
    let spec = match &a.spec {
        Some(path) => PhantomSpec::read(path)?,
        None => PhantomSpec::default(),
    };
    let (seq, truth) = generate_phantom(&spec, a.seed)?;
    let manifest = save_phantom(&a.out, &spec, &seq, &truth)?;
    println!("wrote {} frames to {}", seq.len(), manifest.display());
    Ok(())
}

fn segment(a: SegmentArgs) -> Result<()> {
    let cfg = a.pipeline.resolve()?;
    let (_, seq) = load(&a.manifest)?;
    let res = segment_sequence(&seq, &cfg)?;
    create_out(&a.out)?;
    save_gray_image(&res.mask, &a.out.join("mask.pgm"))?;
    save_gray_image(&res.confidence, &a.out.join("confidence.pgm"))?;
    write_text(a.out.join("config.txt"), cfg.to_kv())?;

    let mut report = KvWriter::new();
    let changes: Vec<String> = res.posture_changes.iter().map(usize::to_string).collect();
    report
        .entry("frames", seq.len())
        .entry("fps", seq.fps())
        .entry("segments", res.segments.len())
        .entry("included_segments", res.included_segments)
        .entry("posture_changes", if changes.is_empty() { "none".to_string() } else { changes.join(", ") })
        .entry("mask_area", res.mask.count());
    for s in &res.segments {
        report.entry(
            "segment",
            format!("start {}, included {}, refined_area {}", s.start, s.included, s.refined.count()),
        );
    }
    write_text(a.out.join("report.txt"), report.finish())?;

    if a.debug_images {
        save_gray_image(&res.ignore, &a.out.join("ignore.pgm"))?;
        for (i, s) in res.segments.iter().enumerate() {
            let dir = a.out.join(format!("segment_{i:02}"));
            create_out(&dir)?;
            save_gray_image(&s.inpainted_first, &dir.join("inpainted.pgm"))?;
            save_gray_image(&s.ignore, &dir.join("ignore.pgm"))?;
            save_gray_image(&s.amplitude, &dir.join("amplitude.pgm"))?;
            save_gray_image(&s.candidate, &dir.join("thresholded.pgm"))?;
            save_gray_image(&s.refined, &dir.join("refined.pgm"))?;
        }
    }
    println!(
        "mask of {} pixels from {} of {} segments written to {}",
        res.mask.count(),
        res.included_segments,
        res.segments.len(),
        a.out.display()
    );
    Ok(())
}

fn extract(a: ExtractArgs) -> Result<()> {
    let cfg = a.pipeline.resolve()?;
    let (_, seq) = load(&a.manifest)?;
    let mask = load_mask(&a.mask)?;
    let (signal, spectrum, report) = analyze_roi(&seq, &mask, &cfg.signal_params())?;
    create_out(&a.out)?;
    let mut csv = String::from("frame,time_s,value\n");
    for (t, v) in signal.samples.iter().enumerate() {
        csv.push_str(&format!("{t},{},{v}\n", t as f64 / signal.fps));
    }
    write_text(a.out.join("signal.csv"), csv)?;
    write_text(a.out.join("report.txt"), report.to_kv())?;
    save_gray_image(&spectrum_plot(&spectrum.mags, 128), &a.out.join("spectrum.pgm"))?;
    println!("dominant frequency {:.4} Hz, spectral SNR {:.2}", report.dominant_freq_hz, report.spectral_snr);
    Ok(())
}

fn parse_rect(text: &str) -> Result<Rect> {
    let parts: Vec<usize> = text
        .split(',')
        .map(|p| p.trim().parse())
        .collect::<Result<_, _>>()
        .with_context(|| format!("--rect expects x,y,w,h, got `{text}`"))?;
    match parts[..] {
        [x, y, w, h] => Ok(Rect { x, y, w, h }),
        _ => bail!("--rect expects four values x,y,w,h, got `{text}`"),
    }
}

fn report_entries(w: &mut KvWriter, prefix: &str, r: &RoiReport) {
    w.entry(&format!("{prefix}_dominant_freq_hz"), r.dominant_freq_hz)
        .entry(&format!("{prefix}_in_band_peak_amplitude"), r.in_band_peak_amplitude)
        .entry(&format!("{prefix}_spectral_snr"), r.spectral_snr)
        .entry(&format!("{prefix}_mask_area"), r.mask_area);
}

fn compare(a: CompareArgs) -> Result<()> {
    let cfg = a.pipeline.resolve()?;
    let (manifest, seq) = load(&a.manifest)?;
    let (w, h) = seq.dims();
    let auto = load_mask(&a.mask)?;
    let truth: Option<Mask> = match &a.truth {
        Some(p) => Some(load_mask(p)?),
        None => manifest.load_ground_truth_mask()?,
    };
    let rect = match (&a.rect, &truth) {
        (Some(text), _) => parse_rect(text)?,
        (None, Some(t)) => rough_rectangle(t, 4.0)?,
        (None, None) => bail!("no --rect given and no ground-truth mask to derive one from"),
    };
    let manual = manual_rectangle_mask(w, h, rect)?;
    let params = cfg.signal_params();
    let (_, _, auto_report) = analyze_roi(&seq, &auto, &params).context("automatic mask")?;
    let (_, _, manual_report) = analyze_roi(&seq, &manual, &params).context("manual rectangle")?;

    let mut out = KvWriter::new();
    report_entries(&mut out, "auto", &auto_report);
    out.entry("manual_rect", format!("{}, {}, {}, {}", rect.x, rect.y, rect.w, rect.h));
    report_entries(&mut out, "manual", &manual_report);
    out.entry("snr_ratio", auto_report.spectral_snr / manual_report.spectral_snr);
    if let Some(t) = &truth {
        let o = Overlap::of(&auto, t);
        out.entry("iou", o.iou).entry("precision", o.precision).entry("recall", o.recall);
    }
    if let Some(f) = manifest.ground_truth_freq_hz {
        let bin = seq.fps() / cfg.segment_config(seq.fps())?.segment_len as f64;
        let err = (auto_report.dominant_freq_hz - f).abs();
        out.entry("truth_freq_hz", f)
            .entry("segment_bin_hz", bin)
            .entry("freq_error_hz", err)
            .entry("freq_within_one_bin", err <= bin);
    }
    create_out(&a.out)?;
    write_text(a.out.join("report.txt"), out.finish())?;
    println!(
        "auto SNR {:.2} vs manual {:.2}; dominant {:.4} Hz",
        auto_report.spectral_snr, manual_report.spectral_snr, auto_report.dominant_freq_hz
    );
    Ok(())
}

fn render(a: RenderArgs) -> Result<()> {
    let cfg = a.pipeline.resolve()?;
    let (_, seq) = load(&a.manifest)?;
    create_out(&a.out)?;
    for &i in &a.frames {
        if i >= seq.len() {
            bail!("frame {i} out of range: the sequence has {} frames", seq.len());
        }
        let norm = normalize_frame(seq.frame(i), cfg.max_distance_mm)?;
        save_gray_image(&norm, &a.out.join(format!("frame_{i:05}.pgm")))?;
        if a.inpaint {
            let clean = inpaint_pepper(&norm, cfg.median_radius)?;
            save_gray_image(&clean, &a.out.join(format!("frame_{i:05}_inpainted.pgm")))?;
        }
    }
    println!("rendered {} frames to {}", a.frames.len(), a.out.display());
    Ok(())
}
