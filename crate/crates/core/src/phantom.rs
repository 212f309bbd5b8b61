//! Synthetic depth recordings of a breathing sleeper with known ground truth.
//!
//! Scene: a flat bed plane, an elliptical body closer to the camera, and an
//! elliptical chest inside the body whose depth follows the breathing motion
//!
//! ```text
//! depth(t) = body_depth − A · (sin(2πf·t/fps) + h · sin(4πf·t/fps))
//! ```
//!
//! Noise is applied in sensor order: zero-mean Gaussian with a standard
//! deviation proportional to the normalized distance from the frame center,
//! uniform flicker on the body outline (±1 px), rounding to whole
//! millimeters, then independent dropouts (value 0) with probability
//! `pepper_prob`. Frame `t` draws from ChaCha stream `t` of the seed, so
//! frames are reproducible and can be rendered in parallel.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::depth_io::{save_gray_image, save_sequence, DepthFrame, DepthSequence, ManifestExtras};
use crate::error::{Error, Result};
use crate::grid::Mask;
use crate::kv::{KvDoc, KvWriter};
use crate::morph::{dilate, erode};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ellipse {
    pub cx: f64,
    pub cy: f64,
    /// Semi-axes in pixels.
    pub ax: f64,
    pub ay: f64,
}

impl Ellipse {
    pub fn contains(&self, x: f64, y: f64) -> bool {
        let u = (x - self.cx) / self.ax;
        let v = (y - self.cy) / self.ay;
        u * u + v * v <= 1.0
    }

    pub fn raster(&self, width: usize, height: usize, dx: i32, dy: i32) -> Mask {
        let shifted = Ellipse {
            cx: self.cx + f64::from(dx),
            cy: self.cy + f64::from(dy),
            ..*self
        };
        Mask::from_fn(width, height, |x, y| shifted.contains(x as f64, y as f64))
    }
}

/// From `time_s` on, the body sits at `(dx, dy)` pixels from its initial place.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PostureEvent {
    pub time_s: f64,
    pub dx: i32,
    pub dy: i32,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhantomNoise {
    pub pepper_prob: f64,
    /// Gaussian standard deviation (mm) per unit of normalized radius.
    pub radial_noise_gain: f64,
    pub edge_flicker_mm: f64,
}

impl PhantomNoise {
    pub const NONE: PhantomNoise = PhantomNoise {
        pepper_prob: 0.0,
        radial_noise_gain: 0.0,
        edge_flicker_mm: 0.0,
    };
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhantomSpec {
    pub width: usize,
    pub height: usize,
    pub fps: f64,
    pub duration_s: f64,
    pub bed_depth_mm: f64,
    pub body: Ellipse,
    pub body_depth_mm: f64,
    pub chest: Ellipse,
    pub breathing_amplitude_mm: f64,
    pub breathing_freq_hz: f64,
    /// Relative amplitude of an added second harmonic; 0 for a pure sinusoid.
    pub second_harmonic: f64,
    pub noise: PhantomNoise,
    pub posture_events: Vec<PostureEvent>,
}

impl Default for PhantomSpec {
    /// 320×240 at 10 fps for 120 s, breathing at 0.25 Hz with 5 mm amplitude,
    /// 5 % dropouts and 10 mm radial noise gain.
    fn default() -> Self {
        PhantomSpec {
            width: 320,
            height: 240,
            fps: 10.0,
            duration_s: 120.0,
            bed_depth_mm: 2000.0,
            body: Ellipse {
                cx: 160.0,
                cy: 120.0,
                ax: 100.0,
                ay: 45.0,
            },
            body_depth_mm: 1750.0,
            chest: Ellipse {
                cx: 135.0,
                cy: 120.0,
                ax: 28.0,
                ay: 25.0,
            },
            breathing_amplitude_mm: 5.0,
            breathing_freq_hz: 0.25,
            second_harmonic: 0.0,
            noise: PhantomNoise {
                pepper_prob: 0.05,
                radial_noise_gain: 10.0,
                edge_flicker_mm: 20.0,
            },
            posture_events: Vec::new(),
        }
    }
}

/// Chest ground truth for one stretch of frames with a fixed posture.
#[derive(Debug, Clone, PartialEq)]
pub struct Epoch {
    pub start_frame: usize,
    pub chest_mask: Mask,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    /// Chest pixels at the first frame.
    pub chest_mask: Mask,
    pub breathing_freq_hz: f64,
    pub epochs: Vec<Epoch>,
}

impl PhantomSpec {
    /// Same scene with every noise source switched off.
    pub fn clean(mut self) -> Self {
        self.noise = PhantomNoise::NONE;
        self
    }

    pub fn frame_count(&self) -> usize {
        (self.duration_s * self.fps).round() as usize
    }

    fn sorted_events(&self) -> Vec<PostureEvent> {
        let mut events = self.posture_events.clone();
        events.sort_by(|a, b| a.time_s.total_cmp(&b.time_s));
        events
    }

    /// Body offset in effect at frame `t`.
    pub fn offset_at(&self, t: usize) -> (i32, i32) {
        offset_at(&self.sorted_events(), t, self.fps)
    }

    /// Chest displacement towards the camera at frame `t`, in mm.
    pub fn breathing_displacement(&self, t: usize) -> f64 {
        let phase = 2.0 * std::f64::consts::PI * self.breathing_freq_hz * t as f64 / self.fps;
        self.breathing_amplitude_mm * (phase.sin() + self.second_harmonic * (2.0 * phase).sin())
    }

    /// Noise-free depth before rounding.
    pub fn ideal_depth(&self, t: usize, x: usize, y: usize) -> f64 {
        let (dx, dy) = self.offset_at(t);
        let (px, py) = (x as f64 - f64::from(dx), y as f64 - f64::from(dy));
        if self.chest.contains(px, py) && self.body.contains(px, py) {
            self.body_depth_mm - self.breathing_displacement(t)
        } else if self.body.contains(px, py) {
            self.body_depth_mm
        } else {
            self.bed_depth_mm
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::config(msg));
        if self.width == 0 || self.height == 0 {
            return bad("phantom frame must be non-empty".into());
        }
        if !(self.fps > 0.0) || !(self.duration_s > 0.0) || self.frame_count() == 0 {
            return bad(format!("fps {} and duration {} must give at least one frame", self.fps, self.duration_s));
        }
        if !(self.breathing_freq_hz > 0.0 && self.breathing_freq_hz < self.fps / 2.0) {
            return bad(format!(
                "breathing frequency {} Hz must lie in (0, fps/2 = {})",
                self.breathing_freq_hz,
                self.fps / 2.0
            ));
        }
        if !(0.0..=1.0).contains(&self.noise.pepper_prob) {
            return bad(format!("pepper probability {} outside [0, 1]", self.noise.pepper_prob));
        }
        if self.noise.radial_noise_gain < 0.0 || self.noise.edge_flicker_mm < 0.0 || self.breathing_amplitude_mm < 0.0 {
            return bad("noise magnitudes and breathing amplitude must be non-negative".into());
        }
        if !(self.body_depth_mm > 0.0 && self.body_depth_mm < self.bed_depth_mm && self.bed_depth_mm <= 65535.0) {
            return bad(format!(
                "need 0 < body depth ({}) < bed depth ({}) <= 65535",
                self.body_depth_mm, self.bed_depth_mm
            ));
        }
        if !(self.body.ax > 0.0 && self.body.ay > 0.0 && self.chest.ax > 0.0 && self.chest.ay > 0.0) {
            return bad("ellipse axes must be positive".into());
        }
        let body = self.body.raster(self.width, self.height, 0, 0);
        let chest = self.chest.raster(self.width, self.height, 0, 0);
        if !chest.is_subset_of(&body) {
            return bad("chest region must lie inside the body".into());
        }
        let offsets = std::iter::once((0, 0)).chain(self.posture_events.iter().map(|e| (e.dx, e.dy)));
        for (dx, dy) in offsets {
            let (cx, cy) = (self.body.cx + f64::from(dx), self.body.cy + f64::from(dy));
            if cx - self.body.ax < 0.0
                || cy - self.body.ay < 0.0
                || cx + self.body.ax > (self.width - 1) as f64
                || cy + self.body.ay > (self.height - 1) as f64
            {
                return Err(Error::OutOfBounds(format!(
                    "body offset ({dx}, {dy}) leaves the {}x{} frame",
                    self.width, self.height
                )));
            }
        }
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let doc = KvDoc::read(path)?;
        let d = PhantomSpec::default();
        let ellipse = |prefix: &str, e: Ellipse| -> Result<Ellipse> {
            Ok(Ellipse {
                cx: doc.or_default(&format!("{prefix}_center_x"), e.cx)?,
                cy: doc.or_default(&format!("{prefix}_center_y"), e.cy)?,
                ax: doc.or_default(&format!("{prefix}_axis_x"), e.ax)?,
                ay: doc.or_default(&format!("{prefix}_axis_y"), e.ay)?,
            })
        };
        let mut posture_events = Vec::new();
        for (line, value) in doc.all("posture_event") {
            let parts: Vec<&str> = value.split(',').map(str::trim).collect();
            let parsed = match parts.as_slice() {
                [t, dx, dy] => t.parse().ok().zip(dx.parse().ok()).zip(dy.parse().ok()),
                _ => None,
            };
            let ((time_s, dx), dy) = parsed
                .ok_or_else(|| doc.error_at(line, format!("posture_event needs `time_s, dx, dy`, got `{value}`")))?;
            posture_events.push(PostureEvent { time_s, dx, dy });
        }
        let spec = PhantomSpec {
            width: doc.or_default("width", d.width)?,
            height: doc.or_default("height", d.height)?,
            fps: doc.or_default("fps", d.fps)?,
            duration_s: doc.or_default("duration_s", d.duration_s)?,
            bed_depth_mm: doc.or_default("bed_depth_mm", d.bed_depth_mm)?,
            body: ellipse("body", d.body)?,
            body_depth_mm: doc.or_default("body_depth_mm", d.body_depth_mm)?,
            chest: ellipse("chest", d.chest)?,
            breathing_amplitude_mm: doc.or_default("breathing_amplitude_mm", d.breathing_amplitude_mm)?,
            breathing_freq_hz: doc.or_default("breathing_freq_hz", d.breathing_freq_hz)?,
            second_harmonic: doc.or_default("second_harmonic", d.second_harmonic)?,
            noise: PhantomNoise {
                pepper_prob: doc.or_default("pepper_prob", d.noise.pepper_prob)?,
                radial_noise_gain: doc.or_default("radial_noise_gain", d.noise.radial_noise_gain)?,
                edge_flicker_mm: doc.or_default("edge_flicker_mm", d.noise.edge_flicker_mm)?,
            },
            posture_events,
        };
        doc.finish()?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_kv(&self) -> String {
        let mut w = KvWriter::new();
        w.entry("width", self.width)
            .entry("height", self.height)
            .entry("fps", self.fps)
            .entry("duration_s", self.duration_s)
            .entry("bed_depth_mm", self.bed_depth_mm)
            .entry("body_center_x", self.body.cx)
            .entry("body_center_y", self.body.cy)
            .entry("body_axis_x", self.body.ax)
            .entry("body_axis_y", self.body.ay)
            .entry("body_depth_mm", self.body_depth_mm)
            .entry("chest_center_x", self.chest.cx)
            .entry("chest_center_y", self.chest.cy)
            .entry("chest_axis_x", self.chest.ax)
            .entry("chest_axis_y", self.chest.ay)
            .entry("breathing_amplitude_mm", self.breathing_amplitude_mm)
            .entry("breathing_freq_hz", self.breathing_freq_hz)
            .entry("second_harmonic", self.second_harmonic)
            .entry("pepper_prob", self.noise.pepper_prob)
            .entry("radial_noise_gain", self.noise.radial_noise_gain)
            .entry("edge_flicker_mm", self.noise.edge_flicker_mm);
        for e in &self.posture_events {
            w.entry("posture_event", format!("{}, {}, {}", e.time_s, e.dx, e.dy));
        }
        w.finish()
    }
}

fn offset_at(sorted_events: &[PostureEvent], t: usize, fps: f64) -> (i32, i32) {
    let time = t as f64 / fps;
    sorted_events
        .iter()
        .rev()
        .find(|e| e.time_s <= time)
        .map_or((0, 0), |e| (e.dx, e.dy))
}

struct Layout {
    body: Mask,
    chest: Mask,
    outline: Mask,
}

fn layout(spec: &PhantomSpec, dx: i32, dy: i32) -> Layout {
    let body = spec.body.raster(spec.width, spec.height, dx, dy);
    let chest = spec.chest.raster(spec.width, spec.height, dx, dy).intersection(&body);
    let outline = dilate(&body, 1).difference(&erode(&body, 1));
    Layout { body, chest, outline }
}

fn render_frame(spec: &PhantomSpec, seed: u64, t: usize, lay: &Layout, sigma: &[f64]) -> DepthFrame {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(t as u64);
    let chest_depth = spec.body_depth_mm - spec.breathing_displacement(t);
    let noise = spec.noise;
    let data = (0..spec.width * spec.height)
        .map(|i| {
            let mut depth = if lay.chest.as_slice()[i] {
                chest_depth
            } else if lay.body.as_slice()[i] {
                spec.body_depth_mm
            } else {
                spec.bed_depth_mm
            };
            if sigma[i] > 0.0 {
                let z: f64 = rng.sample(StandardNormal);
                depth += sigma[i] * z;
            }
            if noise.edge_flicker_mm > 0.0 && lay.outline.as_slice()[i] {
                depth += rng.random_range(-noise.edge_flicker_mm..=noise.edge_flicker_mm);
            }
            let quantized = depth.round().clamp(0.0, 65535.0) as u16;
            if noise.pepper_prob > 0.0 && rng.random::<f64>() < noise.pepper_prob {
                0
            } else {
                quantized
            }
        })
        .collect();
    DepthFrame::new(spec.width, spec.height, data).expect("sized by construction")
}

/// Renders the recording described by `spec`; identical `(spec, seed)` give
/// identical frames.
pub fn generate_phantom(spec: &PhantomSpec, seed: u64) -> Result<(DepthSequence, GroundTruth)> {
    spec.validate()?;
    let (w, h) = (spec.width, spec.height);
    let events = spec.sorted_events();
    let n = spec.frame_count();

    let (xc, yc) = ((w as f64 - 1.0) / 2.0, (h as f64 - 1.0) / 2.0);
    let r_max = xc.hypot(yc).max(f64::MIN_POSITIVE);
    let sigma: Vec<f64> = (0..w * h)
        .map(|i| {
            let (x, y) = ((i % w) as f64, (i / w) as f64);
            spec.noise.radial_noise_gain * (x - xc).hypot(y - yc) / r_max
        })
        .collect();

    let mut epochs: Vec<(usize, (i32, i32))> = Vec::new();
    for t in 0..n {
        let off = offset_at(&events, t, spec.fps);
        if epochs.last().is_none_or(|&(_, o)| o != off) {
            epochs.push((t, off));
        }
    }
    let layouts: Vec<Layout> = epochs.iter().map(|&(_, (dx, dy))| layout(spec, dx, dy)).collect();

    let frames: Vec<DepthFrame> = (0..n)
        .into_par_iter()
        .map(|t| {
            let e = epochs.partition_point(|&(start, _)| start <= t) - 1;
            render_frame(spec, seed, t, &layouts[e], &sigma)
        })
        .collect();

    let epochs: Vec<Epoch> = epochs
        .iter()
        .zip(&layouts)
        .map(|(&(start_frame, _), lay)| Epoch {
            start_frame,
            chest_mask: lay.chest.clone(),
        })
        .collect();
    let truth = GroundTruth {
        chest_mask: epochs[0].chest_mask.clone(),
        breathing_freq_hz: spec.breathing_freq_hz,
        epochs,
    };
    Ok((DepthSequence::new(frames, spec.fps)?, truth))
}

/// Translates frame content by the offset of the latest event at or before
/// each frame's time; pixels uncovered by the shift repeat the nearest edge.
pub fn apply_posture_events(seq: &DepthSequence, events: &[PostureEvent]) -> Result<DepthSequence> {
    let (w, h) = seq.dims();
    for e in events {
        if e.dx.unsigned_abs() as usize >= w || e.dy.unsigned_abs() as usize >= h {
            return Err(Error::OutOfBounds(format!(
                "translation ({}, {}) does not fit a {w}x{h} frame",
                e.dx, e.dy
            )));
        }
    }
    let mut sorted = events.to_vec();
    sorted.sort_by(|a, b| a.time_s.total_cmp(&b.time_s));
    let frames = seq
        .frames()
        .iter()
        .enumerate()
        .map(|(t, f)| {
            let (dx, dy) = offset_at(&sorted, t, seq.fps());
            if (dx, dy) == (0, 0) {
                return f.clone();
            }
            let data = (0..w * h)
                .map(|i| {
                    let sx = ((i % w) as i64 - i64::from(dx)).clamp(0, w as i64 - 1) as usize;
                    let sy = ((i / w) as i64 - i64::from(dy)).clamp(0, h as i64 - 1) as usize;
                    f.get(sx, sy)
                })
                .collect();
            DepthFrame::new(w, h, data).expect("same dims")
        })
        .collect();
    DepthSequence::new(frames, seq.fps())
}

/// Writes frames, a manifest pointing at the ground truth, the chest mask of
/// every epoch and the phantom description; returns the manifest path.
pub fn save_phantom(dir: &Path, spec: &PhantomSpec, seq: &DepthSequence, truth: &GroundTruth) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    save_gray_image(&truth.chest_mask, &dir.join("ground_truth_mask.pgm"))?;
    let mut gt = KvWriter::new();
    gt.entry("breathing_freq_hz", truth.breathing_freq_hz);
    for (k, epoch) in truth.epochs.iter().enumerate() {
        let name = format!("ground_truth_epoch_{k:02}.pgm");
        save_gray_image(&epoch.chest_mask, &dir.join(&name))?;
        gt.entry("epoch", format!("{}, {}", epoch.start_frame, name));
    }
    let gt_path = dir.join("ground_truth.txt");
    std::fs::write(&gt_path, gt.finish()).map_err(|e| Error::io(&gt_path, e))?;
    let spec_path = dir.join("phantom.txt");
    std::fs::write(&spec_path, spec.to_kv()).map_err(|e| Error::io(&spec_path, e))?;
    save_sequence(
        dir,
        seq,
        &ManifestExtras {
            ground_truth_mask: Some("ground_truth_mask.pgm".into()),
            ground_truth_freq_hz: Some(truth.breathing_freq_hz),
        },
    )
}
