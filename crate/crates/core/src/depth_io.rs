//! Depth frames and sequences, their on-disk formats, and range normalization.
//!
//! Frames are stored one per file as binary 16-bit PGM (`P5`, maxval 65535,
//! big-endian samples). A sequence is described by a manifest in the
//! [`kv`](crate::kv) grammar:
//!
//! ```text
//! fps = 10
//! width = 320
//! height = 240
//! ground_truth_mask = ground_truth_mask.pgm   # optional
//! ground_truth_freq_hz = 0.25                 # optional
//! [frames]
//! frames/frame_00000.pgm
//! frames/frame_00001.pgm
//! ```
//!
//! Relative paths are resolved against the manifest's directory.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::grid::{Mask, ScalarImage};
use crate::kv::{KvDoc, KvWriter};

/// Default far-range cutoff, about the usable range of a consumer depth camera.
pub const DEFAULT_MAX_DISTANCE_MM: f64 = 3000.0;

/// One raw depth image in millimeters; 0 means "no reading".
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DepthFrame {
    width: usize,
    height: usize,
    data: Vec<u16>,
}

impl DepthFrame {
    pub fn new(width: usize, height: usize, data: Vec<u16>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::Format(format!(
                "frame data has {} samples, expected {}x{}",
                data.len(),
                width,
                height
            )));
        }
        Ok(DepthFrame {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, value: u16) -> Self {
        DepthFrame {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u16 {
        self.data[y * self.width + x]
    }

    pub fn as_slice(&self) -> &[u16] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [u16] {
        &mut self.data
    }
}

/// Depth scaled to `[0, 1]` by the far-range cutoff; 0 still means invalid.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedFrame {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl NormalizedFrame {
    /// Values must lie in `[0, 1]`.
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::Format(format!(
                "frame data has {} samples, expected {}x{}",
                data.len(),
                width,
                height
            )));
        }
        if let Some(v) = data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::Format(format!("normalized value {v} outside [0, 1]")));
        }
        Ok(NormalizedFrame {
            width,
            height,
            data,
        })
    }

    pub(crate) fn from_raw_parts(width: usize, height: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), width * height);
        NormalizedFrame {
            width,
            height,
            data,
        }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Re-applies the range cutoff in normalized units.
    pub fn renormalize(&self, max_distance: f64) -> NormalizedFrame {
        NormalizedFrame {
            width: self.width,
            height: self.height,
            data: self
                .data
                .iter()
                .map(|&v| normalize_value(v, max_distance))
                .collect(),
        }
    }
}

/// Scales one raw sample: values beyond `max_distance` become 0 (invalid),
/// the rest map linearly onto `[0, 1]`.
#[inline]
pub fn normalize_value(raw: f64, max_distance: f64) -> f64 {
    if raw > max_distance {
        0.0
    } else {
        raw / max_distance
    }
}

pub fn normalize_frame(frame: &DepthFrame, max_distance_mm: f64) -> Result<NormalizedFrame> {
    if !(max_distance_mm > 0.0) {
        return Err(Error::config(format!(
            "max distance must be positive, got {max_distance_mm}"
        )));
    }
    let data = frame
        .data
        .iter()
        .map(|&v| normalize_value(f64::from(v), max_distance_mm))
        .collect();
    Ok(NormalizedFrame::from_raw_parts(frame.width, frame.height, data))
}

/// The volumetric recording: equally sized frames sampled at `fps`.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthSequence {
    frames: Vec<DepthFrame>,
    fps: f64,
}

impl DepthSequence {
    pub fn new(frames: Vec<DepthFrame>, fps: f64) -> Result<Self> {
        if !(fps > 0.0 && fps.is_finite()) {
            return Err(Error::config(format!("fps must be positive, got {fps}")));
        }
        if let Some(first) = frames.first() {
            let (w, h) = first.dims();
            if let Some((index, f)) = frames.iter().enumerate().find(|(_, f)| f.dims() != (w, h)) {
                return Err(Error::DimensionMismatch {
                    index,
                    want_w: w,
                    want_h: h,
                    got_w: f.width,
                    got_h: f.height,
                });
            }
        }
        Ok(DepthSequence { frames, fps })
    }

    pub fn fps(&self) -> f64 {
        self.fps
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn width(&self) -> usize {
        self.frames.first().map_or(0, |f| f.width)
    }

    pub fn height(&self) -> usize {
        self.frames.first().map_or(0, |f| f.height)
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width(), self.height())
    }

    pub fn frames(&self) -> &[DepthFrame] {
        &self.frames
    }

    pub fn frame(&self, index: usize) -> &DepthFrame {
        &self.frames[index]
    }

    pub fn into_frames(self) -> Vec<DepthFrame> {
        self.frames
    }

    /// Applies `f` to every frame, keeping the frame rate.
    pub fn map_frames(&self, f: impl FnMut(&DepthFrame) -> DepthFrame) -> Result<DepthSequence> {
        DepthSequence::new(self.frames.iter().map(f).collect(), self.fps)
    }
}

/// Parsed manifest with frame paths already resolved.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceManifest {
    pub frames: Vec<PathBuf>,
    pub fps: f64,
    pub width: usize,
    pub height: usize,
    pub ground_truth_mask: Option<PathBuf>,
    pub ground_truth_freq_hz: Option<f64>,
}

impl SequenceManifest {
    pub fn read(path: &Path) -> Result<Self> {
        let doc = KvDoc::read(path)?;
        let base = path.parent().unwrap_or(Path::new("."));
        let fps: f64 = doc.required("fps")?;
        if !(fps > 0.0 && fps.is_finite()) {
            return Err(doc.error_at(0, format!("fps must be positive, got {fps}")));
        }
        let width: usize = doc.required("width")?;
        let height: usize = doc.required("height")?;
        let ground_truth_mask = doc
            .raw("ground_truth_mask")?
            .map(|p| base.join(p));
        let ground_truth_freq_hz = doc.optional("ground_truth_freq_hz")?;
        doc.finish()?;
        let frames: Vec<PathBuf> = doc
            .frames()
            .unwrap_or_default()
            .iter()
            .map(|(_, p)| base.join(p))
            .collect();
        if frames.is_empty() {
            return Err(doc.error_at(0, "manifest lists no frames"));
        }
        Ok(SequenceManifest {
            frames,
            fps,
            width,
            height,
            ground_truth_mask,
            ground_truth_freq_hz,
        })
    }

    /// Loads every frame in manifest order, checking files and dimensions.
    pub fn load(&self) -> Result<DepthSequence> {
        let mut frames = Vec::with_capacity(self.frames.len());
        for (index, path) in self.frames.iter().enumerate() {
            let wrap = |source: Error| Error::Frame {
                index,
                path: path.clone(),
                source: Box::new(source),
            };
            let frame = read_depth_pgm(path).map_err(wrap)?;
            if frame.dims() != (self.width, self.height) {
                return Err(wrap(Error::DimensionMismatch {
                    index,
                    want_w: self.width,
                    want_h: self.height,
                    got_w: frame.width,
                    got_h: frame.height,
                }));
            }
            frames.push(frame);
        }
        DepthSequence::new(frames, self.fps)
    }

    pub fn load_ground_truth_mask(&self) -> Result<Option<Mask>> {
        self.ground_truth_mask.as_deref().map(load_mask).transpose()
    }
}

pub fn load_sequence(manifest_path: &Path) -> Result<DepthSequence> {
    SequenceManifest::read(manifest_path)?.load()
}

/// Optional manifest fields written by [`save_sequence`].
#[derive(Debug, Clone, Default)]
pub struct ManifestExtras {
    /// Path relative to the output directory.
    pub ground_truth_mask: Option<String>,
    pub ground_truth_freq_hz: Option<f64>,
}

/// Writes `dir/frames/frame_NNNNN.pgm` and `dir/manifest.txt`; returns the manifest path.
pub fn save_sequence(dir: &Path, seq: &DepthSequence, extras: &ManifestExtras) -> Result<PathBuf> {
    let frame_dir = dir.join("frames");
    std::fs::create_dir_all(&frame_dir).map_err(|e| Error::io(&frame_dir, e))?;
    let mut names = Vec::with_capacity(seq.len());
    for (i, frame) in seq.frames().iter().enumerate() {
        let name = format!("frames/frame_{i:05}.pgm");
        write_depth_pgm(&dir.join(&name), frame)?;
        names.push(name);
    }
    let mut w = KvWriter::new();
    w.entry("fps", seq.fps())
        .entry("width", seq.width())
        .entry("height", seq.height());
    if let Some(gt) = &extras.ground_truth_mask {
        w.entry("ground_truth_mask", gt);
    }
    if let Some(f) = extras.ground_truth_freq_hz {
        w.entry("ground_truth_freq_hz", f);
    }
    w.frames(&names);
    let manifest = dir.join("manifest.txt");
    std::fs::write(&manifest, w.finish()).map_err(|e| Error::io(&manifest, e))?;
    Ok(manifest)
}

/// Decoded binary PGM.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pgm {
    pub width: usize,
    pub height: usize,
    pub maxval: u16,
    pub samples: Vec<u16>,
}

/// Parses a `P5` image: maxval < 256 means one byte per sample, otherwise
/// two bytes, most significant first. `#` comments are allowed in the header.
pub fn decode_pgm(bytes: &[u8]) -> Result<Pgm> {
    let mut pos = 0usize;
    if bytes.len() < 2 || &bytes[..2] != b"P5" {
        return Err(Error::Format("missing P5 magic".into()));
    }
    pos += 2;
    let mut header = [0usize; 3];
    for field in header.iter_mut() {
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&b| b != b'\n') {
                        pos += 1;
                    }
                }
                _ => break,
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
            pos += 1;
        }
        if start == pos {
            return Err(Error::Format("truncated or malformed header".into()));
        }
        *field = std::str::from_utf8(&bytes[start..pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Format("header value out of range".into()))?;
    }
    let [width, height, maxval] = header;
    if maxval == 0 || maxval > 65535 {
        return Err(Error::Format(format!("maxval {maxval} out of range")));
    }
    // exactly one whitespace byte separates the header from the raster
    if !bytes.get(pos).is_some_and(u8::is_ascii_whitespace) {
        return Err(Error::Format("missing whitespace after maxval".into()));
    }
    pos += 1;
    let n = width
        .checked_mul(height)
        .ok_or_else(|| Error::Format("image too large".into()))?;
    let raster = &bytes[pos..];
    let samples = if maxval < 256 {
        if raster.len() < n {
            return Err(Error::Format(format!("expected {n} bytes of pixel data, found {}", raster.len())));
        }
        raster[..n].iter().map(|&b| u16::from(b)).collect()
    } else {
        if raster.len() < 2 * n {
            return Err(Error::Format(format!(
                "expected {} bytes of pixel data, found {}",
                2 * n,
                raster.len()
            )));
        }
        raster[..2 * n]
            .chunks_exact(2)
            .map(|c| u16::from_be_bytes([c[0], c[1]]))
            .collect()
    };
    Ok(Pgm {
        width,
        height,
        maxval: maxval as u16,
        samples,
    })
}

pub fn encode_pgm(width: usize, height: usize, maxval: u16, samples: &[u16]) -> Vec<u8> {
    assert_eq!(samples.len(), width * height);
    let mut out = format!("P5\n{width} {height}\n{maxval}\n").into_bytes();
    if maxval < 256 {
        out.extend(samples.iter().map(|&s| s.min(maxval) as u8));
    } else {
        out.reserve(samples.len() * 2);
        for &s in samples {
            out.extend_from_slice(&s.min(maxval).to_be_bytes());
        }
    }
    out
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    File::open(path)
        .and_then(|mut f| f.read_to_end(&mut buf))
        .map_err(|e| Error::io(path, e))?;
    Ok(buf)
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    w.write_all(bytes)
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

pub fn read_depth_pgm(path: &Path) -> Result<DepthFrame> {
    let pgm = decode_pgm(&read_file(path)?)?;
    DepthFrame::new(pgm.width, pgm.height, pgm.samples)
}

pub fn write_depth_pgm(path: &Path, frame: &DepthFrame) -> Result<()> {
    write_file(path, &encode_pgm(frame.width, frame.height, 65535, &frame.data))
}

/// Anything that can be rendered as an 8-bit grayscale picture.
pub trait GrayImage {
    fn dims(&self) -> (usize, usize);
    fn gray_levels(&self) -> Vec<u8>;
}

/// Linear stretch of `values` onto 0..=255 with min → 0 and max → 255,
/// rounding half away from zero (so a midpoint maps to 128). A constant
/// grid renders all black.
pub fn quantize_gray(values: &[f64]) -> Vec<u8> {
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if !(hi > lo) {
        return vec![0; values.len()];
    }
    let span = hi - lo;
    values
        .iter()
        .map(|&v| ((v - lo) / span * 255.0).round().clamp(0.0, 255.0) as u8)
        .collect()
}

impl GrayImage for Mask {
    fn dims(&self) -> (usize, usize) {
        Mask::dims(self)
    }

    fn gray_levels(&self) -> Vec<u8> {
        self.as_slice().iter().map(|&v| if v { 255 } else { 0 }).collect()
    }
}

impl GrayImage for ScalarImage {
    fn dims(&self) -> (usize, usize) {
        ScalarImage::dims(self)
    }

    fn gray_levels(&self) -> Vec<u8> {
        quantize_gray(self.as_slice())
    }
}

impl GrayImage for NormalizedFrame {
    fn dims(&self) -> (usize, usize) {
        NormalizedFrame::dims(self)
    }

    fn gray_levels(&self) -> Vec<u8> {
        quantize_gray(&self.data)
    }
}

/// Writes an 8-bit binary PGM.
pub fn save_gray_image(image: &impl GrayImage, path: &Path) -> Result<()> {
    let (w, h) = image.dims();
    let levels: Vec<u16> = image.gray_levels().into_iter().map(u16::from).collect();
    write_file(path, &encode_pgm(w, h, 255, &levels))
}

/// Reads a mask image; any non-zero sample is `true`.
pub fn load_mask(path: &Path) -> Result<Mask> {
    let pgm = decode_pgm(&read_file(path)?)?;
    Mask::from_vec(pgm.width, pgm.height, pgm.samples.iter().map(|&s| s != 0).collect())
}
