//! End-to-end segmentation: normalize → inpaint → per-segment reference and
//! ignore mask → band-limited amplitude → threshold → morphological clean-up
//! → accumulation over still segments → confidence → final mask.
//!
//! Segments run one after another; inside a segment the work is split into
//! bands of rows so only one band of per-pixel time series is held per worker.
//! Every pixel is computed independently, so results do not depend on the
//! number of workers.

use rayon::prelude::*;

use crate::config::PipelineConfig;
use crate::depth_io::{normalize_value, DepthFrame, DepthSequence, NormalizedFrame};
use crate::error::{Error, Result};
use crate::grid::{AmplitudeImage, IgnoreMask, Mask, ScalarImage, SegmentMask, SegmentationMask};
use crate::morph::{refine_segment_mask, MorphParams};
use crate::noise::{build_ignore_mask, median_in_place, window_median, IgnoreParams};
use crate::spectral::{peak_amplitudes, segment_starts, threshold_amplitude, SegmentConfig, SpectrumEngine};
use crate::temporal::{
    accumulate, detect_posture_changes, frame_motion, segment_has_change, threshold_confidence, to_confidence,
    ConfidenceMap, Histogram,
};

const BAND_ROWS: usize = 8;

/// Intermediate images of one time segment.
#[derive(Debug, Clone)]
pub struct SegmentArtifacts {
    pub start: usize,
    /// False when a posture change falls inside the segment.
    pub included: bool,
    /// Per-pixel temporal median of the inpainted frames.
    pub reference: NormalizedFrame,
    /// First frame of the segment after dropout inpainting.
    pub inpainted_first: NormalizedFrame,
    pub ignore: IgnoreMask,
    pub amplitude: AmplitudeImage,
    /// Peak magnitude over all non-DC bins, for comparison with `amplitude`.
    pub full_amplitude: AmplitudeImage,
    pub candidate: SegmentMask,
    pub refined: SegmentMask,
}

#[derive(Debug, Clone)]
pub struct SegmentationResult {
    pub confidence: ConfidenceMap,
    pub mask: SegmentationMask,
    /// Union of the ignore masks of the included segments.
    pub ignore: IgnoreMask,
    pub histogram: Histogram,
    pub included_segments: usize,
    /// Frames at which a posture change was detected.
    pub posture_changes: Vec<usize>,
    pub segments: Vec<SegmentArtifacts>,
}

/// Runs `f` on a pool of `workers` threads, or on the global pool for `None`.
pub fn with_workers<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match workers {
        None => Ok(f()),
        Some(0) => Err(Error::config("worker count must be at least 1")),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::config(format!("cannot start {n} workers: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

struct SegmentPass {
    reference: NormalizedFrame,
    inpainted_first: NormalizedFrame,
    amplitude: ScalarImage,
    full_amplitude: ScalarImage,
}

/// Inpainted normalized value of `frame` at `(x, y)`.
#[inline]
fn clean_value(frame: &DepthFrame, x: usize, y: usize, max: f64, radius: usize, buf: &mut Vec<f64>) -> f64 {
    let (w, h) = frame.dims();
    let value = |x: usize, y: usize| normalize_value(f64::from(frame.get(x, y)), max);
    match value(x, y) {
        0.0 => window_median(w, h, x, y, radius, value, buf).unwrap_or(0.0),
        v => v,
    }
}

fn segment_pass(frames: &[DepthFrame], cfg: &PipelineConfig, seg: &SegmentConfig, fps: f64) -> Result<SegmentPass> {
    let (w, h) = frames[0].dims();
    let len = frames.len();
    let band = seg.band_bins(fps)?;
    let (max, radius) = (cfg.max_distance_mm, cfg.median_radius);

    let mut reference = vec![0.0; w * h];
    let mut first = vec![0.0; w * h];
    let mut amplitude = vec![0.0; w * h];
    let mut full = vec![0.0; w * h];
    let chunk = BAND_ROWS * w;
    reference
        .par_chunks_mut(chunk)
        .zip(first.par_chunks_mut(chunk))
        .zip(amplitude.par_chunks_mut(chunk))
        .zip(full.par_chunks_mut(chunk))
        .enumerate()
        .for_each_init(
            || (SpectrumEngine::new(len, seg.window), vec![0.0; len / 2 + 1], Vec::new()),
            |(engine, mags, buf), (b, (((ref_out, first_out), amp_out), full_out))| {
                let y0 = b * BAND_ROWS;
                let n = ref_out.len();
                // series[i * len + t] for pixel i of the band
                let mut series = vec![0.0; n * len];
                for (t, frame) in frames.iter().enumerate() {
                    for i in 0..n {
                        let (x, y) = (i % w, y0 + i / w);
                        series[i * len + t] = clean_value(frame, x, y, max, radius, buf);
                    }
                }
                let mut sorted = Vec::with_capacity(len);
                for i in 0..n {
                    let s = &series[i * len..(i + 1) * len];
                    first_out[i] = s[0];
                    sorted.clear();
                    sorted.extend_from_slice(s);
                    ref_out[i] = median_in_place(&mut sorted).unwrap_or(0.0);
                    engine.magnitudes(s, mags);
                    (amp_out[i], full_out[i]) = peak_amplitudes(mags, &band);
                }
            },
        );
    Ok(SegmentPass {
        reference: NormalizedFrame::from_raw_parts(w, h, reference),
        inpainted_first: NormalizedFrame::from_raw_parts(w, h, first),
        amplitude: ScalarImage::from_vec(w, h, amplitude)?,
        full_amplitude: ScalarImage::from_vec(w, h, full)?,
    })
}

fn zero_ignored(img: &mut ScalarImage, ignore: &Mask) {
    for (a, &skip) in img.as_mut_slice().iter_mut().zip(ignore.as_slice()) {
        if skip {
            *a = 0.0;
        }
    }
}

/// Parameters resolved once per sequence.
struct Plan<'a> {
    cfg: &'a PipelineConfig,
    seg: SegmentConfig,
    ignore: IgnoreParams,
    morph: MorphParams,
    fps: f64,
}

fn process_segment(frames: &[DepthFrame], start: usize, included: bool, plan: &Plan) -> Result<SegmentArtifacts> {
    let mut pass = segment_pass(frames, plan.cfg, &plan.seg, plan.fps)?;
    let ignore = build_ignore_mask(&pass.reference, &plan.ignore)?;
    zero_ignored(&mut pass.amplitude, &ignore);
    zero_ignored(&mut pass.full_amplitude, &ignore);
    let candidate = threshold_amplitude(&pass.amplitude, plan.seg.amp_threshold_frac)?;
    let refined = refine_segment_mask(&candidate, &plan.morph, &ignore);
    Ok(SegmentArtifacts {
        start,
        included,
        reference: pass.reference,
        inpainted_first: pass.inpainted_first,
        ignore,
        amplitude: pass.amplitude,
        full_amplitude: pass.full_amplitude,
        candidate,
        refined,
    })
}

/// Segments the chest region of a recording of one sleeping person with no
/// other moving objects in view.
pub fn segment_sequence(seq: &DepthSequence, cfg: &PipelineConfig) -> Result<SegmentationResult> {
    cfg.validate()?;
    let fps = seq.fps();
    let seg = cfg.segment_config(fps)?;
    let (w, h) = seq.dims();
    let plan = Plan {
        cfg,
        seg,
        ignore: cfg.ignore_params(w),
        morph: cfg.morph_params(w * h),
        fps,
    };
    let starts = segment_starts(seq.len(), seg.segment_len, seg.segment_stride)?;
    let posture_changes = detect_posture_changes(&frame_motion(seq), cfg.motion_threshold_mm);

    let mut segments = Vec::with_capacity(starts.len());
    for (index, &start) in starts.iter().enumerate() {
        let included = !segment_has_change(start, seg.segment_len, &posture_changes);
        let frames = &seq.frames()[start..start + seg.segment_len];
        let art = process_segment(frames, start, included, &plan)
            .map_err(|e| Error::Segment { index, source: Box::new(e) })?;
        segments.push(art);
    }

    let kept: Vec<&SegmentArtifacts> = segments.iter().filter(|s| s.included).collect();
    if kept.is_empty() {
        return Err(Error::NoStillSegments);
    }
    let refined: Vec<Mask> = kept.iter().map(|s| s.refined.clone()).collect();
    let histogram = accumulate(&refined)?;
    let confidence = to_confidence(&histogram, kept.len())?;
    let ignore = kept.iter().fold(Mask::new(w, h), |acc, s| acc.union(&s.ignore));
    let mask = threshold_confidence(&confidence, cfg.confidence_threshold)?.difference(&ignore);
    Ok(SegmentationResult {
        confidence,
        mask,
        ignore,
        histogram,
        included_segments: kept.len(),
        posture_changes,
        segments,
    })
}
