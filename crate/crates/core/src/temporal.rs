//! Accumulation of per-segment detections into a confidence map, the final
//! confidence threshold, and detection of posture changes between frames.

use rayon::prelude::*;

use crate::depth_io::{quantize_gray, DepthSequence, GrayImage};
use crate::error::{Error, Result};
use crate::grid::{Mask, SegmentMask, SegmentationMask};

/// Per-pixel count of segments in which the pixel was detected.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Histogram {
    width: usize,
    height: usize,
    counts: Vec<u32>,
}

impl Histogram {
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn counts(&self) -> &[u32] {
        &self.counts
    }

    pub fn get(&self, x: usize, y: usize) -> u32 {
        self.counts[y * self.width + x]
    }

    pub fn max(&self) -> u32 {
        self.counts.iter().copied().max().unwrap_or(0)
    }
}

pub fn accumulate(masks: &[SegmentMask]) -> Result<Histogram> {
    let first = masks.first().ok_or_else(|| Error::config("no segment masks to accumulate"))?;
    let (w, h) = first.dims();
    let mut counts = vec![0u32; w * h];
    for (index, m) in masks.iter().enumerate() {
        if m.dims() != (w, h) {
            return Err(Error::DimensionMismatch {
                index,
                want_w: w,
                want_h: h,
                got_w: m.width(),
                got_h: m.height(),
            });
        }
        for (c, &v) in counts.iter_mut().zip(m.as_slice()) {
            *c += u32::from(v);
        }
    }
    Ok(Histogram {
        width: w,
        height: h,
        counts,
    })
}

/// Fraction of counted segments in which each pixel was detected.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfidenceMap {
    width: usize,
    height: usize,
    values: Vec<f64>,
    total_segments: usize,
}

impl ConfidenceMap {
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }

    pub fn total_segments(&self) -> usize {
        self.total_segments
    }
}

impl GrayImage for ConfidenceMap {
    fn dims(&self) -> (usize, usize) {
        ConfidenceMap::dims(self)
    }

    fn gray_levels(&self) -> Vec<u8> {
        quantize_gray(&self.values)
    }
}

pub fn to_confidence(hist: &Histogram, total_segments: usize) -> Result<ConfidenceMap> {
    if total_segments == 0 || (hist.max() as usize) > total_segments {
        return Err(Error::config(format!(
            "total segments {total_segments} must be positive and at least the largest count {}",
            hist.max()
        )));
    }
    let n = total_segments as f64;
    Ok(ConfidenceMap {
        width: hist.width,
        height: hist.height,
        values: hist.counts.iter().map(|&c| f64::from(c) / n).collect(),
        total_segments,
    })
}

/// Pixels whose confidence reaches `c`.
pub fn threshold_confidence(conf: &ConfidenceMap, c: f64) -> Result<SegmentationMask> {
    if !(c > 0.0 && c <= 1.0) {
        return Err(Error::config(format!("confidence threshold must be in (0, 1], got {c}")));
    }
    Mask::from_vec(conf.width, conf.height, conf.values.iter().map(|&v| v >= c).collect())
}

/// Mean absolute depth change (mm) between frame `t-1` and `t`, over pixels
/// valid in both; entry 0 is 0.
pub fn frame_motion(seq: &DepthSequence) -> Vec<f64> {
    let frames = seq.frames();
    let mut motion: Vec<f64> = (1..frames.len())
        .into_par_iter()
        .map(|t| {
            let (mut sum, mut n) = (0u64, 0u64);
            for (&a, &b) in frames[t - 1].as_slice().iter().zip(frames[t].as_slice()) {
                if a != 0 && b != 0 {
                    sum += u64::from(a.abs_diff(b));
                    n += 1;
                }
            }
            if n == 0 {
                0.0
            } else {
                sum as f64 / n as f64
            }
        })
        .collect();
    motion.insert(0, 0.0);
    motion
}

/// Frames `t` whose motion exceeds the sequence's median motion by more than
/// `threshold_mm`: the scene changed between `t-1` and `t`.
pub fn detect_posture_changes(motion: &[f64], threshold_mm: f64) -> Vec<usize> {
    if motion.len() < 2 {
        return Vec::new();
    }
    let mut steps = motion[1..].to_vec();
    steps.sort_by(f64::total_cmp);
    let n = steps.len();
    let baseline = if n % 2 == 1 {
        steps[n / 2]
    } else {
        (steps[n / 2 - 1] + steps[n / 2]) / 2.0
    };
    (1..motion.len())
        .filter(|&t| motion[t] - baseline > threshold_mm)
        .collect()
}

/// Whether a change landing on frame `t` falls strictly inside `[start, start+len)`.
pub fn segment_has_change(start: usize, len: usize, changes: &[usize]) -> bool {
    changes.iter().any(|&t| t > start && t < start + len)
}
