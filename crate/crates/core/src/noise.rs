//! Spatial noise handling: dropout ("pepper") inpainting, frame-margin
//! exclusion, and depth-edge exclusion. The last two combine into the
//! [`IgnoreMask`] that every later stage honours.

use rayon::prelude::*;

use crate::depth_io::NormalizedFrame;
use crate::error::{Error, Result};
use crate::grid::{IgnoreMask, Mask};

pub use crate::morph::dilate;

/// Window radius of the dropout inpainting median (a 21×21 window).
pub const DEFAULT_MEDIAN_RADIUS: usize = 10;
/// Margin for a 640-pixel-wide frame; see [`default_margin`].
pub const REFERENCE_MARGIN: usize = 50;
pub const REFERENCE_WIDTH: usize = 640;

/// Margin scaled to the frame width: `round(50 · width / 640)`.
pub fn default_margin(width: usize) -> usize {
    ((REFERENCE_MARGIN * width) as f64 / REFERENCE_WIDTH as f64).round() as usize
}

/// Median of the non-zero samples in the `(2r+1)²` window around `(cx, cy)`,
/// clipped to the frame. An even count averages the two middle values.
/// Returns `None` when the window holds no valid sample.
pub(crate) fn window_median(
    width: usize,
    height: usize,
    cx: usize,
    cy: usize,
    radius: usize,
    value_at: impl Fn(usize, usize) -> f64,
    buf: &mut Vec<f64>,
) -> Option<f64> {
    buf.clear();
    let (x0, x1) = (cx.saturating_sub(radius), (cx + radius).min(width - 1));
    let (y0, y1) = (cy.saturating_sub(radius), (cy + radius).min(height - 1));
    for y in y0..=y1 {
        for x in x0..=x1 {
            let v = value_at(x, y);
            if v != 0.0 {
                buf.push(v);
            }
        }
    }
    median_in_place(buf)
}

/// Median of `values` (reordered in place); even counts average the middle pair.
pub(crate) fn median_in_place(values: &mut [f64]) -> Option<f64> {
    let n = values.len();
    if n == 0 {
        return None;
    }
    let mid = n / 2;
    let (lower, &mut upper, _) = values.select_nth_unstable_by(mid, f64::total_cmp);
    if n % 2 == 1 {
        Some(upper)
    } else {
        let below = lower.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Some((below + upper) / 2.0)
    }
}

/// Replaces each zero pixel by the median of the non-zero pixels of the
/// original frame inside its window. Non-zero pixels are kept; a zero pixel
/// with no valid neighbour stays zero.
pub fn inpaint_pepper(frame: &NormalizedFrame, radius: usize) -> Result<NormalizedFrame> {
    if radius == 0 {
        return Err(Error::config("median radius must be at least 1"));
    }
    let (w, h) = frame.dims();
    let src = frame.as_slice();
    let mut out = src.to_vec();
    out.par_chunks_mut(w.max(1)).enumerate().for_each_init(Vec::new, |buf, (y, row)| {
        for (x, v) in row.iter_mut().enumerate() {
            if *v == 0.0 {
                *v = window_median(w, h, x, y, radius, |xx, yy| src[yy * w + xx], buf).unwrap_or(0.0);
            }
        }
    });
    Ok(NormalizedFrame::from_raw_parts(w, h, out))
}

/// True for pixels within `margin` of any frame side.
pub fn margin_mask(width: usize, height: usize, margin: usize) -> Result<IgnoreMask> {
    if margin > 0 && 2 * margin >= width.min(height) {
        return Err(Error::config(format!(
            "margin {margin} leaves no interior in a {width}x{height} frame"
        )));
    }
    Ok(Mask::from_fn(width, height, |x, y| {
        x < margin || y < margin || x >= width - margin || y >= height - margin
    }))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CannyParams {
    /// Standard deviation of the pre-smoothing Gaussian, in pixels.
    pub sigma: f64,
    /// Hysteresis thresholds as fractions of the maximum gradient magnitude.
    pub low: f64,
    pub high: f64,
}

impl Default for CannyParams {
    fn default() -> Self {
        CannyParams {
            sigma: 1.4,
            low: 0.1,
            high: 0.25,
        }
    }
}

impl CannyParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0) {
            return Err(Error::config(format!("canny sigma must be positive, got {}", self.sigma)));
        }
        if !(0.0 <= self.low && self.low <= self.high) {
            return Err(Error::config(format!(
                "canny thresholds need 0 <= low <= high, got {} / {}",
                self.low, self.high
            )));
        }
        Ok(())
    }
}

fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil() as isize;
    let mut k: Vec<f64> = (-radius..=radius)
        .map(|i| (-((i * i) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= sum);
    k
}

/// Separable convolution with edge replication.
fn smooth(data: &[f64], w: usize, h: usize, kernel: &[f64]) -> Vec<f64> {
    let r = (kernel.len() / 2) as isize;
    let clamp = |v: isize, n: usize| v.clamp(0, n as isize - 1) as usize;
    let mut tmp = vec![0.0; data.len()];
    for y in 0..h {
        for x in 0..w {
            tmp[y * w + x] = kernel
                .iter()
                .enumerate()
                .map(|(i, k)| k * data[y * w + clamp(x as isize + i as isize - r, w)])
                .sum();
        }
    }
    let mut out = vec![0.0; data.len()];
    for y in 0..h {
        for x in 0..w {
            out[y * w + x] = kernel
                .iter()
                .enumerate()
                .map(|(i, k)| k * tmp[clamp(y as isize + i as isize - r, h) * w + x])
                .sum();
        }
    }
    out
}

/// Binary edge map: Gaussian smoothing, Sobel gradients, non-maximum
/// suppression along the quantized gradient direction, then double
/// threshold with 8-connected hysteresis.
pub fn canny_edges(frame: &NormalizedFrame, params: &CannyParams) -> Result<Mask> {
    params.validate()?;
    let (w, h) = frame.dims();
    if w == 0 || h == 0 {
        return Ok(Mask::new(w, h));
    }
    let s = smooth(frame.as_slice(), w, h, &gaussian_kernel(params.sigma));
    let at = |x: isize, y: isize| s[y.clamp(0, h as isize - 1) as usize * w + x.clamp(0, w as isize - 1) as usize];

    let mut gx = vec![0.0; w * h];
    let mut gy = vec![0.0; w * h];
    let mut mag = vec![0.0; w * h];
    for y in 0..h as isize {
        for x in 0..w as isize {
            let dx = (at(x + 1, y - 1) + 2.0 * at(x + 1, y) + at(x + 1, y + 1))
                - (at(x - 1, y - 1) + 2.0 * at(x - 1, y) + at(x - 1, y + 1));
            let dy = (at(x - 1, y + 1) + 2.0 * at(x, y + 1) + at(x + 1, y + 1))
                - (at(x - 1, y - 1) + 2.0 * at(x, y - 1) + at(x + 1, y - 1));
            let i = y as usize * w + x as usize;
            gx[i] = dx;
            gy[i] = dy;
            mag[i] = dx.hypot(dy);
        }
    }
    let max_mag = mag.iter().copied().fold(0.0, f64::max);
    if max_mag == 0.0 {
        return Ok(Mask::new(w, h));
    }

    let mag_at = |x: isize, y: isize| {
        if x < 0 || y < 0 || x >= w as isize || y >= h as isize {
            0.0
        } else {
            mag[y as usize * w + x as usize]
        }
    };
    let mut thin = vec![0.0; w * h];
    for y in 0..h as isize {
        for x in 0..w as isize {
            let i = y as usize * w + x as usize;
            let m = mag[i];
            if m == 0.0 {
                continue;
            }
            let angle = gy[i].atan2(gx[i]).to_degrees().rem_euclid(180.0);
            // (dx, dy) of the neighbour on the positive side of the gradient
            let (ox, oy) = if !(22.5..157.5).contains(&angle) {
                (1, 0)
            } else if angle < 67.5 {
                (1, 1)
            } else if angle < 112.5 {
                (0, 1)
            } else {
                (-1, 1)
            };
            let before = mag_at(x - ox, y - oy);
            let after = mag_at(x + ox, y + oy);
            // strict on one side so a symmetric two-pixel ridge keeps exactly one pixel
            if m > before && m >= after {
                thin[i] = m;
            }
        }
    }

    let high = params.high * max_mag;
    let low = params.low * max_mag;
    let mut edges = vec![false; w * h];
    let mut stack: Vec<usize> = (0..w * h).filter(|&i| thin[i] > 0.0 && thin[i] >= high).collect();
    for &i in &stack {
        edges[i] = true;
    }
    while let Some(i) = stack.pop() {
        let (x, y) = ((i % w) as isize, (i / w) as isize);
        for dy in -1..=1isize {
            for dx in -1..=1isize {
                let (nx, ny) = (x + dx, y + dy);
                if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                    continue;
                }
                let j = ny as usize * w + nx as usize;
                if !edges[j] && thin[j] > 0.0 && thin[j] >= low {
                    edges[j] = true;
                    stack.push(j);
                }
            }
        }
    }
    Mask::from_vec(w, h, edges)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IgnoreParams {
    pub margin: usize,
    pub canny: CannyParams,
    pub dilate_radius: usize,
}

/// Union of the margin band and the dilated edge map of `reference`.
pub fn build_ignore_mask(reference: &NormalizedFrame, params: &IgnoreParams) -> Result<IgnoreMask> {
    let (w, h) = reference.dims();
    let margin = margin_mask(w, h, params.margin)?;
    let edges = canny_edges(reference, &params.canny)?;
    Ok(margin.union(&dilate(&edges, params.dilate_radius)))
}
