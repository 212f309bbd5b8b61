//! Binary morphology with square structuring elements, hole filling and
//! connected-component filtering.
//!
//! Border policy: pixels outside the frame count as `false`. Erosion therefore
//! shrinks masks at the frame border, and erosion/dilation duality holds only
//! at least `radius` pixels away from it. [`close`] runs on a canvas padded by
//! `radius` so it stays extensive and idempotent at the border too.
//!
//! Connectivity: components are 8-connected; background reachability for
//! [`fill_holes`] is 4-connected.

use crate::grid::Mask;

#[derive(Clone, Copy, PartialEq, Eq)]
enum Axis {
    Rows,
    Cols,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Reduce {
    Any,
    All,
}

/// One separable pass of a `2r+1` box along `axis`, via a running count.
fn sweep(mask: &Mask, radius: usize, axis: Axis, reduce: Reduce) -> Mask {
    let (w, h) = mask.dims();
    let src = mask.as_slice();
    let mut out = Mask::new(w, h);
    let (lines, len) = match axis {
        Axis::Rows => (h, w),
        Axis::Cols => (w, h),
    };
    let index = |line: usize, i: usize| match axis {
        Axis::Rows => line * w + i,
        Axis::Cols => i * w + line,
    };
    let full = 2 * radius + 1;
    let mut prefix = vec![0usize; len + 1];
    let dst = out.as_mut_slice();
    for line in 0..lines {
        for i in 0..len {
            prefix[i + 1] = prefix[i] + usize::from(src[index(line, i)]);
        }
        for i in 0..len {
            let lo = i.saturating_sub(radius);
            let hi = (i + radius).min(len - 1);
            let count = prefix[hi + 1] - prefix[lo];
            dst[index(line, i)] = match reduce {
                Reduce::Any => count > 0,
                Reduce::All => count == full,
            };
        }
    }
    out
}

/// True wherever a set pixel lies within Chebyshev distance `radius`.
pub fn dilate(mask: &Mask, radius: usize) -> Mask {
    if radius == 0 || mask.width() == 0 || mask.height() == 0 {
        return mask.clone();
    }
    let tmp = sweep(mask, radius, Axis::Rows, Reduce::Any);
    sweep(&tmp, radius, Axis::Cols, Reduce::Any)
}

/// True where the whole `(2r+1)²` neighbourhood is set; outside counts as unset.
pub fn erode(mask: &Mask, radius: usize) -> Mask {
    if radius == 0 || mask.width() == 0 || mask.height() == 0 {
        return mask.clone();
    }
    let tmp = sweep(mask, radius, Axis::Rows, Reduce::All);
    sweep(&tmp, radius, Axis::Cols, Reduce::All)
}

/// `dilate ∘ erode`.
pub fn open(mask: &Mask, radius: usize) -> Mask {
    dilate(&erode(mask, radius), radius)
}

/// `erode ∘ dilate`, evaluated on a canvas padded by `radius`.
pub fn close(mask: &Mask, radius: usize) -> Mask {
    if radius == 0 {
        return mask.clone();
    }
    let (w, h) = mask.dims();
    let padded = Mask::from_fn(w + 2 * radius, h + 2 * radius, |x, y| {
        x >= radius && y >= radius && x < w + radius && y < h + radius && mask.get(x - radius, y - radius)
    });
    let closed = erode(&dilate(&padded, radius), radius);
    Mask::from_fn(w, h, |x, y| closed.get(x + radius, y + radius))
}

/// Sets every unset region that is not 4-connected to the frame border.
pub fn fill_holes(mask: &Mask) -> Mask {
    let (w, h) = mask.dims();
    if w == 0 || h == 0 {
        return mask.clone();
    }
    let src = mask.as_slice();
    let mut outside = vec![false; w * h];
    let mut stack = Vec::new();
    let seed = |i: usize, outside: &mut Vec<bool>, stack: &mut Vec<usize>| {
        if !src[i] && !outside[i] {
            outside[i] = true;
            stack.push(i);
        }
    };
    for x in 0..w {
        seed(x, &mut outside, &mut stack);
        seed((h - 1) * w + x, &mut outside, &mut stack);
    }
    for y in 0..h {
        seed(y * w, &mut outside, &mut stack);
        seed(y * w + w - 1, &mut outside, &mut stack);
    }
    while let Some(i) = stack.pop() {
        let (x, y) = (i % w, i / w);
        if x > 0 {
            seed(i - 1, &mut outside, &mut stack);
        }
        if x + 1 < w {
            seed(i + 1, &mut outside, &mut stack);
        }
        if y > 0 {
            seed(i - w, &mut outside, &mut stack);
        }
        if y + 1 < h {
            seed(i + w, &mut outside, &mut stack);
        }
    }
    Mask::from_vec(w, h, outside.into_iter().map(|o| !o).collect()).expect("same dims")
}

/// 8-connected component labels (0 = background, components numbered from 1
/// in raster order of their first pixel) and the area of each label.
pub fn label_components(mask: &Mask) -> (Vec<u32>, Vec<usize>) {
    let (w, h) = mask.dims();
    let src = mask.as_slice();
    let mut labels = vec![0u32; w * h];
    let mut areas = vec![0usize];
    let mut stack = Vec::new();
    for start in 0..w * h {
        if !src[start] || labels[start] != 0 {
            continue;
        }
        let label = areas.len() as u32;
        let mut area = 0;
        labels[start] = label;
        stack.push(start);
        while let Some(i) = stack.pop() {
            area += 1;
            let (x, y) = ((i % w) as isize, (i / w) as isize);
            for dy in -1..=1isize {
                for dx in -1..=1isize {
                    let (nx, ny) = (x + dx, y + dy);
                    if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                        continue;
                    }
                    let j = ny as usize * w + nx as usize;
                    if src[j] && labels[j] == 0 {
                        labels[j] = label;
                        stack.push(j);
                    }
                }
            }
        }
        areas.push(area);
    }
    (labels, areas)
}

/// Drops 8-connected components with fewer than `min_area` pixels.
pub fn remove_small_components(mask: &Mask, min_area: usize) -> Mask {
    if min_area == 0 {
        return mask.clone();
    }
    let (labels, areas) = label_components(mask);
    let (w, h) = mask.dims();
    let data = labels
        .iter()
        .map(|&l| l != 0 && areas[l as usize] >= min_area)
        .collect();
    Mask::from_vec(w, h, data).expect("same dims")
}

/// Parameters of the per-segment mask clean-up.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MorphParams {
    pub open_radius: usize,
    pub close_radius: usize,
    pub min_area: usize,
}

impl MorphParams {
    /// Defaults for a frame of `pixels` pixels: open 1, close 2, and a
    /// minimum component area of `min_area_frac` of the frame.
    pub fn for_frame(pixels: usize, min_area_frac: f64) -> Self {
        MorphParams {
            open_radius: 1,
            close_radius: 2,
            min_area: (min_area_frac * pixels as f64).round() as usize,
        }
    }
}

/// open → close → fill holes → drop ignored pixels → drop small components.
pub fn refine_segment_mask(mask: &Mask, params: &MorphParams, ignore: &Mask) -> Mask {
    let opened = open(mask, params.open_radius);
    let closed = close(&opened, params.close_radius);
    let filled = fill_holes(&closed);
    remove_small_components(&filled.difference(ignore), params.min_area)
}
