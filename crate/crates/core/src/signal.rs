//! Breathing-signal extraction over a region of interest and the spectral
//! quality report used to compare regions.

use rayon::prelude::*;

use crate::depth_io::{normalize_value, DepthSequence, DEFAULT_MAX_DISTANCE_MM};
use crate::error::{Error, Result};
use crate::grid::Mask;
use crate::kv::KvWriter;
use crate::noise::{median_in_place, window_median, DEFAULT_MEDIAN_RADIUS};
use crate::spectral::{band_bins, pixel_spectrum, Spectrum};

/// Mean inpainted normalized depth over the ROI, one sample per frame.
#[derive(Debug, Clone, PartialEq)]
pub struct BreathingSignal {
    pub samples: Vec<f64>,
    pub fps: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignalParams {
    pub max_distance_mm: f64,
    pub median_radius: usize,
    pub band_low_hz: f64,
    pub band_high_hz: f64,
}

impl Default for SignalParams {
    fn default() -> Self {
        SignalParams {
            max_distance_mm: DEFAULT_MAX_DISTANCE_MM,
            median_radius: DEFAULT_MEDIAN_RADIUS,
            band_low_hz: 0.2,
            band_high_hz: 0.33,
        }
    }
}

/// Per frame, the mean over `mask` of the normalized depth, with dropouts
/// replaced exactly as the segmentation inpainting does.
pub fn extract_breathing_signal(seq: &DepthSequence, mask: &Mask, params: &SignalParams) -> Result<BreathingSignal> {
    let (w, h) = seq.dims();
    if mask.dims() != (w, h) {
        return Err(Error::DimensionMismatch {
            index: 0,
            want_w: w,
            want_h: h,
            got_w: mask.width(),
            got_h: mask.height(),
        });
    }
    if mask.is_empty() {
        return Err(Error::EmptyMask);
    }
    if !(params.max_distance_mm > 0.0) || params.median_radius == 0 {
        return Err(Error::config("max distance and median radius must be positive"));
    }
    let pixels: Vec<usize> = mask.indices().collect();
    let max = params.max_distance_mm;
    let samples = seq
        .frames()
        .par_iter()
        .map_init(Vec::new, |buf, frame| {
            let value = |x: usize, y: usize| normalize_value(f64::from(frame.get(x, y)), max);
            let sum: f64 = pixels
                .iter()
                .map(|&i| {
                    let (x, y) = (i % w, i / w);
                    match value(x, y) {
                        0.0 => window_median(w, h, x, y, params.median_radius, value, buf).unwrap_or(0.0),
                        v => v,
                    }
                })
                .sum();
            sum / pixels.len() as f64
        })
        .collect();
    Ok(BreathingSignal { samples, fps: seq.fps() })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoiReport {
    /// Frequency of the largest in-band bin.
    pub dominant_freq_hz: f64,
    pub in_band_peak_amplitude: f64,
    /// In-band peak over the median magnitude of the non-DC bins outside the band.
    pub spectral_snr: f64,
    pub mask_area: usize,
}

impl RoiReport {
    pub fn to_kv(&self) -> String {
        let mut w = KvWriter::new();
        w.entry("dominant_freq_hz", self.dominant_freq_hz)
            .entry("in_band_peak_amplitude", self.in_band_peak_amplitude)
            .entry("spectral_snr", self.spectral_snr)
            .entry("mask_area", self.mask_area);
        w.finish()
    }
}

/// Spectrum of `signal` and the report it yields for the band `[low, high]` Hz.
pub fn analyze_signal(signal: &BreathingSignal, low: f64, high: f64, mask_area: usize) -> Result<(Spectrum, RoiReport)> {
    let spectrum = pixel_spectrum(&signal.samples, signal.fps)?;
    let band = band_bins(signal.samples.len(), signal.fps, low, high)?;
    let mags = &spectrum.mags;
    let peak_bin = band
        .clone()
        .fold(*band.start(), |best, k| if mags[k] > mags[best] { k } else { best });
    let peak = mags[peak_bin];
    let mut outside: Vec<f64> = (1..mags.len()).filter(|k| !band.contains(k)).map(|k| mags[k]).collect();
    let floor = median_in_place(&mut outside)
        .ok_or_else(|| Error::config("no frequency bins outside the breathing band"))?;
    let spectral_snr = if peak == 0.0 {
        0.0
    } else if floor == 0.0 {
        f64::INFINITY
    } else {
        peak / floor
    };
    let report = RoiReport {
        dominant_freq_hz: spectrum.freqs[peak_bin],
        in_band_peak_amplitude: peak,
        spectral_snr,
        mask_area,
    };
    Ok((spectrum, report))
}

pub fn analyze_roi(seq: &DepthSequence, mask: &Mask, params: &SignalParams) -> Result<(BreathingSignal, Spectrum, RoiReport)> {
    let signal = extract_breathing_signal(seq, mask, params)?;
    let (spectrum, report) = analyze_signal(&signal, params.band_low_hz, params.band_high_hz, mask.count())?;
    Ok((signal, spectrum, report))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Rect {
    pub x: usize,
    pub y: usize,
    pub w: usize,
    pub h: usize,
}

pub fn manual_rectangle_mask(width: usize, height: usize, rect: Rect) -> Result<Mask> {
    if rect.w == 0 || rect.h == 0 || rect.x + rect.w > width || rect.y + rect.h > height {
        return Err(Error::OutOfBounds(format!(
            "rectangle {}x{} at ({}, {}) does not fit a {width}x{height} frame",
            rect.w, rect.h, rect.x, rect.y
        )));
    }
    Ok(Mask::from_fn(width, height, |x, y| {
        (rect.x..rect.x + rect.w).contains(&x) && (rect.y..rect.y + rect.h).contains(&y)
    }))
}

/// Rough hand-drawn ROI stand-in: a rectangle with the aspect ratio of the
/// region's bounding box and `area_factor` times its pixel count, centered on
/// its centroid and shifted to stay inside the frame.
pub fn rough_rectangle(region: &Mask, area_factor: f64) -> Result<Rect> {
    let (width, height) = region.dims();
    let n = region.count();
    if n == 0 {
        return Err(Error::EmptyMask);
    }
    let (mut x0, mut x1, mut y0, mut y1) = (usize::MAX, 0, usize::MAX, 0);
    let (mut sx, mut sy) = (0.0, 0.0);
    for i in region.indices() {
        let (x, y) = (i % width, i / width);
        (x0, x1, y0, y1) = (x0.min(x), x1.max(x), y0.min(y), y1.max(y));
        sx += x as f64;
        sy += y as f64;
    }
    let aspect = (x1 - x0 + 1) as f64 / (y1 - y0 + 1) as f64;
    let area = area_factor * n as f64;
    let w = ((area * aspect).sqrt().round() as usize).clamp(1, width);
    let h = ((area / w as f64).round() as usize).clamp(1, height);
    let place = |center: f64, size: usize, limit: usize| {
        let start = (center - (size as f64 - 1.0) / 2.0).round().max(0.0) as usize;
        start.min(limit - size)
    };
    Ok(Rect {
        x: place(sx / n as f64, w, width),
        y: place(sy / n as f64, h, height),
        w,
        h,
    })
}

/// Bar plot of `mags` scaled to the largest value: one column per bin,
/// `height` rows, bars drawn from the bottom.
pub fn spectrum_plot(mags: &[f64], height: usize) -> Mask {
    let max = mags.iter().copied().fold(0.0, f64::max);
    Mask::from_fn(mags.len(), height, |x, y| {
        let level = if max > 0.0 { mags[x] / max * height as f64 } else { 0.0 };
        (height - y) as f64 <= level.round()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::depth_io::DepthFrame;
    use crate::phantom::{generate_phantom, PhantomSpec};

    fn seq_from(values: &[Vec<u16>], w: usize, h: usize) -> DepthSequence {
        let frames = values.iter().map(|v| DepthFrame::new(w, h, v.clone()).unwrap()).collect();
        DepthSequence::new(frames, 10.0).unwrap()
    }

    #[test]
    fn single_pixel_mask_returns_its_series() {
        let values: Vec<Vec<u16>> = (0..6).map(|t| (0..12).map(|i| 1000 + 10 * t + i).collect()).collect();
        let seq = seq_from(&values, 4, 3);
        let mut m = Mask::new(4, 3);
        m.set(2, 1, true);
        let s = extract_breathing_signal(&seq, &m, &SignalParams::default()).unwrap();
        let want: Vec<f64> = values.iter().map(|v| f64::from(v[6]) / 3000.0).collect();
        assert_eq!(s.samples, want);
        assert!(extract_breathing_signal(&seq, &Mask::new(4, 3), &SignalParams::default()).is_err());
    }

    #[test]
    fn dropouts_are_inpainted() {
        let mut values: Vec<Vec<u16>> = vec![vec![1500; 25]; 3];
        values[1][12] = 0;
        let seq = seq_from(&values, 5, 5);
        let mut m = Mask::new(5, 5);
        m.set(2, 2, true);
        let s = extract_breathing_signal(&seq, &m, &SignalParams::default()).unwrap();
        assert_eq!(s.samples, vec![0.5; 3]);
    }

    #[test]
    fn clean_phantom_signal_follows_closed_form() {
        let spec = PhantomSpec {
            duration_s: 20.0,
            second_harmonic: 0.0,
            ..PhantomSpec::default()
        }
        .clean();
        let (seq, gt) = generate_phantom(&spec, 0).unwrap();
        let s = extract_breathing_signal(&seq, &gt.chest_mask, &SignalParams::default()).unwrap();
        for (t, &v) in s.samples.iter().enumerate() {
            let model = (spec.body_depth_mm - spec.breathing_displacement(t)) / 3000.0;
            // integer-millimeter frames: at most half a millimeter off
            assert!((v - model).abs() <= 0.5 / 3000.0 + 1e-12, "t={t}");
        }
    }

    #[test]
    fn report_finds_breathing_peak_and_scales_linearly() {
        let base = PhantomSpec { duration_s: 60.0, ..PhantomSpec::default() }.clean();
        let (seq, gt) = generate_phantom(&base, 0).unwrap();
        let (_, _, r) = analyze_roi(&seq, &gt.chest_mask, &SignalParams::default()).unwrap();
        assert!((r.dominant_freq_hz - 0.25).abs() <= 10.0 / 600.0);
        assert_eq!(r.mask_area, gt.chest_mask.count());

        let samples: Vec<f64> = (0..600).map(|t| (0.5 * std::f64::consts::PI * t as f64 / 10.0).sin()).collect();
        let one = BreathingSignal { samples: samples.clone(), fps: 10.0 };
        let two = BreathingSignal { samples: samples.iter().map(|v| 2.0 * v).collect(), fps: 10.0 };
        let (_, a) = analyze_signal(&one, 0.2, 0.33, 1).unwrap();
        let (_, b) = analyze_signal(&two, 0.2, 0.33, 1).unwrap();
        assert!((b.in_band_peak_amplitude - 2.0 * a.in_band_peak_amplitude).abs() < 1e-9);
        assert_eq!(a.dominant_freq_hz, 0.25);
    }

    #[test]
    fn rectangles() {
        assert_eq!(manual_rectangle_mask(30, 20, Rect { x: 10, y: 10, w: 5, h: 5 }).unwrap().count(), 25);
        assert!(manual_rectangle_mask(30, 20, Rect { x: 0, y: 0, w: 30, h: 20 }).unwrap().as_slice().iter().all(|&b| b));
        assert!(manual_rectangle_mask(30, 20, Rect { x: 0, y: 0, w: 0, h: 2 }).is_err());
        assert!(manual_rectangle_mask(30, 20, Rect { x: 26, y: 0, w: 5, h: 2 }).is_err());

        let region = Mask::from_fn(40, 40, |x, y| (10..20).contains(&x) && (15..20).contains(&y));
        let r = rough_rectangle(&region, 4.0).unwrap();
        assert_eq!((r.w, r.h), (20, 10));
        assert!(manual_rectangle_mask(40, 40, r).unwrap().count() == 200);
        assert!(region.is_subset_of(&manual_rectangle_mask(40, 40, r).unwrap()));
    }

    #[test]
    fn plot_has_one_full_bar_at_the_peak() {
        let p = spectrum_plot(&[0.0, 1.0, 4.0, 2.0], 8);
        assert_eq!(p.dims(), (4, 8));
        assert_eq!((0..8).filter(|&y| p.get(2, y)).count(), 8);
        assert_eq!((0..8).filter(|&y| p.get(3, y)).count(), 4);
        assert_eq!((0..8).filter(|&y| p.get(0, y)).count(), 0);
    }
}
