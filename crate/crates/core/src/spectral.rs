//! Per-pixel temporal spectra over time segments, in-band maximal-amplitude
//! images and their relative thresholding.
//!
//! Magnitudes are `|X_k|` of the unnormalized forward DFT of the mean-removed
//! signal, one-sided (`k = 0..=L/2`, frequency `k·fps/L`). The mean is
//! subtracted before the transform, so bin 0 is always zero and a constant
//! depth offset never changes any magnitude.

use std::ops::RangeInclusive;
use std::str::FromStr;
use std::sync::Arc;

use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::depth_io::{DepthFrame, DepthSequence, NormalizedFrame};
use crate::error::{Error, Result};
use crate::grid::{AmplitudeImage, IgnoreMask, Mask, ScalarImage, SegmentMask};

/// Taper applied to each mean-removed segment before the transform.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Window {
    #[default]
    Rect,
    Hann,
}

impl Window {
    fn coefficients(self, len: usize) -> Option<Vec<f64>> {
        match self {
            Window::Rect => None,
            Window::Hann => Some(
                (0..len)
                    .map(|i| {
                        let phase = 2.0 * std::f64::consts::PI * i as f64 / len as f64;
                        0.5 - 0.5 * phase.cos()
                    })
                    .collect(),
            ),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Window::Rect => "rect",
            Window::Hann => "hann",
        }
    }
}

impl FromStr for Window {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "rect" => Ok(Window::Rect),
            "hann" => Ok(Window::Hann),
            other => Err(format!("unknown window `{other}` (expected rect or hann)")),
        }
    }
}

impl std::fmt::Display for Window {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One-sided magnitude spectrum.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub freqs: Vec<f64>,
    pub mags: Vec<f64>,
}

/// Reusable FFT plan and buffers for signals of one fixed length.
pub struct SpectrumEngine {
    len: usize,
    fft: Arc<dyn Fft<f64>>,
    taper: Option<Vec<f64>>,
    buf: Vec<Complex<f64>>,
    scratch: Vec<Complex<f64>>,
}

impl SpectrumEngine {
    pub fn new(len: usize, window: Window) -> Self {
        let fft = FftPlanner::new().plan_fft_forward(len);
        let scratch = vec![Complex::default(); fft.get_inplace_scratch_len()];
        SpectrumEngine {
            len,
            fft,
            taper: window.coefficients(len),
            buf: vec![Complex::default(); len],
            scratch,
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Number of one-sided bins, `L/2 + 1`.
    pub fn bins(&self) -> usize {
        self.len / 2 + 1
    }

    /// Writes the one-sided magnitudes of `signal` into `out[..self.bins()]`.
    pub fn magnitudes(&mut self, signal: &[f64], out: &mut [f64]) {
        assert_eq!(signal.len(), self.len, "signal length does not match the plan");
        // exact zeros for a constant signal; the rounded mean would leave ~1e-16 residue
        if signal.iter().all(|&s| s == signal[0]) {
            out[..self.bins()].fill(0.0);
            return;
        }
        let mean = signal.iter().sum::<f64>() / self.len as f64;
        match &self.taper {
            None => {
                for (b, &s) in self.buf.iter_mut().zip(signal) {
                    *b = Complex::new(s - mean, 0.0);
                }
            }
            Some(taper) => {
                for ((b, &s), &t) in self.buf.iter_mut().zip(signal).zip(taper) {
                    *b = Complex::new((s - mean) * t, 0.0);
                }
            }
        }
        self.fft.process_with_scratch(&mut self.buf, &mut self.scratch);
        for (o, c) in out[..self.bins()].iter_mut().zip(&self.buf) {
            *o = c.norm();
        }
        out[0] = 0.0;
    }
}

fn bin_freqs(len: usize, fps: f64) -> Vec<f64> {
    (0..=len / 2).map(|k| k as f64 * fps / len as f64).collect()
}

/// One-sided DFT magnitudes of the mean-removed `signal` sampled at `fps`.
pub fn pixel_spectrum(signal: &[f64], fps: f64) -> Result<Spectrum> {
    pixel_spectrum_windowed(signal, fps, Window::Rect)
}

pub fn pixel_spectrum_windowed(signal: &[f64], fps: f64, window: Window) -> Result<Spectrum> {
    if signal.len() < 2 {
        return Err(Error::config("a spectrum needs at least two samples"));
    }
    let mut engine = SpectrumEngine::new(signal.len(), window);
    let mut mags = vec![0.0; engine.bins()];
    engine.magnitudes(signal, &mut mags);
    Ok(Spectrum {
        freqs: bin_freqs(signal.len(), fps),
        mags,
    })
}

/// Non-DC bins whose frequency `k·fps/len` lies in `[low, high]`.
pub fn band_bins(len: usize, fps: f64, low: f64, high: f64) -> Result<RangeInclusive<usize>> {
    let freq = |k: usize| k as f64 * fps / len as f64;
    let mut inside = (1..=len / 2).filter(|&k| freq(k) >= low && freq(k) <= high);
    let first = inside.next();
    let last = inside.next_back().or(first);
    match (first, last) {
        (Some(a), Some(b)) => Ok(a..=b),
        _ => Err(Error::EmptyBand { len, fps, low, high }),
    }
}

/// Segmenting and thresholding parameters, with the segment length in frames.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentConfig {
    pub segment_len: usize,
    pub segment_stride: usize,
    pub band_low_hz: f64,
    pub band_high_hz: f64,
    pub amp_threshold_frac: f64,
    pub window: Window,
}

impl SegmentConfig {
    pub fn validate(&self, fps: f64) -> Result<()> {
        if self.segment_len < 2 {
            return Err(Error::config(format!(
                "segment must span at least 2 frames, got {}",
                self.segment_len
            )));
        }
        if !(1..=self.segment_len).contains(&self.segment_stride) {
            return Err(Error::config(format!(
                "segment stride must be in 1..={}, got {}",
                self.segment_len, self.segment_stride
            )));
        }
        if !(0.0 < self.band_low_hz && self.band_low_hz < self.band_high_hz && self.band_high_hz < fps / 2.0) {
            return Err(Error::config(format!(
                "band [{}, {}] Hz must satisfy 0 < low < high < fps/2 = {}",
                self.band_low_hz,
                self.band_high_hz,
                fps / 2.0
            )));
        }
        if !(self.amp_threshold_frac > 0.0 && self.amp_threshold_frac < 1.0) {
            return Err(Error::config(format!(
                "amplitude threshold fraction must be in (0, 1), got {}",
                self.amp_threshold_frac
            )));
        }
        Ok(())
    }

    pub fn band_bins(&self, fps: f64) -> Result<RangeInclusive<usize>> {
        band_bins(self.segment_len, fps, self.band_low_hz, self.band_high_hz)
    }
}

/// Maximum magnitude over the band bins and over all non-DC bins.
#[inline]
pub(crate) fn peak_amplitudes(mags: &[f64], band: &RangeInclusive<usize>) -> (f64, f64) {
    let in_band = mags[band.clone()].iter().copied().fold(0.0, f64::max);
    let overall = mags[1..].iter().copied().fold(0.0, f64::max);
    (in_band, overall)
}

fn amplitude_image(
    frames: &[NormalizedFrame],
    ignore: &IgnoreMask,
    cfg: &SegmentConfig,
    fps: f64,
    band_limited: bool,
) -> Result<AmplitudeImage> {
    cfg.validate(fps)?;
    if frames.len() != cfg.segment_len {
        return Err(Error::config(format!(
            "segment holds {} frames, configuration expects {}",
            frames.len(),
            cfg.segment_len
        )));
    }
    let (w, h) = ignore.dims();
    if let Some((index, f)) = frames.iter().enumerate().find(|(_, f)| f.dims() != (w, h)) {
        return Err(Error::DimensionMismatch {
            index,
            want_w: w,
            want_h: h,
            got_w: f.width(),
            got_h: f.height(),
        });
    }
    let band = cfg.band_bins(fps)?;
    let len = cfg.segment_len;
    let mut out = ScalarImage::new(w, h);
    out.as_mut_slice()
        .par_chunks_mut(w.max(1))
        .enumerate()
        .for_each_init(
            || (SpectrumEngine::new(len, cfg.window), vec![0.0; len], vec![0.0; len / 2 + 1]),
            |(engine, series, mags), (y, row)| {
                for (x, amp) in row.iter_mut().enumerate() {
                    if ignore.get(x, y) {
                        *amp = 0.0;
                        continue;
                    }
                    for (s, f) in series.iter_mut().zip(frames) {
                        *s = f.get(x, y);
                    }
                    engine.magnitudes(series, mags);
                    let (in_band, overall) = peak_amplitudes(mags, &band);
                    *amp = if band_limited { in_band } else { overall };
                }
            },
        );
    Ok(out)
}

/// Per pixel, the largest magnitude among the band bins of its segment signal;
/// ignored pixels get 0.
pub fn band_limited_amplitude(
    segment: &[NormalizedFrame],
    ignore: &IgnoreMask,
    cfg: &SegmentConfig,
    fps: f64,
) -> Result<AmplitudeImage> {
    amplitude_image(segment, ignore, cfg, fps, true)
}

/// Like [`band_limited_amplitude`] but over every non-DC bin.
pub fn max_amplitude(
    segment: &[NormalizedFrame],
    ignore: &IgnoreMask,
    cfg: &SegmentConfig,
    fps: f64,
) -> Result<AmplitudeImage> {
    amplitude_image(segment, ignore, cfg, fps, false)
}

/// Marks pixels whose amplitude reaches `frac` of the image maximum; an
/// all-zero image yields an empty mask.
pub fn threshold_amplitude(amp: &AmplitudeImage, frac: f64) -> Result<SegmentMask> {
    if !(frac > 0.0 && frac < 1.0) {
        return Err(Error::config(format!(
            "amplitude threshold fraction must be in (0, 1), got {frac}"
        )));
    }
    let (w, h) = amp.dims();
    let max = amp.max();
    if max <= 0.0 {
        return Ok(Mask::new(w, h));
    }
    let cut = frac * max;
    Mask::from_vec(w, h, amp.as_slice().iter().map(|&a| a >= cut).collect())
}

/// Window start frames `0, stride, 2·stride, …`; trailing partial windows are dropped.
pub fn segment_starts(frames: usize, segment_len: usize, stride: usize) -> Result<Vec<usize>> {
    if segment_len == 0 || stride == 0 {
        return Err(Error::config("segment length and stride must be positive"));
    }
    if frames < segment_len {
        return Err(Error::SequenceTooShort { frames, segment_len });
    }
    Ok((0..=frames - segment_len).step_by(stride).collect())
}

pub fn iter_segments<'a>(seq: &'a DepthSequence, cfg: &SegmentConfig) -> Result<Vec<(usize, &'a [DepthFrame])>> {
    Ok(segment_starts(seq.len(), cfg.segment_len, cfg.segment_stride)?
        .into_iter()
        .map(|s| (s, &seq.frames()[s..s + cfg.segment_len]))
        .collect())
}
