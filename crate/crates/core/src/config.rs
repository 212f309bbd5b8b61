//! All pipeline parameters in one place, with a key/value file form.

use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use crate::depth_io::DEFAULT_MAX_DISTANCE_MM;
use crate::error::{Error, Result};
use crate::kv::{KvDoc, KvWriter};
use crate::morph::MorphParams;
use crate::noise::{default_margin, CannyParams, IgnoreParams, DEFAULT_MEDIAN_RADIUS};
use crate::signal::SignalParams;
use crate::spectral::{SegmentConfig, Window};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PipelineConfig {
    pub max_distance_mm: f64,
    pub median_radius: usize,
    /// `None` scales the margin with the frame width.
    pub margin: Option<usize>,
    pub canny: CannyParams,
    pub dilate_radius: usize,
    pub segment_seconds: f64,
    /// `None` uses back-to-back segments.
    pub stride_seconds: Option<f64>,
    pub band_low_hz: f64,
    pub band_high_hz: f64,
    pub amp_threshold_frac: f64,
    pub window: Window,
    pub open_radius: usize,
    pub close_radius: usize,
    pub min_area_frac: f64,
    pub confidence_threshold: f64,
    /// Frame-to-frame change (mm above the typical change) treated as a posture change.
    pub motion_threshold_mm: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            max_distance_mm: DEFAULT_MAX_DISTANCE_MM,
            median_radius: DEFAULT_MEDIAN_RADIUS,
            margin: None,
            canny: CannyParams::default(),
            dilate_radius: 2,
            segment_seconds: 30.0,
            stride_seconds: None,
            band_low_hz: 0.2,
            band_high_hz: 0.33,
            amp_threshold_frac: 0.3,
            window: Window::Rect,
            open_radius: 1,
            close_radius: 2,
            min_area_frac: 0.0005,
            confidence_threshold: 0.5,
            motion_threshold_mm: 3.0,
        }
    }
}

fn auto_or<T: FromStr>(doc: &KvDoc, key: &str, default: Option<T>) -> Result<Option<T>>
where
    T::Err: Display,
{
    match doc.raw(key)? {
        None => Ok(default),
        Some("auto") => Ok(None),
        Some(_) => doc.optional(key),
    }
}

fn show_auto<T: Display>(v: Option<T>) -> String {
    v.map_or_else(|| "auto".to_string(), |v| v.to_string())
}

impl PipelineConfig {
    pub fn segment_config(&self, fps: f64) -> Result<SegmentConfig> {
        let frames = |s: f64| (s * fps).round() as usize;
        let cfg = SegmentConfig {
            segment_len: frames(self.segment_seconds),
            segment_stride: frames(self.stride_seconds.unwrap_or(self.segment_seconds)),
            band_low_hz: self.band_low_hz,
            band_high_hz: self.band_high_hz,
            amp_threshold_frac: self.amp_threshold_frac,
            window: self.window,
        };
        cfg.validate(fps)?;
        cfg.band_bins(fps)?;
        Ok(cfg)
    }

    pub fn ignore_params(&self, width: usize) -> IgnoreParams {
        IgnoreParams {
            margin: self.margin.unwrap_or_else(|| default_margin(width)),
            canny: self.canny,
            dilate_radius: self.dilate_radius,
        }
    }

    pub fn morph_params(&self, pixels: usize) -> MorphParams {
        MorphParams {
            open_radius: self.open_radius,
            close_radius: self.close_radius,
            min_area: (self.min_area_frac * pixels as f64).round() as usize,
        }
    }

    pub fn signal_params(&self) -> SignalParams {
        SignalParams {
            max_distance_mm: self.max_distance_mm,
            median_radius: self.median_radius,
            band_low_hz: self.band_low_hz,
            band_high_hz: self.band_high_hz,
        }
    }

    /// Checks everything that does not depend on the sequence.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::config(msg));
        if !(self.max_distance_mm > 0.0) {
            return bad(format!("max distance must be positive, got {}", self.max_distance_mm));
        }
        if self.median_radius == 0 {
            return bad("median radius must be at least 1".into());
        }
        self.canny.validate()?;
        if !(self.segment_seconds > 0.0) || self.stride_seconds.is_some_and(|s| !(s > 0.0 && s <= self.segment_seconds)) {
            return bad(format!(
                "need segment seconds > 0 and 0 < stride <= segment, got {} / {}",
                self.segment_seconds,
                show_auto(self.stride_seconds)
            ));
        }
        if !(0.0 < self.band_low_hz && self.band_low_hz < self.band_high_hz) {
            return bad(format!("band [{}, {}] Hz is empty", self.band_low_hz, self.band_high_hz));
        }
        if !(self.amp_threshold_frac > 0.0 && self.amp_threshold_frac < 1.0) {
            return bad(format!("amplitude fraction must be in (0, 1), got {}", self.amp_threshold_frac));
        }
        if !(0.0..1.0).contains(&self.min_area_frac) {
            return bad(format!("minimum area fraction must be in [0, 1), got {}", self.min_area_frac));
        }
        if !(self.confidence_threshold > 0.0 && self.confidence_threshold <= 1.0) {
            return bad(format!("confidence threshold must be in (0, 1], got {}", self.confidence_threshold));
        }
        if !(self.motion_threshold_mm > 0.0) {
            return bad(format!("motion threshold must be positive, got {}", self.motion_threshold_mm));
        }
        Ok(())
    }

    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        Self::from_doc(&KvDoc::parse(text, origin)?)
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_doc(&KvDoc::read(path)?)
    }

    fn from_doc(doc: &KvDoc) -> Result<Self> {
        let d = PipelineConfig::default();
        let cfg = PipelineConfig {
            max_distance_mm: doc.or_default("max_distance_mm", d.max_distance_mm)?,
            median_radius: doc.or_default("median_radius", d.median_radius)?,
            margin: auto_or(doc, "margin", d.margin)?,
            canny: CannyParams {
                sigma: doc.or_default("canny_sigma", d.canny.sigma)?,
                low: doc.or_default("canny_low", d.canny.low)?,
                high: doc.or_default("canny_high", d.canny.high)?,
            },
            dilate_radius: doc.or_default("dilate_radius", d.dilate_radius)?,
            segment_seconds: doc.or_default("segment_seconds", d.segment_seconds)?,
            stride_seconds: auto_or(doc, "stride_seconds", d.stride_seconds)?,
            band_low_hz: doc.or_default("band_low_hz", d.band_low_hz)?,
            band_high_hz: doc.or_default("band_high_hz", d.band_high_hz)?,
            amp_threshold_frac: doc.or_default("amp_threshold_frac", d.amp_threshold_frac)?,
            window: doc.or_default("window", d.window)?,
            open_radius: doc.or_default("open_radius", d.open_radius)?,
            close_radius: doc.or_default("close_radius", d.close_radius)?,
            min_area_frac: doc.or_default("min_area_frac", d.min_area_frac)?,
            confidence_threshold: doc.or_default("confidence_threshold", d.confidence_threshold)?,
            motion_threshold_mm: doc.or_default("motion_threshold_mm", d.motion_threshold_mm)?,
        };
        doc.finish()?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_kv(&self) -> String {
        let mut w = KvWriter::new();
        w.entry("max_distance_mm", self.max_distance_mm)
            .entry("median_radius", self.median_radius)
            .entry("margin", show_auto(self.margin))
            .entry("canny_sigma", self.canny.sigma)
            .entry("canny_low", self.canny.low)
            .entry("canny_high", self.canny.high)
            .entry("dilate_radius", self.dilate_radius)
            .entry("segment_seconds", self.segment_seconds)
            .entry("stride_seconds", show_auto(self.stride_seconds))
            .entry("band_low_hz", self.band_low_hz)
            .entry("band_high_hz", self.band_high_hz)
            .entry("amp_threshold_frac", self.amp_threshold_frac)
            .entry("window", self.window)
            .entry("open_radius", self.open_radius)
            .entry("close_radius", self.close_radius)
            .entry("min_area_frac", self.min_area_frac)
            .entry("confidence_threshold", self.confidence_threshold)
            .entry("motion_threshold_mm", self.motion_threshold_mm);
        w.finish()
    }
}
