//! Chest-region segmentation for depth video of a sleeping person, with a
//! phantom generator for ground-truth experiments.
//!
//! The processing chain lives in [`pipeline::segment_sequence`]; the other
//! modules expose each stage on its own.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod depth_io;
mod error;
pub mod grid;
pub mod kv;
pub mod morph;
pub mod noise;
pub mod phantom;
pub mod pipeline;
pub mod signal;
pub mod spectral;
pub mod temporal;

pub use config::PipelineConfig;
pub use depth_io::{DepthFrame, DepthSequence, NormalizedFrame};
pub use error::{Error, Result};
pub use grid::{AmplitudeImage, IgnoreMask, Mask, Overlap, ScalarImage, SegmentMask, SegmentationMask};
pub use pipeline::{segment_sequence, with_workers, SegmentArtifacts, SegmentationResult};
