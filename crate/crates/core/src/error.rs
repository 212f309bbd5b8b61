use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot access {}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}:{line}: {msg}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("frame {index} ({})", path.display())]
    Frame {
        index: usize,
        path: PathBuf,
        #[source]
        source: Box<Error>,
    },

    #[error("invalid image: {0}")]
    Format(String),

    #[error("dimension mismatch at frame {index}: {got_w}x{got_h}, expected {want_w}x{want_h}")]
    DimensionMismatch {
        index: usize,
        want_w: usize,
        want_h: usize,
        got_w: usize,
        got_h: usize,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("sequence shorter than one segment ({frames} frames, segment needs {segment_len})")]
    SequenceTooShort { frames: usize, segment_len: usize },

    #[error("no DFT bin of a {len}-sample window at {fps} Hz lies in [{low}, {high}] Hz")]
    EmptyBand {
        len: usize,
        fps: f64,
        low: f64,
        high: f64,
    },

    #[error("mask is empty")]
    EmptyMask,

    #[error("no segment is free of posture changes")]
    NoStillSegments,

    #[error("out of bounds: {0}")]
    OutOfBounds(String),

    #[error("segment {index}")]
    Segment {
        index: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
