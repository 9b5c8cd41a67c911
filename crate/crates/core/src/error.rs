use std::path::PathBuf;

use crate::detector::Phase;
use crate::image::{Dims, SensorId};
use crate::io::archive::ArchiveError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Two images of one session disagree on their dimensions.
    #[error("shape mismatch: expected {expected}, got {actual}")]
    ShapeMismatch { expected: Dims, actual: Dims },

    #[error("sensor mismatch: expected {expected}, got {actual}")]
    SensorMismatch {
        expected: SensorId,
        actual: SensorId,
    },

    #[error("image dimensions must be at least 1x1, got {0}")]
    EmptyImage(Dims),

    #[error("pixel buffer holds {actual} samples, {expected} expected for {dims}")]
    BufferLength {
        dims: Dims,
        expected: usize,
        actual: usize,
    },

    /// Intensity outside `[0, 1]`. These are data errors and never clipped.
    #[error("sample {index} has value {value}, outside [0, 1]")]
    OutOfRange { index: usize, value: f64 },

    #[error("{op} is not valid while the detector is {phase:?}")]
    WrongPhase { op: &'static str, phase: Phase },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),

    #[error("{path}:{line}: {message}")]
    ConfigParse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error(transparent)]
    Archive(#[from] ArchiveError),

    #[error("frame source: {0}")]
    FrameSource(String),

    #[error("report: {0}")]
    Report(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
