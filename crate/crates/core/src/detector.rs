//! Stateful per-sensor change detector.
//!
//! A [`Detector`] walks through three phases:
//!
//! 1. `Calibrating`: measures sensor noise while nothing touches the gel. The
//!    first frame becomes the calibration baseline; for each of the next `K`
//!    frames the largest channel-averaged difference against it is recorded,
//!    and the noise threshold is the mean of those maxima.
//! 2. `BuildingReference`: averages `N` frames into the reference image.
//! 3. `Armed`: binarizes each frame's difference against the reference and
//!    multiplies it with the previous binary image; an event fires when the
//!    fraction of surviving ones reaches the detection threshold.
//!
//! The first event after calibration is a touch; every later one is a slip.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{
    abs_diff, binary_difference, change_image, change_ratio, channel_mean, BinaryImage, Dims,
    ReferenceImage, SensorId, TactileFrame,
};

/// Noise threshold used when calibration measures no noise at all.
pub const NOISE_FLOOR: f64 = 1.0 / 255.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionConfig {
    /// Detection threshold before any slip, as a fraction of sensor pixels.
    pub tau_d_ini: f64,
    /// Frames averaged by noise calibration (`K`).
    pub calibration_frames: usize,
    /// Frames averaged into each reference image (`N`).
    pub reference_frames: usize,
}

impl Default for DetectionConfig {
    fn default() -> Self {
        DetectionConfig {
            tau_d_ini: 0.01,
            calibration_frames: 100,
            reference_frames: 10,
        }
    }
}

impl DetectionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau_d_ini > 0.0 && self.tau_d_ini <= 1.0) {
            return Err(Error::Config(format!(
                "tau_d_ini must lie in (0, 1], got {}",
                self.tau_d_ini
            )));
        }
        if self.calibration_frames == 0 {
            return Err(Error::Config(
                "calibration frame count K must be >= 1".into(),
            ));
        }
        if self.reference_frames == 0 {
            return Err(Error::Config("reference frame count N must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Phase {
    Calibrating,
    BuildingReference,
    Armed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DetectionKind {
    Touch,
    Slip,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionEvent {
    pub sensor: SensorId,
    pub t: u64,
    pub kind: DetectionKind,
    /// Change ratio that reached the threshold.
    pub ratio: f64,
    pub threshold: f64,
}

/// Result of a completed noise calibration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseCalibration {
    pub sensor: SensorId,
    /// Threshold in force after the [`NOISE_FLOOR`] substitution.
    pub tau_n: f64,
    /// Mean of the recorded maxima before any floor substitution.
    pub raw_mean: f64,
    pub sample_count: usize,
    /// Per-frame maxima of the channel-averaged difference.
    pub maxima: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Detector {
    sensor: SensorId,
    config: DetectionConfig,
    phase: Phase,
    kind: DetectionKind,
    dims: Option<Dims>,
    calibration_base: Option<ReferenceImage>,
    maxima: Vec<f64>,
    calibration: Option<NoiseCalibration>,
    tau_n: Option<f64>,
    sum: Vec<f64>,
    frames_accumulated: usize,
    reference: Option<ReferenceImage>,
    prev_binary: Option<BinaryImage>,
    last_ratio: Option<f64>,
}

impl Detector {
    /// A detector that starts with noise calibration.
    pub fn new(sensor: SensorId, config: DetectionConfig) -> Result<Detector> {
        config.validate()?;
        Ok(Detector {
            sensor,
            config,
            phase: Phase::Calibrating,
            kind: DetectionKind::Touch,
            dims: None,
            calibration_base: None,
            maxima: Vec::with_capacity(config.calibration_frames),
            calibration: None,
            tau_n: None,
            sum: Vec::new(),
            frames_accumulated: 0,
            reference: None,
            prev_binary: None,
            last_ratio: None,
        })
    }

    /// A detector with a known noise threshold, ready to build its reference.
    pub fn with_noise_threshold(
        sensor: SensorId,
        config: DetectionConfig,
        tau_n: f64,
    ) -> Result<Detector> {
        if !(0.0..=1.0).contains(&tau_n) {
            return Err(Error::Config(format!(
                "noise threshold {tau_n} outside [0, 1]"
            )));
        }
        let mut detector = Detector::new(sensor, config)?;
        detector.tau_n = Some(tau_n);
        detector.phase = Phase::BuildingReference;
        Ok(detector)
    }

    pub fn sensor(&self) -> SensorId {
        self.sensor
    }

    pub fn config(&self) -> &DetectionConfig {
        &self.config
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    /// What a change detected now would be classified as.
    pub fn detection_kind(&self) -> DetectionKind {
        self.kind
    }

    pub fn noise_threshold(&self) -> Option<f64> {
        self.tau_n
    }

    pub fn calibration(&self) -> Option<&NoiseCalibration> {
        self.calibration.as_ref()
    }

    pub fn reference(&self) -> Option<&ReferenceImage> {
        self.reference.as_ref()
    }

    pub fn prev_binary(&self) -> Option<&BinaryImage> {
        self.prev_binary.as_ref()
    }

    pub fn frames_accumulated(&self) -> usize {
        self.frames_accumulated
    }

    /// Change ratio computed by the most recent armed step, if it had a
    /// previous binary image to compare with.
    pub fn last_ratio(&self) -> Option<f64> {
        self.last_ratio
    }

    fn admit(&mut self, frame: &TactileFrame) -> Result<()> {
        if frame.sensor() != self.sensor {
            return Err(Error::SensorMismatch {
                expected: self.sensor,
                actual: frame.sensor(),
            });
        }
        match self.dims {
            Some(dims) if dims != frame.dims() => Err(Error::ShapeMismatch {
                expected: dims,
                actual: frame.dims(),
            }),
            Some(_) => Ok(()),
            None => {
                self.dims = Some(frame.dims());
                Ok(())
            }
        }
    }

    fn require(&self, op: &'static str, phase: Phase) -> Result<()> {
        if self.phase != phase {
            return Err(Error::WrongPhase {
                op,
                phase: self.phase,
            });
        }
        Ok(())
    }

    /// Feeds one no-contact frame to noise calibration. Returns the
    /// calibration once `K` maxima have been recorded.
    pub fn calibrate_step(&mut self, frame: &TactileFrame) -> Result<Option<NoiseCalibration>> {
        self.require("calibrate_step", Phase::Calibrating)?;
        self.admit(frame)?;
        let Some(base) = &self.calibration_base else {
            self.calibration_base = Some(ReferenceImage::from_frame(frame));
            return Ok(None);
        };
        let peak = channel_mean(&abs_diff(frame, base)?).max();
        self.maxima.push(peak);
        self.frames_accumulated = self.maxima.len();
        if self.maxima.len() < self.config.calibration_frames {
            return Ok(None);
        }

        let raw_mean = self.maxima.iter().sum::<f64>() / self.maxima.len() as f64;
        let tau_n = if raw_mean == 0.0 {
            NOISE_FLOOR
        } else {
            raw_mean
        };
        let calibration = NoiseCalibration {
            sensor: self.sensor,
            tau_n,
            raw_mean,
            sample_count: self.maxima.len(),
            maxima: std::mem::take(&mut self.maxima),
        };
        self.tau_n = Some(tau_n);
        self.calibration = Some(calibration.clone());
        self.calibration_base = None;
        self.begin_reference();
        Ok(Some(calibration))
    }

    fn begin_reference(&mut self) {
        self.phase = Phase::BuildingReference;
        self.frames_accumulated = 0;
        self.sum.clear();
        self.prev_binary = None;
        self.last_ratio = None;
    }

    /// Adds one frame to the running reference sum. Returns `true` when the
    /// `N`-th frame completes the reference and the detector arms.
    pub fn build_reference_step(&mut self, frame: &TactileFrame) -> Result<bool> {
        self.require("build_reference_step", Phase::BuildingReference)?;
        self.admit(frame)?;
        if self.sum.is_empty() {
            self.sum = vec![0.0; frame.dims().samples()];
        }
        for (acc, v) in self.sum.iter_mut().zip(frame.data()) {
            *acc += v;
        }
        self.frames_accumulated += 1;
        if self.frames_accumulated < self.config.reference_frames {
            return Ok(false);
        }
        let n = self.frames_accumulated as f64;
        let data = self.sum.iter().map(|s| s / n).collect();
        self.reference = Some(ReferenceImage::new(
            self.sensor,
            frame.dims(),
            data,
            self.frames_accumulated,
        )?);
        self.sum.clear();
        self.prev_binary = None;
        self.phase = Phase::Armed;
        Ok(true)
    }

    /// Runs one armed detection step at threshold `tau_d`.
    ///
    /// `tau_d` may exceed 1 once it has been raised by repeated slips; such a
    /// threshold can never be reached.
    pub fn detect_step(
        &mut self,
        frame: &TactileFrame,
        tau_d: f64,
    ) -> Result<Option<DetectionEvent>> {
        self.require("detect_step", Phase::Armed)?;
        if !(tau_d > 0.0 && tau_d.is_finite()) {
            return Err(Error::Config(format!(
                "detection threshold must be > 0, got {tau_d}"
            )));
        }
        self.admit(frame)?;
        let (Some(reference), Some(tau_n)) = (&self.reference, self.tau_n) else {
            unreachable!("armed detector without reference or noise threshold");
        };
        let binary = binary_difference(frame, reference, tau_n)?;
        let event = match self.prev_binary.take() {
            None => {
                self.last_ratio = None;
                None
            }
            Some(prev) => {
                let ratio = change_ratio(&change_image(&prev, &binary)?);
                self.last_ratio = Some(ratio);
                (ratio >= tau_d).then_some(DetectionEvent {
                    sensor: self.sensor,
                    t: frame.t(),
                    kind: self.kind,
                    ratio,
                    threshold: tau_d,
                })
            }
        };
        self.prev_binary = Some(binary);
        if event.is_some() {
            self.kind = DetectionKind::Slip;
        }
        Ok(event)
    }

    /// Switches to slip detection and starts collecting the holding reference.
    pub fn rearm_as_slip(&mut self) -> Result<()> {
        self.kind = DetectionKind::Slip;
        self.rebuild_reference()
    }

    /// Starts collecting a fresh reference without changing the detection kind.
    pub fn rebuild_reference(&mut self) -> Result<()> {
        if self.tau_n.is_none() {
            return Err(Error::WrongPhase {
                op: "rebuild_reference",
                phase: self.phase,
            });
        }
        self.begin_reference();
        Ok(())
    }

    /// Dispatches `frame` to whichever step the current phase expects.
    pub fn advance(&mut self, frame: &TactileFrame, tau_d: f64) -> Result<Option<DetectionEvent>> {
        match self.phase {
            Phase::Calibrating => self.calibrate_step(frame).map(|_| None),
            Phase::BuildingReference => self.build_reference_step(frame).map(|_| None),
            Phase::Armed => self.detect_step(frame, tau_d),
        }
    }
}
