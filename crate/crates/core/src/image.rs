//! Image types and the pure pixel arithmetic behind touch and slip detection.
//!
//! Every intensity is an `f64` in `[0, 1]`. Constructors validate the range
//! and reject violations instead of clamping them. Colour images are stored
//! row-major with interleaved RGB samples, grey and binary images row-major.
//!
//! The detection pipeline for one sensor at one time step is
//!
//! ```text
//! frame, reference --abs_diff--> rgb difference --channel_mean--> grey
//!     --binarize(noise threshold)--> binary
//! previous binary, binary --change_image--> change --change_ratio--> fraction
//! ```

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Identifies one of the two fingertip sensors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SensorId {
    S1,
    S2,
}

impl SensorId {
    pub const BOTH: [SensorId; 2] = [SensorId::S1, SensorId::S2];

    pub fn index(self) -> usize {
        match self {
            SensorId::S1 => 0,
            SensorId::S2 => 1,
        }
    }

    pub fn from_index(index: usize) -> Option<SensorId> {
        match index {
            0 => Some(SensorId::S1),
            1 => Some(SensorId::S2),
            _ => None,
        }
    }
}

impl fmt::Display for SensorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SensorId::S1 => f.write_str("S1"),
            SensorId::S2 => f.write_str("S2"),
        }
    }
}

/// Image height and width in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Dims {
    pub h: usize,
    pub w: usize,
}

impl Dims {
    pub fn new(h: usize, w: usize) -> Result<Dims> {
        let dims = Dims { h, w };
        if h == 0 || w == 0 {
            return Err(Error::EmptyImage(dims));
        }
        Ok(dims)
    }

    pub fn pixels(self) -> usize {
        self.h * self.w
    }

    pub fn samples(self) -> usize {
        self.pixels() * 3
    }

    fn expect(self, other: Dims) -> Result<()> {
        if self != other {
            return Err(Error::ShapeMismatch {
                expected: self,
                actual: other,
            });
        }
        Ok(())
    }
}

impl fmt::Display for Dims {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.h, self.w)
    }
}

fn check_unit_range(data: &[f64]) -> Result<()> {
    match data.iter().position(|v| !(0.0..=1.0).contains(v)) {
        Some(index) => Err(Error::OutOfRange {
            index,
            value: data[index],
        }),
        None => Ok(()),
    }
}

fn check_len(dims: Dims, expected: usize, actual: usize) -> Result<()> {
    if expected != actual {
        return Err(Error::BufferLength {
            dims,
            expected,
            actual,
        });
    }
    Ok(())
}

/// One normalized RGB image from one sensor at one time step.
#[derive(Debug, Clone, PartialEq)]
pub struct TactileFrame {
    sensor: SensorId,
    t: u64,
    dims: Dims,
    data: Vec<f64>,
}

impl TactileFrame {
    pub fn new(sensor: SensorId, t: u64, dims: Dims, data: Vec<f64>) -> Result<TactileFrame> {
        let dims = Dims::new(dims.h, dims.w)?;
        check_len(dims, dims.samples(), data.len())?;
        check_unit_range(&data)?;
        Ok(TactileFrame {
            sensor,
            t,
            dims,
            data,
        })
    }

    /// Builds a frame from 8-bit samples, normalized by 255.
    pub fn from_u8(sensor: SensorId, t: u64, dims: Dims, data: &[u8]) -> Result<TactileFrame> {
        let data = data.iter().map(|&v| f64::from(v) / 255.0).collect();
        TactileFrame::new(sensor, t, dims, data)
    }

    /// A frame with every sample set to `value`.
    pub fn uniform(sensor: SensorId, t: u64, dims: Dims, value: f64) -> Result<TactileFrame> {
        TactileFrame::new(sensor, t, dims, vec![value; dims.samples()])
    }

    pub fn sensor(&self) -> SensorId {
        self.sensor
    }

    pub fn t(&self) -> u64 {
        self.t
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, row: usize, col: usize, channel: usize) -> f64 {
        self.data[(row * self.dims.w + col) * 3 + channel]
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }
}

/// Per-sensor baseline image, the element-wise mean of `built_from` frames.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceImage {
    sensor: SensorId,
    dims: Dims,
    data: Vec<f64>,
    built_from: usize,
}

impl ReferenceImage {
    pub fn new(sensor: SensorId, dims: Dims, data: Vec<f64>, built_from: usize) -> Result<Self> {
        let dims = Dims::new(dims.h, dims.w)?;
        check_len(dims, dims.samples(), data.len())?;
        check_unit_range(&data)?;
        Ok(ReferenceImage {
            sensor,
            dims,
            data,
            built_from,
        })
    }

    /// Uses a single frame as the reference.
    pub fn from_frame(frame: &TactileFrame) -> ReferenceImage {
        ReferenceImage {
            sensor: frame.sensor,
            dims: frame.dims,
            data: frame.data.clone(),
            built_from: 1,
        }
    }

    /// Element-wise mean of `frames`, which must be non-empty and agree on
    /// sensor and shape.
    pub fn average(frames: &[TactileFrame]) -> Result<ReferenceImage> {
        let first = frames
            .first()
            .ok_or_else(|| Error::Config("reference needs at least one frame".into()))?;
        let mut sum = vec![0.0; first.dims.samples()];
        for frame in frames {
            check_pair(first.sensor, first.dims, frame)?;
            for (acc, v) in sum.iter_mut().zip(&frame.data) {
                *acc += v;
            }
        }
        let n = frames.len() as f64;
        let data: Vec<f64> = sum.into_iter().map(|s| s / n).collect();
        ReferenceImage::new(first.sensor, first.dims, data, frames.len())
    }

    pub fn sensor(&self) -> SensorId {
        self.sensor
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn built_from(&self) -> usize {
        self.built_from
    }
}

fn check_pair(sensor: SensorId, dims: Dims, frame: &TactileFrame) -> Result<()> {
    dims.expect(frame.dims)?;
    if sensor != frame.sensor {
        return Err(Error::SensorMismatch {
            expected: sensor,
            actual: frame.sensor,
        });
    }
    Ok(())
}

/// Per-channel absolute difference between a frame and its reference.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffImage {
    dims: Dims,
    data: Vec<f64>,
}

impl DiffImage {
    pub fn new(dims: Dims, data: Vec<f64>) -> Result<DiffImage> {
        let dims = Dims::new(dims.h, dims.w)?;
        check_len(dims, dims.samples(), data.len())?;
        check_unit_range(&data)?;
        Ok(DiffImage { dims, data })
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }
}

/// Single-channel image in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    dims: Dims,
    data: Vec<f64>,
}

impl GrayImage {
    pub fn new(dims: Dims, data: Vec<f64>) -> Result<GrayImage> {
        let dims = Dims::new(dims.h, dims.w)?;
        check_len(dims, dims.pixels(), data.len())?;
        check_unit_range(&data)?;
        Ok(GrayImage { dims, data })
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.dims.w + col]
    }

    /// Largest intensity in the image.
    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(0.0, f64::max)
    }
}

/// Image whose every pixel is exactly 0 or 1.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BinaryImage {
    dims: Dims,
    data: Vec<u8>,
}

impl BinaryImage {
    pub fn new(dims: Dims, data: Vec<u8>) -> Result<BinaryImage> {
        let dims = Dims::new(dims.h, dims.w)?;
        check_len(dims, dims.pixels(), data.len())?;
        if let Some(index) = data.iter().position(|&v| v > 1) {
            return Err(Error::OutOfRange {
                index,
                value: f64::from(data[index]),
            });
        }
        Ok(BinaryImage { dims, data })
    }

    pub fn zeros(dims: Dims) -> BinaryImage {
        BinaryImage {
            dims,
            data: vec![0; dims.pixels()],
        }
    }

    pub fn ones(dims: Dims) -> BinaryImage {
        BinaryImage {
            dims,
            data: vec![1; dims.pixels()],
        }
    }

    /// Image with ones exactly at the given `(row, col)` positions.
    pub fn from_ones(dims: Dims, ones: &[(usize, usize)]) -> Result<BinaryImage> {
        let mut image = BinaryImage::zeros(Dims::new(dims.h, dims.w)?);
        for &(row, col) in ones {
            if row >= dims.h || col >= dims.w {
                return Err(Error::Config(format!(
                    "pixel ({row}, {col}) outside {dims} image"
                )));
            }
            image.data[row * dims.w + col] = 1;
        }
        Ok(image)
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.data[row * self.dims.w + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: bool) {
        self.data[row * self.dims.w + col] = u8::from(value);
    }

    pub fn count_ones(&self) -> usize {
        self.data.iter().filter(|&&v| v == 1).count()
    }

    /// Positions of all ones in row-major order.
    pub fn ones_positions(&self) -> Vec<(usize, usize)> {
        self.data
            .iter()
            .enumerate()
            .filter(|(_, &v)| v == 1)
            .map(|(i, _)| (i / self.dims.w, i % self.dims.w))
            .collect()
    }

    /// Lifts the image to grey levels 0.0 and 1.0.
    pub fn to_gray(&self) -> GrayImage {
        GrayImage {
            dims: self.dims,
            data: self.data.iter().map(|&v| f64::from(v)).collect(),
        }
    }
}

/// `|frame - reference|` per pixel and channel.
pub fn abs_diff(frame: &TactileFrame, reference: &ReferenceImage) -> Result<DiffImage> {
    reference.dims.expect(frame.dims)?;
    if frame.sensor != reference.sensor {
        return Err(Error::SensorMismatch {
            expected: reference.sensor,
            actual: frame.sensor,
        });
    }
    let data = frame
        .data
        .iter()
        .zip(&reference.data)
        .map(|(a, b)| (a - b).abs())
        .collect();
    DiffImage::new(frame.dims, data)
}

/// Averages the three colour channels of a difference image.
pub fn channel_mean(diff: &DiffImage) -> GrayImage {
    let data = diff
        .data
        .chunks_exact(3)
        .map(|px| (px[0] + px[1] + px[2]) / 3.0)
        .collect();
    GrayImage {
        dims: diff.dims,
        data,
    }
}

/// Pixels strictly below `noise_threshold` become 0, all others 1.
pub fn binarize(gray: &GrayImage, noise_threshold: f64) -> Result<BinaryImage> {
    if !(0.0..=1.0).contains(&noise_threshold) {
        return Err(Error::Config(format!(
            "noise threshold {noise_threshold} outside [0, 1]"
        )));
    }
    let data = gray
        .data
        .iter()
        .map(|&v| u8::from(v >= noise_threshold))
        .collect();
    Ok(BinaryImage {
        dims: gray.dims,
        data,
    })
}

/// Element-wise product of two consecutive binary difference images.
pub fn change_image(prev: &BinaryImage, curr: &BinaryImage) -> Result<BinaryImage> {
    prev.dims.expect(curr.dims)?;
    let data = prev
        .data
        .iter()
        .zip(&curr.data)
        .map(|(a, b)| a * b)
        .collect();
    Ok(BinaryImage {
        dims: prev.dims,
        data,
    })
}

/// Fraction of pixels equal to one.
pub fn change_ratio(change: &BinaryImage) -> f64 {
    change.count_ones() as f64 / change.dims.pixels() as f64
}

/// Runs `abs_diff`, `channel_mean` and `binarize` in one pass.
pub fn binary_difference(
    frame: &TactileFrame,
    reference: &ReferenceImage,
    noise_threshold: f64,
) -> Result<BinaryImage> {
    binarize(&channel_mean(&abs_diff(frame, reference)?), noise_threshold)
}
