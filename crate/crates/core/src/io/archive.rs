//! `TGF1` tactile frame archives.
//!
//! All integers are little-endian. The 14-byte header is
//!
//! | offset | size | field          |
//! |--------|------|----------------|
//! | 0      | 4    | magic `TGF1`   |
//! | 4      | 2    | height `u16`   |
//! | 6      | 2    | width `u16`    |
//! | 8      | 1    | sensor count   |
//! | 9      | 4    | frame count    |
//! | 13     | 1    | pixel format: 0 = `u8rgb`, 1 = `f32rgb` |
//!
//! The payload follows immediately: for each time step, one image per
//! sensor, each `h * w` pixels in row-major order with interleaved RGB
//! samples. `u8rgb` samples are normalized by 255 on decode; `f32rgb`
//! samples are stored as IEEE-754 little-endian and must lie in `[0, 1]`.

use std::path::Path;

use crate::error::{Error, Result};
use crate::fsm::{GripperCommand, MotionCommand};
use crate::image::{Dims, SensorId, TactileFrame};
use crate::run::{Actuator, FrameSource};

pub const MAGIC: [u8; 4] = *b"TGF1";
pub const HEADER_LEN: usize = 14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PixelFormat {
    U8Rgb,
    F32Rgb,
}

impl PixelFormat {
    pub fn code(self) -> u8 {
        match self {
            PixelFormat::U8Rgb => 0,
            PixelFormat::F32Rgb => 1,
        }
    }

    pub fn from_code(code: u8) -> Option<PixelFormat> {
        match code {
            0 => Some(PixelFormat::U8Rgb),
            1 => Some(PixelFormat::F32Rgb),
            _ => None,
        }
    }

    pub fn bytes_per_sample(self) -> usize {
        match self {
            PixelFormat::U8Rgb => 1,
            PixelFormat::F32Rgb => 4,
        }
    }
}

/// Structured decode failures; offsets are byte positions in the file.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ArchiveError {
    #[error("truncated header: file has {len} bytes, header needs {HEADER_LEN}")]
    TruncatedHeader { len: usize },
    #[error("bad magic {found:?} at offset 0, expected \"TGF1\"")]
    BadMagic { found: [u8; 4] },
    #[error("image dimensions {h}x{w} at offset 4 must be non-zero")]
    ZeroDimension { h: u16, w: u16 },
    #[error("sensor count 0 at offset 8")]
    ZeroSensors,
    #[error("unknown pixel format code {code} at offset 13")]
    UnknownPixelFormat { code: u8 },
    #[error("payload size for the header at offset 0 overflows addressable memory")]
    SizeOverflow,
    #[error(
        "payload truncated at offset {offset}: frame {frame} incomplete, file should be {expected_len} bytes"
    )]
    TruncatedPayload {
        offset: usize,
        frame: u32,
        expected_len: usize,
    },
    #[error("{extra} trailing bytes at offset {offset}")]
    TrailingBytes { offset: usize, extra: usize },
    #[error("sample at offset {offset} has value {value}, outside [0, 1]")]
    SampleOutOfRange { offset: usize, value: f32 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ArchiveHeader {
    pub h: u16,
    pub w: u16,
    pub sensor_count: u8,
    pub frame_count: u32,
    pub pixel_format: PixelFormat,
}

impl ArchiveHeader {
    pub fn dims(&self) -> Dims {
        Dims {
            h: usize::from(self.h),
            w: usize::from(self.w),
        }
    }

    /// Bytes in one sensor image.
    pub fn image_bytes(&self) -> usize {
        self.dims().samples() * self.pixel_format.bytes_per_sample()
    }

    fn payload_len(&self) -> Option<usize> {
        let len = u64::from(self.frame_count)
            .checked_mul(u64::from(self.sensor_count))?
            .checked_mul(u64::from(self.h))?
            .checked_mul(u64::from(self.w))?
            .checked_mul(3)?
            .checked_mul(self.pixel_format.bytes_per_sample() as u64)?
            .checked_add(HEADER_LEN as u64)?;
        usize::try_from(len).ok().map(|l| l - HEADER_LEN)
    }

    fn encode(&self) -> [u8; HEADER_LEN] {
        let mut out = [0u8; HEADER_LEN];
        out[..4].copy_from_slice(&MAGIC);
        out[4..6].copy_from_slice(&self.h.to_le_bytes());
        out[6..8].copy_from_slice(&self.w.to_le_bytes());
        out[8] = self.sensor_count;
        out[9..13].copy_from_slice(&self.frame_count.to_le_bytes());
        out[13] = self.pixel_format.code();
        out
    }
}

/// An archive held in memory: header plus raw payload bytes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrameArchive {
    header: ArchiveHeader,
    payload: Vec<u8>,
}

impl FrameArchive {
    pub fn header(&self) -> &ArchiveHeader {
        &self.header
    }

    pub fn payload(&self) -> &[u8] {
        &self.payload
    }

    pub fn frame_count(&self) -> u32 {
        self.header.frame_count
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<FrameArchive, ArchiveError> {
        if bytes.len() < HEADER_LEN {
            return Err(ArchiveError::TruncatedHeader { len: bytes.len() });
        }
        let found: [u8; 4] = bytes[..4].try_into().expect("4 bytes");
        if found != MAGIC {
            return Err(ArchiveError::BadMagic { found });
        }
        let h = u16::from_le_bytes([bytes[4], bytes[5]]);
        let w = u16::from_le_bytes([bytes[6], bytes[7]]);
        if h == 0 || w == 0 {
            return Err(ArchiveError::ZeroDimension { h, w });
        }
        let sensor_count = bytes[8];
        if sensor_count == 0 {
            return Err(ArchiveError::ZeroSensors);
        }
        let frame_count = u32::from_le_bytes(bytes[9..13].try_into().expect("4 bytes"));
        let pixel_format = PixelFormat::from_code(bytes[13])
            .ok_or(ArchiveError::UnknownPixelFormat { code: bytes[13] })?;
        let header = ArchiveHeader {
            h,
            w,
            sensor_count,
            frame_count,
            pixel_format,
        };
        let payload_len = header.payload_len().ok_or(ArchiveError::SizeOverflow)?;
        let available = bytes.len() - HEADER_LEN;
        if available < payload_len {
            let step_bytes = header.image_bytes() * usize::from(sensor_count);
            return Err(ArchiveError::TruncatedPayload {
                offset: bytes.len(),
                frame: (available / step_bytes) as u32,
                expected_len: HEADER_LEN + payload_len,
            });
        }
        if available > payload_len {
            return Err(ArchiveError::TrailingBytes {
                offset: HEADER_LEN + payload_len,
                extra: available - payload_len,
            });
        }
        Ok(FrameArchive {
            header,
            payload: bytes[HEADER_LEN..].to_vec(),
        })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + self.payload.len());
        out.extend_from_slice(&self.header.encode());
        out.extend_from_slice(&self.payload);
        out
    }

    pub fn read(path: &Path) -> Result<FrameArchive> {
        let bytes = std::fs::read(path)?;
        Ok(FrameArchive::from_bytes(&bytes)?)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    /// Encodes time steps of per-sensor frames.
    pub fn from_frames(steps: &[Vec<TactileFrame>], format: PixelFormat) -> Result<FrameArchive> {
        let first = steps
            .first()
            .and_then(|s| s.first())
            .ok_or_else(|| Error::Config("cannot infer archive shape from no frames".into()))?;
        let mut builder = ArchiveBuilder::new(first.dims(), steps[0].len(), format)?;
        for step in steps {
            builder.push(step)?;
        }
        Ok(builder.finish())
    }

    /// Decodes the image of `sensor` (0-based) at time step `t`.
    pub fn frame(&self, t: u32, sensor: usize) -> Result<TactileFrame> {
        let id = SensorId::from_index(sensor)
            .ok_or_else(|| Error::Config(format!("archive sensor {sensor} has no sensor id")))?;
        if t >= self.header.frame_count || sensor >= usize::from(self.header.sensor_count) {
            return Err(Error::Config(format!(
                "frame ({t}, {sensor}) outside archive"
            )));
        }
        let image_bytes = self.header.image_bytes();
        let start = (t as usize * usize::from(self.header.sensor_count) + sensor) * image_bytes;
        let raw = &self.payload[start..start + image_bytes];
        let dims = self.header.dims();
        match self.header.pixel_format {
            PixelFormat::U8Rgb => TactileFrame::from_u8(id, u64::from(t), dims, raw),
            PixelFormat::F32Rgb => {
                let mut data = Vec::with_capacity(dims.samples());
                for (i, chunk) in raw.chunks_exact(4).enumerate() {
                    let value = f32::from_le_bytes(chunk.try_into().expect("4 bytes"));
                    if !(0.0..=1.0).contains(&value) {
                        return Err(ArchiveError::SampleOutOfRange {
                            offset: HEADER_LEN + start + i * 4,
                            value,
                        }
                        .into());
                    }
                    data.push(f64::from(value));
                }
                TactileFrame::new(id, u64::from(t), dims, data)
            }
        }
    }

    /// All frames of time step `t`, one per sensor.
    pub fn step(&self, t: u32) -> Result<Vec<TactileFrame>> {
        (0..usize::from(self.header.sensor_count))
            .map(|s| self.frame(t, s))
            .collect()
    }
}

/// Incrementally encodes frames into an archive.
#[derive(Debug, Clone)]
pub struct ArchiveBuilder {
    header: ArchiveHeader,
    payload: Vec<u8>,
}

impl ArchiveBuilder {
    pub fn new(dims: Dims, sensor_count: usize, format: PixelFormat) -> Result<ArchiveBuilder> {
        let h = u16::try_from(dims.h)
            .map_err(|_| Error::Config(format!("height {} exceeds u16", dims.h)))?;
        let w = u16::try_from(dims.w)
            .map_err(|_| Error::Config(format!("width {} exceeds u16", dims.w)))?;
        let sensor_count = u8::try_from(sensor_count)
            .ok()
            .filter(|&c| c > 0)
            .ok_or_else(|| Error::Config(format!("sensor count {sensor_count} not in 1..=255")))?;
        Ok(ArchiveBuilder {
            header: ArchiveHeader {
                h,
                w,
                sensor_count,
                frame_count: 0,
                pixel_format: format,
            },
            payload: Vec::new(),
        })
    }

    /// Appends one time step. `u8rgb` quantizes to the nearest level.
    pub fn push(&mut self, step: &[TactileFrame]) -> Result<()> {
        if step.len() != usize::from(self.header.sensor_count) {
            return Err(Error::Config(format!(
                "time step has {} frames, archive has {} sensors",
                step.len(),
                self.header.sensor_count
            )));
        }
        let dims = self.header.dims();
        for frame in step {
            if frame.dims() != dims {
                return Err(Error::ShapeMismatch {
                    expected: dims,
                    actual: frame.dims(),
                });
            }
            match self.header.pixel_format {
                PixelFormat::U8Rgb => self
                    .payload
                    .extend(frame.data().iter().map(|v| (v * 255.0).round() as u8)),
                PixelFormat::F32Rgb => {
                    for v in frame.data() {
                        self.payload.extend_from_slice(&(*v as f32).to_le_bytes());
                    }
                }
            }
        }
        self.header.frame_count = self
            .header
            .frame_count
            .checked_add(1)
            .ok_or_else(|| Error::Config("archive frame count exceeds u32".into()))?;
        Ok(())
    }

    pub fn frame_count(&self) -> u32 {
        self.header.frame_count
    }

    pub fn finish(self) -> FrameArchive {
        FrameArchive {
            header: self.header,
            payload: self.payload,
        }
    }
}

/// Plays a two-sensor archive back as a frame source.
#[derive(Debug, Clone)]
pub struct ArchiveSource {
    archive: FrameArchive,
    next: u32,
}

impl ArchiveSource {
    pub fn new(archive: FrameArchive) -> Result<ArchiveSource> {
        if archive.header.sensor_count != 2 {
            return Err(Error::Config(format!(
                "closed-loop replay needs 2 sensors, archive has {}",
                archive.header.sensor_count
            )));
        }
        Ok(ArchiveSource { archive, next: 0 })
    }

    pub fn remaining(&self) -> u32 {
        self.archive.frame_count() - self.next
    }
}

impl FrameSource for ArchiveSource {
    fn next_frames(&mut self) -> Result<Option<[TactileFrame; 2]>> {
        if self.next >= self.archive.frame_count() {
            return Ok(None);
        }
        let t = self.next;
        self.next += 1;
        Ok(Some([self.archive.frame(t, 0)?, self.archive.frame(t, 1)?]))
    }
}

/// Wraps a plant and records every frame pair it delivers.
#[derive(Debug)]
pub struct Recorder<P> {
    inner: P,
    builder: ArchiveBuilder,
}

impl<P> Recorder<P> {
    pub fn new(inner: P, dims: Dims, format: PixelFormat) -> Result<Recorder<P>> {
        Ok(Recorder {
            inner,
            builder: ArchiveBuilder::new(dims, 2, format)?,
        })
    }

    pub fn inner(&self) -> &P {
        &self.inner
    }

    pub fn finish(self) -> (P, FrameArchive) {
        (self.inner, self.builder.finish())
    }
}

impl<P: FrameSource> FrameSource for Recorder<P> {
    fn next_frames(&mut self) -> Result<Option<[TactileFrame; 2]>> {
        let frames = self.inner.next_frames()?;
        if let Some(pair) = &frames {
            self.builder.push(pair)?;
        }
        Ok(frames)
    }
}

impl<P: Actuator> Actuator for Recorder<P> {
    fn feedback(&self) -> crate::fsm::EnvFeedback {
        self.inner.feedback()
    }

    fn apply(&mut self, gripper: &GripperCommand, motion: &MotionCommand) -> Result<()> {
        self.inner.apply(gripper, motion)
    }

    fn damaged(&self) -> Option<bool> {
        self.inner.damaged()
    }
}
