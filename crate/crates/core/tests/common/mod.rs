#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use tactile_slip::fsm::TaskMotion;
use tactile_slip::sim::{Scenario, SimObject, SimParams};
use tactile_slip::{Dims, ReferenceImage, SensorId, TactileFrame};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_frame(rng: &mut impl Rng, sensor: SensorId, t: u64, d: Dims) -> TactileFrame {
    let data = (0..d.samples())
        .map(|_| rng.random_range(0.0..=1.0))
        .collect();
    TactileFrame::new(sensor, t, d, data).unwrap()
}

/// `base` plus clamped Gaussian noise on every sample.
pub fn noisy_frame(
    rng: &mut impl Rng,
    sensor: SensorId,
    t: u64,
    d: Dims,
    base: f64,
    sigma: f64,
) -> TactileFrame {
    let noise = Normal::new(0.0, sigma).unwrap();
    let data = (0..d.samples())
        .map(|_| (base + noise.sample(rng)).clamp(0.0, 1.0))
        .collect();
    TactileFrame::new(sensor, t, d, data).unwrap()
}

#[allow(clippy::needless_range_loop)]
/// Naive scalar-loop version of the binary difference image.
pub fn oracle_binary(frame: &TactileFrame, reference: &ReferenceImage, tau_n: f64) -> Vec<Vec<u8>> {
    let d = frame.dims();
    let mut out = vec![vec![0u8; d.w]; d.h];
    for i in 0..d.h {
        for j in 0..d.w {
            let mut sum = 0.0;
            for c in 0..3 {
                let idx = (i * d.w + j) * 3 + c;
                let diff = frame.data()[idx] - reference.data()[idx];
                sum += if diff < 0.0 { -diff } else { diff };
            }
            let mean = sum / 3.0;
            out[i][j] = if mean < tau_n { 0 } else { 1 };
        }
    }
    out
}

pub fn oracle_change(prev: &[Vec<u8>], curr: &[Vec<u8>]) -> Vec<Vec<u8>> {
    prev.iter()
        .zip(curr)
        .map(|(a, b)| {
            a.iter()
                .zip(b)
                .map(|(x, y)| if *x == 1 && *y == 1 { 1 } else { 0 })
                .collect()
        })
        .collect()
}

pub fn oracle_ratio(change: &[Vec<u8>]) -> f64 {
    let mut ones = 0usize;
    let mut total = 0usize;
    for row in change {
        for &v in row {
            ones += usize::from(v);
            total += 1;
        }
    }
    ones as f64 / total as f64
}

/// Mean over `frames[1..]` of the largest channel-averaged difference
/// against `frames[0]`, recomputed from scratch.
pub fn oracle_noise_threshold(frames: &[TactileFrame]) -> f64 {
    let base = &frames[0];
    let d = base.dims();
    let mut total = 0.0;
    for f in &frames[1..] {
        let mut peak = 0.0f64;
        for i in 0..d.h {
            for j in 0..d.w {
                let mut sum = 0.0;
                for c in 0..3 {
                    sum += (f.get(i, j, c) - base.get(i, j, c)).abs();
                }
                peak = peak.max(sum / 3.0);
            }
        }
        total += peak;
    }
    total / (frames.len() - 1) as f64
}

/// A random but physically sensible object, sensor and task.
pub fn random_scenario(rng: &mut impl Rng, index: usize) -> Scenario {
    let mu_hold = rng.random_range(50.0..200.0);
    let object = SimObject {
        width_free: rng.random_range(0.015..0.06),
        softness: rng.random_range(250.0..1000.0),
        mu_hold,
        load_force: mu_hold * rng.random_range(0.0001..0.005),
        detach_threshold: rng.random_range(0.004..0.02),
        fragile_limit: 1.0,
        texture: rng.random_range(0.0..1.0),
        contact_radius: rng.random_range(0.25..0.45),
    };
    let params = SimParams {
        sensor_gain: [rng.random_range(0.7..1.1), rng.random_range(0.7..1.1)],
        ..SimParams::default()
    };
    Scenario {
        name: format!("random-{index}"),
        object,
        task: TaskMotion::new([0.0, 0.0, 1.0], rng.random_range(0.004..0.012)).unwrap(),
        params,
    }
}

/// Scripted plant: uniform images, contact once the gripper closes past
/// `contact_width`, and a persistent change on the chosen sensors during
/// each of the first `slips` manipulation phases. Every tighten ends one
/// injected slip.
#[derive(Debug, Clone)]
pub struct SlipInjector {
    pub dims: Dims,
    pub width: f64,
    pub pose: f64,
    pub contact_width: f64,
    pub pending_slips: u32,
    pub slip_sensors: [bool; 2],
    pub slipping: bool,
    pub pulled: u32,
    pub pull_steps: u32,
    pub dt_s: f64,
    pub t: u64,
    pub widths: Vec<f64>,
}

impl SlipInjector {
    pub fn new(slips: u32, slip_sensors: [bool; 2]) -> SlipInjector {
        SlipInjector {
            dims: Dims::new(12, 10).unwrap(),
            width: 0.05,
            pose: 0.0,
            contact_width: 0.049,
            pending_slips: slips,
            slip_sensors,
            slipping: false,
            pulled: 0,
            pull_steps: 20,
            dt_s: 1.0 / 30.0,
            t: 0,
            widths: Vec::new(),
        }
    }
}

impl tactile_slip::run::FrameSource for SlipInjector {
    fn next_frames(&mut self) -> tactile_slip::Result<Option<[TactileFrame; 2]>> {
        let base = if self.width < self.contact_width {
            0.6
        } else {
            0.3
        };
        let frame = |s: SensorId| {
            let v = if self.slipping && self.slip_sensors[s.index()] {
                0.95
            } else {
                base
            };
            TactileFrame::uniform(s, self.t, self.dims, v)
        };
        Ok(Some([frame(SensorId::S1)?, frame(SensorId::S2)?]))
    }
}

impl tactile_slip::run::Actuator for SlipInjector {
    fn feedback(&self) -> tactile_slip::fsm::EnvFeedback {
        tactile_slip::fsm::EnvFeedback {
            gripper_width: self.width,
            pose: self.pose,
            gripper_at_limit: self.width <= 0.0,
            task_complete: self.pulled >= self.pull_steps,
            object_lost: false,
        }
    }

    fn apply(
        &mut self,
        gripper: &tactile_slip::fsm::GripperCommand,
        motion: &tactile_slip::fsm::MotionCommand,
    ) -> tactile_slip::Result<()> {
        use tactile_slip::fsm::{GripperCommand, MotionCommand};
        match *gripper {
            GripperCommand::CloseAtSpeed(v) => self.width -= v * self.dt_s,
            GripperCommand::TightenBy(d) => {
                self.width -= d;
                if self.slipping {
                    self.slipping = false;
                    self.pending_slips -= 1;
                }
            }
            GripperCommand::Hold => {}
        }
        self.width = self.width.max(0.0);
        match *motion {
            MotionCommand::TaskMotion { speed, .. } => {
                self.pose += speed * self.dt_s;
                if self.pending_slips > 0 {
                    self.slipping = true;
                } else {
                    self.pulled += 1;
                }
            }
            MotionCommand::ReverseMotion => self.pose -= 0.01 * self.dt_s,
            MotionCommand::Idle => {}
        }
        self.widths.push(self.width);
        self.t += 1;
        Ok(())
    }
}

/// Small calibration and reference windows for scripted plants.
pub fn quick_config() -> tactile_slip::io::config::RunConfig {
    tactile_slip::io::config::RunConfig {
        calibration_frames: 5,
        reference_frames: 3,
        ..Default::default()
    }
}
