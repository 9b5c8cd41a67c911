use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::fsm::{EnvFeedback, GripperCommand, MotionCommand};
use crate::image::{Dims, SensorId, TactileFrame};
use crate::run::{Actuator, FrameSource};
use crate::sim::scenario::{Scenario, SimObject, SimParams};

/// Per-channel colour change of the gel under a full-strength imprint.
const IMPRINT_TINT: [f64; 3] = [-0.30, 0.15, 0.35];
/// Width of the imprint's soft edge, pixels.
const EDGE_PX: f64 = 0.7;
/// Spatial period of the surface texture pattern, pixels.
const TEXTURE_PERIOD_PX: f64 = 4.0;

/// Gripper, object and two-sensor renderer stepped in lockstep with the
/// controller.
#[derive(Debug, Clone)]
pub struct SimWorld {
    object: SimObject,
    params: SimParams,
    task_axis: [f64; 3],
    dt_s: f64,
    gripper_width: f64,
    hand_pose: f64,
    pull_progress: f64,
    slip_px: [f64; 2],
    last_task_speed: f64,
    damaged: bool,
    width_clamped: bool,
    t: u64,
    seed: u64,
    rng: ChaCha8Rng,
    baselines: [Vec<f64>; 2],
}

impl SimWorld {
    pub fn new(scenario: &Scenario, seed: u64, dt_s: f64) -> Result<SimWorld> {
        scenario.validate()?;
        #[allow(clippy::neg_cmp_op_on_partial_ord)]
        if !(dt_s > 0.0) {
            return Err(Error::Config(format!("dt_s must be positive, got {dt_s}")));
        }
        let params = scenario.params;
        Ok(SimWorld {
            object: scenario.object,
            task_axis: scenario.task.direction,
            dt_s,
            gripper_width: scenario.object.width_free + params.initial_gap_m,
            hand_pose: 0.0,
            pull_progress: 0.0,
            slip_px: [0.0; 2],
            last_task_speed: scenario.task.speed,
            damaged: false,
            width_clamped: false,
            t: 0,
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
            baselines: SensorId::BOTH.map(|s| gel_baseline(params.dims, s)),
            params,
        })
    }

    pub fn object(&self) -> &SimObject {
        &self.object
    }

    pub fn params(&self) -> &SimParams {
        &self.params
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn t(&self) -> u64 {
        self.t
    }

    pub fn gripper_width(&self) -> f64 {
        self.gripper_width
    }

    /// Lateral finger positions relative to the gripper centre, metres.
    pub fn finger_positions(&self) -> [f64; 2] {
        [-self.gripper_width / 2.0, self.gripper_width / 2.0]
    }

    pub fn hand_pose(&self) -> f64 {
        self.hand_pose
    }

    pub fn pull_progress(&self) -> f64 {
        self.pull_progress
    }

    pub fn slip_px(&self) -> [f64; 2] {
        self.slip_px
    }

    pub fn damaged(&self) -> bool {
        self.damaged
    }

    /// True once a command tried to close the gripper below zero width.
    pub fn width_clamped(&self) -> bool {
        self.width_clamped
    }

    pub fn set_gripper_width(&mut self, width: f64) {
        self.gripper_width = width.max(0.0);
    }

    pub fn set_slip_px(&mut self, slip: [f64; 2]) {
        self.slip_px = slip;
    }

    /// Object compression by the fingers, metres.
    pub fn compression(&self) -> f64 {
        (self.object.width_free - self.gripper_width).max(0.0)
    }

    pub fn holding_capacity(&self) -> f64 {
        self.object.mu_hold * self.compression()
    }

    pub fn task_complete(&self) -> bool {
        self.pull_progress >= self.object.detach_threshold
    }

    pub fn object_lost(&self) -> bool {
        self.slip_px
            .iter()
            .any(|s| s.abs() >= self.params.lost_limit_px)
    }

    /// Imprint strength in `[0, 1)` on `sensor`.
    fn imprint(&self, sensor: SensorId) -> f64 {
        let gain = self.params.sensor_gain[sensor.index()];
        1.0 - (-self.compression() * self.object.softness * gain).exp()
    }

    /// The rendered image without sensor noise or clamping.
    pub fn render_noise_free(&self, sensor: SensorId) -> Vec<f64> {
        let dims = self.params.dims;
        let mut data = self.baselines[sensor.index()].clone();
        let imprint = self.imprint(sensor);
        if imprint <= 0.0 {
            return data;
        }
        let peak = imprint;
        let radius = self.object.contact_radius * dims.h.min(dims.w) as f64 * imprint.sqrt();
        let center_row = (dims.h as f64 - 1.0) / 2.0 + self.slip_px[sensor.index()];
        let center_col = (dims.w as f64 - 1.0) / 2.0;
        let reach = radius + 8.0 * EDGE_PX;
        let rows = span(center_row, reach, dims.h);
        let cols = span(center_col, reach, dims.w);
        let texture = self.object.texture;
        for row in rows {
            let dy = row as f64 - center_row;
            let phase = std::f64::consts::TAU * dy / TEXTURE_PERIOD_PX;
            let modulation = 1.0 - texture * 0.5 * (1.0 + phase.sin());
            for col in cols.clone() {
                let dx = col as f64 - center_col;
                let r = (dx * dx + dy * dy).sqrt();
                let amplitude = peak * modulation / (1.0 + ((r - radius) / EDGE_PX).exp());
                let px = (row * dims.w + col) * 3;
                for (ch, tint) in IMPRINT_TINT.iter().enumerate() {
                    data[px + ch] += amplitude * tint;
                }
            }
        }
        data
    }

    /// Renders both sensors with Gaussian noise, clamped to `[0, 1]`.
    pub fn render_frames(&mut self) -> Result<[TactileFrame; 2]> {
        let noise = Normal::new(0.0, self.params.noise_sigma)
            .map_err(|e| Error::Config(format!("noise sigma: {e}")))?;
        let dims = self.params.dims;
        let mut frames = Vec::with_capacity(2);
        for sensor in SensorId::BOTH {
            let mut data = self.render_noise_free(sensor);
            for v in &mut data {
                *v = (*v + noise.sample(&mut self.rng)).clamp(0.0, 1.0);
            }
            frames.push(TactileFrame::new(sensor, self.t, dims, data)?);
        }
        let [a, b]: [TactileFrame; 2] = frames.try_into().expect("two sensors");
        Ok([a, b])
    }

    /// Advances the world by one control step.
    pub fn world_step(&mut self, grip: &GripperCommand, motion: &MotionCommand) {
        match *grip {
            GripperCommand::CloseAtSpeed(v) => self.close_by(v * self.dt_s),
            GripperCommand::TightenBy(d) => self.close_by(d),
            GripperCommand::Hold => {}
        }
        match *motion {
            MotionCommand::Idle => {}
            MotionCommand::TaskMotion { direction, speed } => {
                self.last_task_speed = speed;
                let along: f64 = direction
                    .iter()
                    .zip(&self.task_axis)
                    .map(|(a, b)| a * b)
                    .sum();
                let advance = speed * self.dt_s * along;
                self.hand_pose += advance;
                if self.compression() > 0.0 {
                    let capacity = self.holding_capacity();
                    if capacity >= self.object.load_force {
                        self.pull_progress += advance;
                    } else {
                        let deficit = self.object.load_force - capacity;
                        for slip in &mut self.slip_px {
                            *slip += self.params.slip_gain * deficit;
                        }
                    }
                }
            }
            MotionCommand::ReverseMotion => {
                self.hand_pose -= self.last_task_speed * self.dt_s;
            }
        }
        if self.compression() / self.object.width_free > self.object.fragile_limit {
            self.damaged = true;
        }
        self.t += 1;
    }

    fn close_by(&mut self, delta: f64) {
        let next = self.gripper_width - delta;
        if next < 0.0 {
            self.width_clamped = true;
        }
        self.gripper_width = next.max(0.0);
    }
}

fn span(center: f64, reach: f64, len: usize) -> std::ops::Range<usize> {
    let lo = (center - reach).floor().max(0.0) as usize;
    let hi = ((center + reach).ceil() + 1.0).clamp(0.0, len as f64) as usize;
    lo.min(len)..hi
}

/// Static gel appearance of an untouched sensor, values in `[0.3, 0.6]`.
fn gel_baseline(dims: Dims, sensor: SensorId) -> Vec<f64> {
    let phase = sensor.index() as f64 * 0.9;
    let mut data = Vec::with_capacity(dims.samples());
    for row in 0..dims.h {
        for col in 0..dims.w {
            let y = row as f64 / dims.h as f64;
            let x = col as f64 / dims.w as f64;
            for ch in 0..3 {
                let c = ch as f64;
                let wave = (std::f64::consts::TAU * (x + 0.5 * y) + phase + c).sin();
                data.push(0.45 + 0.1 * y - 0.05 * c * x + 0.05 * wave);
            }
        }
    }
    data
}

impl FrameSource for SimWorld {
    fn next_frames(&mut self) -> Result<Option<[TactileFrame; 2]>> {
        self.render_frames().map(Some)
    }
}

impl Actuator for SimWorld {
    fn feedback(&self) -> EnvFeedback {
        EnvFeedback {
            gripper_width: self.gripper_width,
            pose: self.hand_pose,
            gripper_at_limit: self.gripper_width <= 0.0,
            task_complete: self.task_complete(),
            object_lost: self.object_lost(),
        }
    }

    fn apply(&mut self, gripper: &GripperCommand, motion: &MotionCommand) -> Result<()> {
        self.world_step(gripper, motion);
        Ok(())
    }

    fn damaged(&self) -> Option<bool> {
        Some(self.damaged)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fsm::TaskMotion;
    use crate::sim::scenario::Scenario;

    fn world() -> SimWorld {
        SimWorld::new(&Scenario::preset("egg").unwrap(), 3, 1.0 / 30.0).unwrap()
    }

    #[test]
    fn baseline_in_unit_range() {
        let d = Dims::new(40, 30).unwrap();
        for s in SensorId::BOTH {
            assert!(gel_baseline(d, s).iter().all(|v| (0.3..=0.6).contains(v)));
        }
    }

    #[test]
    fn open_gripper_renders_no_imprint() {
        let w = world();
        assert!(w.gripper_width() > w.object().width_free);
        for s in SensorId::BOTH {
            assert_eq!(w.render_noise_free(s), w.baselines[s.index()]);
        }
    }

    #[test]
    fn hold_idle_changes_only_time() {
        let mut w = world();
        w.set_gripper_width(w.object().width_free - 0.002);
        let before = (
            w.gripper_width(),
            w.hand_pose(),
            w.pull_progress(),
            w.slip_px(),
            w.damaged(),
        );
        w.world_step(&GripperCommand::Hold, &MotionCommand::Idle);
        let after = (
            w.gripper_width(),
            w.hand_pose(),
            w.pull_progress(),
            w.slip_px(),
            w.damaged(),
        );
        assert_eq!(before, after);
        assert_eq!(w.t(), 1);
    }

    #[test]
    fn equal_capacity_holds_without_slip() {
        let mut w = world();
        w.set_gripper_width(w.object().width_free - 0.002);
        w.object.load_force = w.holding_capacity();
        let lift = TaskMotion::lift();
        let cmd = MotionCommand::TaskMotion {
            direction: lift.direction,
            speed: lift.speed,
        };
        w.world_step(&GripperCommand::Hold, &cmd);
        assert_eq!(w.slip_px(), [0.0, 0.0]);
        assert!(w.pull_progress() > 0.0);
    }

    #[test]
    fn deficit_advances_slip_linearly() {
        let mut w = world();
        w.set_gripper_width(w.object().width_free - 0.001);
        let deficit = 0.125;
        w.object.load_force = w.holding_capacity() + deficit;
        let lift = TaskMotion::lift();
        let cmd = MotionCommand::TaskMotion {
            direction: lift.direction,
            speed: lift.speed,
        };
        let k = 7;
        for _ in 0..k {
            w.world_step(&GripperCommand::Hold, &cmd);
        }
        let expected = k as f64 * w.params().slip_gain * deficit;
        for s in w.slip_px() {
            assert!((s - expected).abs() < 1e-12, "{s} vs {expected}");
        }
        assert_eq!(w.pull_progress(), 0.0);
    }

    #[test]
    fn tighten_past_zero_clamps_and_flags() {
        let mut w = world();
        w.world_step(&GripperCommand::TightenBy(1.0), &MotionCommand::Idle);
        assert_eq!(w.gripper_width(), 0.0);
        assert!(w.width_clamped());
        assert!(w.damaged());
    }
}
