//! Seven-state grasp modulation machine.
//!
//! ```text
//! S1 build empty references ──► S2 close until both sensors touch
//!        ──► S3 build holding references ──► S4 task motion ──► Done
//!                    ▲                           │ slip on either sensor
//!                    │                           ▼
//!   S7 double k_s ◄── S6 tighten ◄── S5 reverse to segment start
//! ```
//!
//! Detection runs only in S2 (touch) and S4 (slip). The detection threshold
//! obeys `tau_d = k_s * tau_d_ini` with `k_s = 2^slips`.

use serde::{Deserialize, Serialize};

use crate::detector::{DetectionEvent, DetectionKind, Detector};
use crate::error::{Error, Result};
use crate::image::{SensorId, TactileFrame};
use crate::io::config::RunConfig;

/// Pose tolerance, in metres, when checking that reverse motion is complete.
const POSE_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FsmState {
    #[serde(rename = "S1")]
    BuildRefEmpty,
    #[serde(rename = "S2")]
    CloseUntilTouch,
    #[serde(rename = "S3")]
    BuildRefHolding,
    #[serde(rename = "S4")]
    Manipulate,
    #[serde(rename = "S5")]
    ReverseMotion,
    #[serde(rename = "S6")]
    Tighten,
    #[serde(rename = "S7")]
    UpdateThreshold,
    Done,
    Failed,
}

impl FsmState {
    pub fn is_terminal(self) -> bool {
        matches!(self, FsmState::Done | FsmState::Failed)
    }

    pub fn label(self) -> &'static str {
        match self {
            FsmState::BuildRefEmpty => "S1",
            FsmState::CloseUntilTouch => "S2",
            FsmState::BuildRefHolding => "S3",
            FsmState::Manipulate => "S4",
            FsmState::ReverseMotion => "S5",
            FsmState::Tighten => "S6",
            FsmState::UpdateThreshold => "S7",
            FsmState::Done => "Done",
            FsmState::Failed => "Failed",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Outcome {
    Success,
    ObjectLost,
    GripperExhausted,
    Timeout,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum GripperCommand {
    /// Close continuously, speed in m/s.
    CloseAtSpeed(f64),
    /// Reduce the gripper width once by this many metres.
    TightenBy(f64),
    Hold,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum MotionCommand {
    Idle,
    TaskMotion {
        direction: [f64; 3],
        speed: f64,
    },
    /// Move back along the task direction toward the saved waypoint.
    ReverseMotion,
}

/// Task motion performed in S4.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TaskMotion {
    pub direction: [f64; 3],
    pub speed: f64,
}

impl TaskMotion {
    pub fn new(direction: [f64; 3], speed: f64) -> Result<TaskMotion> {
        let norm = direction.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::Config(
                "task direction must be a non-zero vector".into(),
            ));
        }
        if !(speed > 0.0 && speed.is_finite()) {
            return Err(Error::Config(format!(
                "task speed must be positive, got {speed}"
            )));
        }
        Ok(TaskMotion {
            direction: direction.map(|v| v / norm),
            speed,
        })
    }

    /// Straight up at 1 cm/s.
    pub fn lift() -> TaskMotion {
        TaskMotion {
            direction: [0.0, 0.0, 1.0],
            speed: 0.01,
        }
    }

    /// The motion command issued in the manipulation state.
    pub fn command(&self) -> MotionCommand {
        MotionCommand::TaskMotion {
            direction: self.direction,
            speed: self.speed,
        }
    }
}

/// What the robot and world report back before each step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvFeedback {
    pub gripper_width: f64,
    /// Hand displacement along the task direction, metres.
    pub pose: f64,
    pub gripper_at_limit: bool,
    pub task_complete: bool,
    pub object_lost: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub step: u64,
    pub state: FsmState,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManipState {
    pub state: FsmState,
    pub k_s: f64,
    pub tau_d: f64,
    pub touch_latched: [bool; 2],
    pub slip_count: u32,
    pub step: u64,
    /// Pose at entry to the current S4 segment; reverse motion returns here.
    pub waypoint: Option<f64>,
    pub width_at_touch: Option<f64>,
    pub outcome: Option<Outcome>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Commands {
    pub gripper: GripperCommand,
    pub motion: MotionCommand,
}

impl Commands {
    const IDLE: Commands = Commands {
        gripper: GripperCommand::Hold,
        motion: MotionCommand::Idle,
    };
}

/// The manipulation state machine together with its two detectors.
#[derive(Debug, Clone)]
pub struct Manipulator {
    config: RunConfig,
    task: TaskMotion,
    detectors: [Detector; 2],
    state: ManipState,
    trace: Vec<TraceEntry>,
    events: Vec<DetectionEvent>,
}

impl Manipulator {
    /// `detectors` must already be calibrated (phase `BuildingReference`).
    pub fn new(config: RunConfig, task: TaskMotion, detectors: [Detector; 2]) -> Result<Self> {
        config.validate()?;
        for (i, det) in detectors.iter().enumerate() {
            if det.sensor().index() != i {
                return Err(Error::Config(format!(
                    "detector slot {i} holds sensor {}",
                    det.sensor()
                )));
            }
            if det.noise_threshold().is_none() {
                return Err(Error::Config(format!(
                    "sensor {} is not calibrated",
                    det.sensor()
                )));
            }
        }
        let mut detectors = detectors;
        for det in &mut detectors {
            det.rebuild_reference()?;
        }
        Ok(Manipulator {
            task,
            detectors,
            state: ManipState {
                state: FsmState::BuildRefEmpty,
                k_s: 1.0,
                tau_d: config.tau_d_ini,
                touch_latched: [false; 2],
                slip_count: 0,
                step: 0,
                waypoint: None,
                width_at_touch: None,
                outcome: None,
            },
            trace: vec![TraceEntry {
                step: 0,
                state: FsmState::BuildRefEmpty,
            }],
            events: Vec::new(),
            config,
        })
    }

    /// Convenience constructor from known noise thresholds.
    pub fn with_noise_thresholds(
        config: RunConfig,
        task: TaskMotion,
        tau_n: [f64; 2],
    ) -> Result<Self> {
        let det =
            |s: SensorId| Detector::with_noise_threshold(s, config.detection(), tau_n[s.index()]);
        let detectors = [det(SensorId::S1)?, det(SensorId::S2)?];
        Manipulator::new(config, task, detectors)
    }

    pub fn state(&self) -> &ManipState {
        &self.state
    }

    pub fn trace(&self) -> &[TraceEntry] {
        &self.trace
    }

    pub fn events(&self) -> &[DetectionEvent] {
        &self.events
    }

    pub fn detector(&self, sensor: SensorId) -> &Detector {
        &self.detectors[sensor.index()]
    }

    pub fn config(&self) -> &RunConfig {
        &self.config
    }

    pub fn is_finished(&self) -> bool {
        self.state.state.is_terminal()
    }

    fn go(&mut self, next: FsmState) {
        if self.state.state != next {
            self.state.state = next;
            self.trace.push(TraceEntry {
                step: self.state.step,
                state: next,
            });
        }
    }

    /// Ends the run with `outcome`. Used by runners for conditions the
    /// machine cannot observe itself, such as an exhausted frame source.
    pub fn fail(&mut self, outcome: Outcome) {
        if !self.is_finished() {
            self.state.outcome = Some(outcome);
            self.go(FsmState::Failed);
        }
    }

    /// Executes one transition given this step's frames and feedback.
    pub fn step(&mut self, frames: &[TactileFrame; 2], env: &EnvFeedback) -> Result<Commands> {
        if self.is_finished() {
            return Ok(Commands::IDLE);
        }
        self.state.step += 1;
        if env.object_lost {
            self.fail(Outcome::ObjectLost);
            return Ok(Commands::IDLE);
        }
        if self.state.step > self.config.timeout_steps {
            self.fail(Outcome::Timeout);
            return Ok(Commands::IDLE);
        }

        match self.state.state {
            FsmState::BuildRefEmpty => {
                if self.build_references(frames)? {
                    self.go(FsmState::CloseUntilTouch);
                }
                Ok(Commands::IDLE)
            }
            FsmState::CloseUntilTouch => self.close_until_touch(frames, env),
            FsmState::BuildRefHolding => {
                if self.build_references(frames)? {
                    self.state.waypoint = Some(env.pose);
                    self.go(FsmState::Manipulate);
                }
                Ok(Commands::IDLE)
            }
            FsmState::Manipulate => self.manipulate(frames, env),
            FsmState::ReverseMotion => {
                let target = self.state.waypoint.unwrap_or(0.0);
                if env.pose <= target + POSE_EPS {
                    self.go(FsmState::Tighten);
                    Ok(Commands::IDLE)
                } else {
                    Ok(Commands {
                        gripper: GripperCommand::Hold,
                        motion: MotionCommand::ReverseMotion,
                    })
                }
            }
            FsmState::Tighten => {
                self.go(FsmState::UpdateThreshold);
                Ok(Commands {
                    gripper: GripperCommand::TightenBy(self.config.tighten_delta_m),
                    motion: MotionCommand::Idle,
                })
            }
            FsmState::UpdateThreshold => {
                self.state.k_s *= 2.0;
                self.state.tau_d = self.state.k_s * self.config.tau_d_ini;
                self.state.slip_count += 1;
                for det in &mut self.detectors {
                    det.rebuild_reference()?;
                }
                self.go(FsmState::BuildRefHolding);
                Ok(Commands::IDLE)
            }
            FsmState::Done | FsmState::Failed => unreachable!(),
        }
    }

    fn build_references(&mut self, frames: &[TactileFrame; 2]) -> Result<bool> {
        let mut complete = true;
        for (det, frame) in self.detectors.iter_mut().zip(frames) {
            complete &= det.build_reference_step(frame)?;
        }
        Ok(complete)
    }

    fn close_until_touch(
        &mut self,
        frames: &[TactileFrame; 2],
        env: &EnvFeedback,
    ) -> Result<Commands> {
        for (i, (det, frame)) in self.detectors.iter_mut().zip(frames).enumerate() {
            if self.state.touch_latched[i] {
                continue;
            }
            if let Some(event) = det.detect_step(frame, self.state.tau_d)? {
                debug_assert_eq!(event.kind, DetectionKind::Touch);
                self.state.touch_latched[i] = true;
                self.events.push(event);
            }
        }
        if self.state.touch_latched == [true; 2] {
            self.state.width_at_touch = Some(env.gripper_width);
            for det in &mut self.detectors {
                det.rearm_as_slip()?;
            }
            self.go(FsmState::BuildRefHolding);
            return Ok(Commands::IDLE);
        }
        if env.gripper_at_limit {
            self.fail(Outcome::GripperExhausted);
            return Ok(Commands::IDLE);
        }
        Ok(Commands {
            gripper: GripperCommand::CloseAtSpeed(self.config.close_speed_mps),
            motion: MotionCommand::Idle,
        })
    }

    fn manipulate(&mut self, frames: &[TactileFrame; 2], env: &EnvFeedback) -> Result<Commands> {
        if env.task_complete {
            self.state.outcome = Some(Outcome::Success);
            self.go(FsmState::Done);
            return Ok(Commands::IDLE);
        }
        let mut slipped = false;
        for (det, frame) in self.detectors.iter_mut().zip(frames) {
            if let Some(event) = det.detect_step(frame, self.state.tau_d)? {
                slipped = true;
                self.events.push(event);
            }
        }
        if slipped && self.config.react_to_slip {
            if self.config.reverse_on_slip {
                self.go(FsmState::ReverseMotion);
            } else {
                self.go(FsmState::Tighten);
            }
            return Ok(Commands::IDLE);
        }
        Ok(Commands {
            gripper: GripperCommand::Hold,
            motion: self.task.command(),
        })
    }
}

/// Checks a state sequence against
/// `S1 S2 S3 (S4 S5 S6 S7 S3)* S4? (Done|Failed)`.
///
/// With `reverse_on_slip == false` the slip reaction is `S4 S6 S7 S3`.
pub fn trace_matches_grammar(states: &[FsmState], reverse_on_slip: bool) -> bool {
    use FsmState::*;
    let mut it = states.iter().copied().peekable();
    for expected in [BuildRefEmpty, CloseUntilTouch, BuildRefHolding] {
        if it.next() != Some(expected) {
            return false;
        }
    }
    let reaction: &[FsmState] = if reverse_on_slip {
        &[ReverseMotion, Tighten, UpdateThreshold, BuildRefHolding]
    } else {
        &[Tighten, UpdateThreshold, BuildRefHolding]
    };
    loop {
        match it.next() {
            Some(Done | Failed) => return it.next().is_none(),
            Some(Manipulate) => match it.peek() {
                Some(Done | Failed) => continue,
                _ => {
                    for &s in reaction {
                        if it.next() != Some(s) {
                            return false;
                        }
                    }
                }
            },
            _ => return false,
        }
    }
}
