//! Closed-loop driver: calibrates both sensors, then steps the
//! [`Manipulator`] against a frame source and an actuation sink until the
//! run finishes.

use serde::{Deserialize, Serialize};

use crate::detector::{DetectionEvent, Detector, NoiseCalibration};
use crate::error::{Error, Result};
use crate::fsm::{
    Commands, EnvFeedback, FsmState, GripperCommand, Manipulator, MotionCommand, Outcome,
    TaskMotion, TraceEntry,
};
use crate::image::{SensorId, TactileFrame};
use crate::io::config::RunConfig;

pub const REPORT_SCHEMA: &str = "tactile-slip.run-report/1";

/// Delivers one image per sensor per step.
pub trait FrameSource {
    /// `Ok(None)` once the source is exhausted.
    fn next_frames(&mut self) -> Result<Option<[TactileFrame; 2]>>;
}

/// Receives gripper and motion commands and reports the resulting state.
pub trait Actuator {
    fn feedback(&self) -> EnvFeedback;

    fn apply(&mut self, gripper: &GripperCommand, motion: &MotionCommand) -> Result<()>;

    /// Whether the object was damaged, when the backend can tell.
    fn damaged(&self) -> Option<bool> {
        None
    }
}

/// Pairs an independent frame source with an actuator.
#[derive(Debug)]
pub struct Rig<S, A> {
    pub source: S,
    pub actuator: A,
}

impl<S: FrameSource, A> FrameSource for Rig<S, A> {
    fn next_frames(&mut self) -> Result<Option<[TactileFrame; 2]>> {
        self.source.next_frames()
    }
}

impl<S, A: Actuator> Actuator for Rig<S, A> {
    fn feedback(&self) -> EnvFeedback {
        self.actuator.feedback()
    }

    fn apply(&mut self, gripper: &GripperCommand, motion: &MotionCommand) -> Result<()> {
        self.actuator.apply(gripper, motion)
    }

    fn damaged(&self) -> Option<bool> {
        self.actuator.damaged()
    }
}

/// Actuation sink that records every command and integrates the commanded
/// gripper width and hand pose kinematically.
#[derive(Debug, Clone)]
pub struct LogActuator {
    width: f64,
    pose: f64,
    dt_s: f64,
    last_speed: f64,
    log: Vec<String>,
}

impl LogActuator {
    pub fn new(initial_width: f64, dt_s: f64) -> LogActuator {
        LogActuator {
            width: initial_width,
            pose: 0.0,
            dt_s,
            last_speed: 0.0,
            log: Vec::new(),
        }
    }

    pub fn log(&self) -> &[String] {
        &self.log
    }
}

impl Actuator for LogActuator {
    fn feedback(&self) -> EnvFeedback {
        EnvFeedback {
            gripper_width: self.width,
            pose: self.pose,
            gripper_at_limit: self.width <= 0.0,
            task_complete: false,
            object_lost: false,
        }
    }

    fn apply(&mut self, gripper: &GripperCommand, motion: &MotionCommand) -> Result<()> {
        match *gripper {
            GripperCommand::CloseAtSpeed(v) => self.width = (self.width - v * self.dt_s).max(0.0),
            GripperCommand::TightenBy(d) => self.width = (self.width - d).max(0.0),
            GripperCommand::Hold => {}
        }
        match *motion {
            MotionCommand::TaskMotion { speed, .. } => {
                self.last_speed = speed;
                self.pose += speed * self.dt_s;
            }
            MotionCommand::ReverseMotion => self.pose -= self.last_speed * self.dt_s,
            MotionCommand::Idle => {}
        }
        self.log.push(format!(
            "{} gripper={:?} motion={:?} width={:.6} pose={:.6}",
            self.log.len(),
            gripper,
            motion,
            self.width,
            self.pose
        ));
        Ok(())
    }
}

/// Metrics and traces of one closed-loop run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema: String,
    /// Scenario or archive the run came from.
    pub source: String,
    pub seed: u64,
    pub outcome: Outcome,
    pub duration_steps: u64,
    pub duration_s: f64,
    /// `100 * (width_at_touch - final_width) / width_at_touch`, 0 without touch.
    pub compression_pct: f64,
    pub slip_count: u32,
    pub width_at_touch: Option<f64>,
    pub final_width: f64,
    pub final_tau_d: f64,
    pub damaged: Option<bool>,
    pub noise_thresholds: [f64; 2],
    pub state_trace: Vec<TraceEntry>,
    pub events: Vec<DetectionEvent>,
}

impl RunReport {
    pub fn states(&self) -> Vec<FsmState> {
        self.state_trace.iter().map(|e| e.state).collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> Result<RunReport> {
        let report: RunReport = serde_json::from_str(text)?;
        if report.schema != REPORT_SCHEMA {
            return Err(Error::Report(format!(
                "unsupported report schema `{}`",
                report.schema
            )));
        }
        Ok(report)
    }
}

/// Observer hook called after every FSM step with the issued commands.
pub trait StepObserver {
    fn observe(&mut self, manip: &Manipulator, frames: &[TactileFrame; 2], commands: &Commands);
}

impl StepObserver for () {
    fn observe(&mut self, _: &Manipulator, _: &[TactileFrame; 2], _: &Commands) {}
}

impl<F: FnMut(&Manipulator, &[TactileFrame; 2], &Commands)> StepObserver for F {
    fn observe(&mut self, manip: &Manipulator, frames: &[TactileFrame; 2], commands: &Commands) {
        self(manip, frames, commands)
    }
}

/// Feeds no-contact frames to both detectors until calibrated. The plant is
/// held still throughout.
pub fn calibrate<P: FrameSource + Actuator>(
    config: &RunConfig,
    plant: &mut P,
) -> Result<([Detector; 2], [NoiseCalibration; 2])> {
    let mut detectors = [
        Detector::new(SensorId::S1, config.detection())?,
        Detector::new(SensorId::S2, config.detection())?,
    ];
    let mut results: [Option<NoiseCalibration>; 2] = [None, None];
    while results.iter().any(Option::is_none) {
        let frames = plant
            .next_frames()?
            .ok_or_else(|| Error::FrameSource("exhausted during noise calibration".into()))?;
        for (i, (det, frame)) in detectors.iter_mut().zip(&frames).enumerate() {
            if let Some(cal) = det.calibrate_step(frame)? {
                results[i] = Some(cal);
            }
        }
        plant.apply(&GripperCommand::Hold, &MotionCommand::Idle)?;
    }
    let [Some(a), Some(b)] = results else {
        unreachable!()
    };
    Ok((detectors, [a, b]))
}

/// Calibrates, then runs the manipulation machine to completion.
pub fn run_to_completion<P: FrameSource + Actuator>(
    config: &RunConfig,
    task: TaskMotion,
    source_name: &str,
    plant: &mut P,
) -> Result<RunReport> {
    run_observed(config, task, source_name, plant, &mut ())
}

pub fn run_observed<P: FrameSource + Actuator, O: StepObserver>(
    config: &RunConfig,
    task: TaskMotion,
    source_name: &str,
    plant: &mut P,
    observer: &mut O,
) -> Result<RunReport> {
    config.validate()?;
    let (detectors, calibrations) = calibrate(config, plant)?;
    let mut manip = Manipulator::new(config.clone(), task, detectors)?;
    while !manip.is_finished() {
        let env = plant.feedback();
        let Some(frames) = plant.next_frames()? else {
            manip.fail(Outcome::Timeout);
            break;
        };
        let commands = manip.step(&frames, &env)?;
        observer.observe(&manip, &frames, &commands);
        plant.apply(&commands.gripper, &commands.motion)?;
    }
    Ok(report(config, source_name, &manip, plant, &calibrations))
}

fn report<A: Actuator>(
    config: &RunConfig,
    source: &str,
    manip: &Manipulator,
    plant: &A,
    calibrations: &[NoiseCalibration; 2],
) -> RunReport {
    let state = manip.state();
    let final_width = plant.feedback().gripper_width;
    let compression_pct = match state.width_at_touch {
        Some(w) if w > 0.0 => 100.0 * (w - final_width) / w,
        _ => 0.0,
    };
    RunReport {
        schema: REPORT_SCHEMA.to_string(),
        source: source.to_string(),
        seed: config.seed,
        outcome: state.outcome.unwrap_or(Outcome::Timeout),
        duration_steps: state.step,
        duration_s: state.step as f64 * config.dt_s,
        compression_pct,
        slip_count: state.slip_count,
        width_at_touch: state.width_at_touch,
        final_width,
        final_tau_d: state.tau_d,
        damaged: plant.damaged(),
        noise_thresholds: [calibrations[0].tau_n, calibrations[1].tau_n],
        state_trace: manip.trace().to_vec(),
        events: manip.events().to_vec(),
    }
}
