//! Learning-free touch and slip detection for vision-based tactile sensors.
//!
//! Each sensor image is compared against a reference image; the
//! channel-averaged difference is binarized with a calibrated noise
//! threshold, and two consecutive binary images are intersected. A change is
//! declared when the surviving fraction of pixels reaches the detection
//! threshold. The first change is a touch, later ones are slips.
//!
//! [`fsm::Manipulator`] uses these detections to close a two-finger gripper
//! until both sensors touch, then performs a task motion and answers every
//! slip by reversing, tightening by a fixed step and doubling the detection
//! threshold. [`sim`] provides a synthetic gripper and object to run the
//! whole loop without hardware, and [`io::archive`] stores frame sequences
//! for replay.
//!
//! ```
//! use tactile_slip::io::config::RunConfig;
//! use tactile_slip::sim::{simulate, Scenario};
//!
//! let config = RunConfig { seed: 7, ..RunConfig::default() };
//! let report = simulate(&config, &Scenario::preset("glass").unwrap()).unwrap();
//! assert_eq!(report.final_tau_d, 0.01 * 2f64.powi(report.slip_count as i32));
//! ```

pub mod cli;
pub mod detector;
pub mod error;
pub mod fsm;
pub mod image;
pub mod io;
pub mod run;
pub mod sim;

pub use detector::{DetectionConfig, DetectionEvent, DetectionKind, Detector, NoiseCalibration};
pub use error::{Error, Result};
pub use fsm::{FsmState, Manipulator, Outcome};
pub use image::{BinaryImage, Dims, GrayImage, ReferenceImage, SensorId, TactileFrame};
pub use run::{run_to_completion, RunReport};
