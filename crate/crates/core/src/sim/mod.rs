//! Physics-lite gripper, object and tactile sensor simulator.
//!
//! The world is one object held between two fingertip sensors. Closing the
//! gripper past the object's free width compresses it; the compression sets
//! both the imprint drawn on the sensor images and the holding capacity.
//! Task motion against a load larger than the capacity makes the imprint
//! slide across the sensor.

pub mod scenario;
pub mod world;

pub use scenario::{Scenario, SimObject, SimParams, PRESET_NAMES};
pub use world::SimWorld;

use crate::error::Result;
use crate::io::config::RunConfig;
use crate::run::{run_to_completion, RunReport};

/// Runs the full closed loop on a fresh world seeded from `config.seed`.
pub fn simulate(config: &RunConfig, scenario: &Scenario) -> Result<RunReport> {
    let mut world = SimWorld::new(scenario, config.seed, config.dt_s)?;
    run_to_completion(config, scenario.task, &scenario.name, &mut world)
}
