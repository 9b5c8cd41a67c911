//! Drives the controller from recorded frames instead of the simulator. The
//! actuator only logs what it is told and integrates the gripper width.

use tactile_slip::fsm::TaskMotion;
use tactile_slip::io::archive::{ArchiveSource, PixelFormat, Recorder};
use tactile_slip::io::config::RunConfig;
use tactile_slip::run::{run_to_completion, LogActuator, Rig};
use tactile_slip::sim::{Scenario, SimWorld};

fn main() -> tactile_slip::Result<()> {
    let scenario = Scenario::preset("white_grape")?;
    let config = RunConfig::default();

    let world = SimWorld::new(&scenario, 3, config.dt_s)?;
    let mut recorder = Recorder::new(world, scenario.params.dims, PixelFormat::U8Rgb)?;
    let live = run_to_completion(&config, scenario.task, "live", &mut recorder)?;
    let (_, archive) = recorder.finish();
    println!(
        "live run: {:?}, {} events, {} frames recorded",
        live.outcome,
        live.events.len(),
        archive.frame_count()
    );

    let start_width = scenario.object.width_free + scenario.params.initial_gap_m;
    let mut rig = Rig {
        source: ArchiveSource::new(archive)?,
        actuator: LogActuator::new(start_width, config.dt_s),
    };
    let replay = run_to_completion(&config, TaskMotion::lift(), "replay", &mut rig)?;

    // The log actuator never reports task completion, so the replay ends
    // when the recording runs out.
    println!(
        "replay:   {:?}, {} events",
        replay.outcome,
        replay.events.len()
    );
    for (a, b) in live.events.iter().zip(&replay.events) {
        println!(
            "  {:?} {} t={} | {:?} {} t={}",
            a.kind, a.sensor, a.t, b.kind, b.sensor, b.t
        );
    }
    let log = rig.actuator.log();
    println!(
        "actuation log: {} lines, last: {}",
        log.len(),
        log.last().map_or("", String::as_str)
    );
    Ok(())
}
