//! Closes the simulated gripper on a tomato and reports when each fingertip
//! sensor registers the touch.

use tactile_slip::fsm::{GripperCommand, MotionCommand};
use tactile_slip::io::config::RunConfig;
use tactile_slip::run::{self, Actuator, FrameSource};
use tactile_slip::sim::{Scenario, SimWorld};

fn main() -> tactile_slip::Result<()> {
    let scenario = Scenario::preset("tomato")?;
    let config = RunConfig::default();
    let mut world = SimWorld::new(&scenario, 1, config.dt_s)?;

    let (mut detectors, calibrations) = run::calibrate(&config, &mut world)?;
    for cal in &calibrations {
        println!("{}: tau_n = {:.4}", cal.sensor, cal.tau_n);
    }

    let close = GripperCommand::CloseAtSpeed(config.close_speed_mps);
    let mut touched = [false; 2];
    while !touched.iter().all(|&t| t) {
        let frames = world.next_frames()?.expect("simulator never runs dry");
        for (i, (det, frame)) in detectors.iter_mut().zip(&frames).enumerate() {
            if touched[i] {
                continue;
            }
            if let Some(event) = det.advance(frame, config.tau_d_ini)? {
                touched[i] = true;
                println!(
                    "{:?} on {} at t={} ratio={:.3} width={:.4} m compression={:.2} mm",
                    event.kind,
                    event.sensor,
                    event.t,
                    event.ratio,
                    world.gripper_width(),
                    world.compression() * 1e3,
                );
            }
        }
        if world.feedback().gripper_at_limit {
            println!("gripper closed without a touch on both sensors");
            break;
        }
        world.apply(&close, &MotionCommand::Idle)?;
    }
    Ok(())
}
