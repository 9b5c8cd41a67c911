//! Pulls the rough connector and prints every state change of the
//! controller along with the detection threshold in force.

use tactile_slip::fsm::Commands;
use tactile_slip::io::config::RunConfig;
use tactile_slip::run::run_observed;
use tactile_slip::sim::{Scenario, SimWorld};
use tactile_slip::{Manipulator, TactileFrame};

fn main() -> tactile_slip::Result<()> {
    let scenario = Scenario::preset("rough_connector")?;
    let config = RunConfig::default();
    let mut world = SimWorld::new(&scenario, 0, config.dt_s)?;

    let mut last = None;
    let mut print_changes = |m: &Manipulator, _: &[TactileFrame; 2], _: &Commands| {
        let s = m.state();
        if last != Some(s.state) {
            println!(
                "step {:>4}  {:<3} {:<18} slips={} tau_d={:.2}",
                s.step,
                s.state.label(),
                format!("{:?}", s.state),
                s.slip_count,
                s.tau_d
            );
            last = Some(s.state);
        }
    };
    let report = run_observed(
        &config,
        scenario.task,
        &scenario.name,
        &mut world,
        &mut print_changes,
    )?;

    println!(
        "\n{:?} after {:.1} s, {} slips, compression {:.1}%",
        report.outcome, report.duration_s, report.slip_count, report.compression_pct
    );
    Ok(())
}
