//! Runs one simulated grasp and prints its report.
//!
//! ```bash
//! cargo run --example simulate_scenario -- egg 4
//! cargo run --example simulate_scenario -- path/to/scenario.txt
//! ```
//!
//! A scenario file starts from a preset and overrides single fields:
//!
//! ```text
//! base = smooth_connector
//! load_force = 0.7
//! task_speed = 0.008
//! ```

use tactile_slip::io::config::RunConfig;
use tactile_slip::sim::{simulate, Scenario, PRESET_NAMES};

fn main() -> tactile_slip::Result<()> {
    let mut args = std::env::args().skip(1);
    let Some(which) = args.next() else {
        eprintln!("usage: simulate_scenario <preset|file> [seed]");
        eprintln!("presets: {}", PRESET_NAMES.join(", "));
        std::process::exit(2);
    };
    let seed = args.next().and_then(|s| s.parse().ok()).unwrap_or(0);
    let scenario = Scenario::resolve(&which)?;
    let report = simulate(
        &RunConfig {
            seed,
            ..RunConfig::default()
        },
        &scenario,
    )?;

    println!("{} seed {seed}: {:?}", report.source, report.outcome);
    println!(
        "  duration     {:.2} s ({} steps)",
        report.duration_s, report.duration_steps
    );
    println!("  slips        {}", report.slip_count);
    println!("  compression  {:.2}%", report.compression_pct);
    println!("  damaged      {:?}", report.damaged);
    println!("  final tau_d  {}", report.final_tau_d);
    let trace: Vec<_> = report.states().iter().map(|s| s.label()).collect();
    println!("  trace        {}", trace.join(" "));
    Ok(())
}
