//! Runs every object preset over several seeds and prints a summary table
//! with mean ± population std of duration, compression and slip count.
//!
//! ```bash
//! cargo run --release --example preset_summary -- 3
//! ```

use tactile_slip::io::config::RunConfig;
use tactile_slip::io::report::{format_table, summarize};
use tactile_slip::sim::{simulate, Scenario};

fn main() -> tactile_slip::Result<()> {
    let seeds: u64 = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(3);
    let mut reports = Vec::new();
    for scenario in Scenario::presets() {
        for seed in 0..seeds {
            let config = RunConfig {
                seed,
                ..RunConfig::default()
            };
            let report = simulate(&config, &scenario)?;
            println!(
                "{:<17} seed={seed} {:?} steps={} slips={} compression={:.2}% damaged={:?}",
                scenario.name,
                report.outcome,
                report.duration_steps,
                report.slip_count,
                report.compression_pct,
                report.damaged,
            );
            reports.push(report);
        }
    }
    println!();
    print!("{}", format_table(&summarize(&reports)?));
    Ok(())
}
