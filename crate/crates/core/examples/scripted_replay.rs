//! Headless replay of the bundled one-tower trajectory through the whole
//! pipeline (calibration, latency, motion, twin), printing the event log
//! and the session statistics. `twinlink replay` does the same from files
//! and also writes them to disk.
//!
//! cargo run --release --example scripted_replay

use twinlink::control_io::load_trajectory;
use twinlink::metrics::session_document;
use twinlink::replay::run_replay;
use twinlink::scenario::Scenario;

fn main() -> anyhow::Result<()> {
    let data = concat!(env!("CARGO_MANIFEST_DIR"), "/data");
    let scenario = Scenario::load(format!("{data}/scenarios/default.toml"))?;
    let samples = load_trajectory(format!("{data}/trajectories/one_tower.traj"))?;
    println!("{} samples over {:.1} s", samples.len(), samples.last().map_or(0.0, |s| s.timestamp));

    let out = run_replay(&scenario, &samples, scenario.seed)?;
    print!("{}", out.event_log());
    println!("---");
    print!("{}", session_document(&out.stats));
    println!("{} ticks, {:.2} s simulated", out.manifest.ticks, out.manifest.simulated_seconds);
    Ok(())
}
