//! Regenerates the bundled scripted trajectories from their waypoint
//! scripts.
//!
//! cargo run --example author_trajectories

use std::fmt::Write as _;

use nalgebra::Vector3;
use twinlink::control_io::{format_trajectory_record, RawPoseSample};
use twinlink::scenario::Scenario;
use twinlink::script;

const DATA: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/data");

fn write(name: &str, header: &str, samples: &[RawPoseSample]) -> anyhow::Result<()> {
    let mut text = String::new();
    for line in header.lines() {
        writeln!(text, "# {line}")?;
    }
    writeln!(text, "# t x y z qw qx qy qz trigger")?;
    for s in samples {
        writeln!(text, "{}", format_trajectory_record(s))?;
    }
    let path = format!("{DATA}/trajectories/{name}");
    std::fs::write(&path, text)?;
    println!("{path}: {} samples, {:.2} s", samples.len(), samples.last().map_or(0.0, |s| s.timestamp));
    Ok(())
}

fn main() -> anyhow::Result<()> {
    let default = Scenario::load(format!("{DATA}/scenarios/default.toml"))?;
    write(
        "one_tower.traj",
        "Scripted operator for the default scenario: stacks cube 0, then 1, then 2\nin the zone. Generated by examples/author_trajectories.rs.",
        &script::one_tower(&default),
    )?;

    let adversarial = Scenario::load(format!("{DATA}/scenarios/adversarial.toml"))?;
    write(
        "adversarial.traj",
        "Drives the target 0.3 m past the side wall (y = 0.25) and holds it there\nfor 60 s. Generated by examples/author_trajectories.rs.",
        &script::push_toward(&adversarial, Vector3::new(0.45, 0.55, 0.25), 60.0),
    )?;
    Ok(())
}
