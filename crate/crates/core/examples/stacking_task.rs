//! The block-stacking twin on its own: the control point is teleported over
//! each cube, the gripper closes and opens, and the task events are printed
//! as they happen. The third cube is deliberately released off-centre once
//! to show a tumble and the collapse it causes.
//!
//! cargo run --example stacking_task

use nalgebra::Vector3;
use twinlink::pose::Pose;
use twinlink::twin::{spawn_task, TaskConfig, WorldState};

const DT: f64 = 1.0 / 120.0;

fn run(world: &mut WorldState, at: Vector3<f64>, aperture: f64, seconds: f64) {
    let cp = Pose::from_translation(at.x, at.y, at.z);
    for _ in 0..(seconds / DT) as usize {
        let mut events = world.update_gripper(aperture, &cp, DT);
        events.extend(world.physics_step(DT));
        if let (true, Some(tower)) = world.detect_tower() {
            events.push(tower);
            events.push(world.reset_task());
        }
        for e in events {
            let cube = e.cube_id.map_or_else(|| "-".into(), |c| c.to_string());
            println!("{:7.3} s  {:<13} cube {cube}", e.timestamp, e.kind.as_str());
        }
    }
}

fn transfer(world: &mut WorldState, cube: usize, to: Vector3<f64>) {
    let open = world.gripper.max_aperture;
    run(world, world.cubes[cube].center(), open, 0.3);
    run(world, world.cubes[cube].center(), 0.0, 0.5);
    run(world, to, 0.0, 0.2);
    run(world, to, open, 0.5);
}

fn main() -> anyhow::Result<()> {
    let mut world = spawn_task(&TaskConfig::default())?;
    let side = world.config().cube_side;
    let zone = world.zone.center;
    let level = |k: f64| zone + Vector3::new(0.0, 0.0, (k + 0.5) * side + 0.002);

    transfer(&mut world, 0, level(0.0));
    transfer(&mut world, 1, level(1.0));
    // Only 40% overlap: this one tumbles and knocks the cube below.
    transfer(&mut world, 2, level(2.0) + Vector3::new(0.6 * side, 0.0, 0.0));

    world.reset_task();
    for cube in 0..3 {
        transfer(&mut world, cube, level(cube as f64));
    }
    println!("{} events logged", world.events.len());
    Ok(())
}
