//! Policy resolution by hand: builds the policy set for the Baxter-like arm
//! reaching toward a target next to a wall, prints each policy, then steps
//! the arm and reports how close its spheres get to the wall.
//!
//! cargo run --example rmp_resolve

use nalgebra::Vector3;
use twinlink::kinematics::{load_arm_file, JointState};
use twinlink::motion::{build_policies, resolve, step, MotionConfig, SafetyPlane};
use twinlink::pose::Pose;

fn main() -> anyhow::Result<()> {
    let arm = load_arm_file(concat!(env!("CARGO_MANIFEST_DIR"), "/data/arms/baxter_like.toml"))?;
    let cfg = MotionConfig::default();
    let wall = SafetyPlane::new(Vector3::new(0.0, -1.0, 0.0), -0.25, 0.05)?;
    let floor = SafetyPlane::new(Vector3::z(), 0.0, 0.05)?;
    let planes = [floor, wall];

    let home = JointState::home(&arm);
    let rest = arm.forward_kinematics(&home.positions)?.control_point;
    // 0.3 m past the wall.
    let target = Pose::new(Vector3::new(0.45, 0.55, 0.25), rest.orientation);

    let policies = build_policies(&arm, &home, &target, &planes, &cfg)?;
    println!("{} policies at home:", policies.len());
    for (i, p) in policies.iter().enumerate() {
        println!("  #{i}: task dim {}, |a| = {:.3}", p.task_dim(), p.desired_accel.norm());
    }
    let qdd = resolve(&policies)?;
    println!("resolved joint acceleration: {:.3?}", qdd.as_slice());

    let mut state = home;
    let mut closest = f64::INFINITY;
    for tick in 1..=(10.0 / cfg.tick_dt) as usize {
        state = step(&arm, &state, &target, &planes, &cfg)?;
        let fk = arm.forward_kinematics(&state.positions)?;
        for s in &arm.spheres {
            let c = fk.links[s.link_index].transform_point(&s.local_offset);
            closest = closest.min(wall.clearance(&c, s.radius));
        }
        if tick % 240 == 0 {
            let p = fk.control_point.position;
            println!(
                "t = {:4.1} s  control point ({:.3}, {:.3}, {:.3})  closest wall clearance {:+.4} m",
                tick as f64 * cfg.tick_dt,
                p.x,
                p.y,
                p.z,
                closest
            );
        }
    }
    Ok(())
}
