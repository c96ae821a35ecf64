//! Forward kinematics and the control-point Jacobian of a bundled arm.
//!
//! cargo run --example fk_jacobian -- [arm.toml]

use twinlink::kinematics::load_arm_file;

fn main() -> anyhow::Result<()> {
    let path = std::env::args()
        .nth(1)
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/data/arms/baxter_like.toml").into());
    let arm = load_arm_file(&path)?;
    let q = &arm.home_configuration;
    let fk = arm.forward_kinematics(q)?;
    println!("{} ({} joints, {} spheres)", arm.name, arm.dof(), arm.spheres.len());
    for (i, link) in fk.links.iter().enumerate() {
        let p = link.position;
        println!("link {i}: ({:.4}, {:.4}, {:.4})", p.x, p.y, p.z);
    }
    let cp = fk.control_point;
    let (r, p, y) = cp.orientation.euler_angles();
    println!(
        "control point: ({:.4}, {:.4}, {:.4}) rpy ({r:.3}, {p:.3}, {y:.3})",
        cp.position.x, cp.position.y, cp.position.z
    );
    let j = fk.control_point_jacobian(&arm);
    println!("jacobian (rows vx vy vz wx wy wz):");
    for r in 0..6 {
        let row: Vec<String> = (0..arm.dof()).map(|c| format!("{:7.3}", j[(r, c)])).collect();
        println!("  {}", row.join(" "));
    }
    Ok(())
}
