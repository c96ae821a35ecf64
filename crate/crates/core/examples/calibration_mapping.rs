//! Device input mapping: calibrate on the first sample, move the device, and
//! watch the twin target follow metre for metre until the workspace clamp stops
//! it. Also shows the finger and motor-count maps.
//!
//! cargo run --example calibration_mapping

use nalgebra::{UnitQuaternion, Vector3};
use twinlink::control_io::{
    degrees_to_motor_command, map_fingers, FingerFlexion, GraspInput, InputPipeline,
    RawPoseSample, MOTOR_RESOLUTION,
};
use twinlink::pose::Pose;
use twinlink::scenario::Scenario;

fn main() -> anyhow::Result<()> {
    let scenario = Scenario::load(concat!(env!("CARGO_MANIFEST_DIR"), "/data/scenarios/default.toml"))?;
    let rest = scenario.rest_target();
    let mut pipeline = InputPipeline::new(rest, scenario.workspace);

    // A headset controller somewhere in its own tracking frame.
    let origin = Pose::new(
        Vector3::new(1.2, -0.4, 1.1),
        UnitQuaternion::from_euler_angles(0.0, 0.0, 0.7),
    );
    let sample = |dx: f64, t: f64| RawPoseSample {
        device_pose: origin.compose(&Pose::from_translation(dx, 0.0, 0.0)),
        grasp: GraspInput::Trigger(t.min(1.0)),
        timestamp: t,
    };

    println!("rest target: {:.3?}", rest.position.as_slice());
    for (i, dx) in [0.0, 0.1, 0.2, 0.4, 0.8].into_iter().enumerate() {
        let mapped = pipeline.process(&sample(dx, i as f64 * 0.25)).expect("ordered timestamps");
        println!(
            "device +{dx:.1} m along its x  ->  target {:.3?}  aperture {:.2}",
            mapped.target.position.as_slice(),
            mapped.aperture_fraction
        );
    }

    for (thumb, index) in [(0.0, 0.0), (0.5, 0.2), (1.0, 1.0)] {
        let f = map_fingers(&FingerFlexion { thumb, index });
        println!("glove thumb {thumb:.1} index {index:.1}  ->  aperture {f:.2}");
    }
    for deg in [0.0, 90.0, 180.0, 359.9, 400.0] {
        println!("{deg:6.1} deg  ->  {} counts", degrees_to_motor_command(deg, MOTOR_RESOLUTION)?);
    }
    Ok(())
}
