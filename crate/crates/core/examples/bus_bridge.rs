//! Bus plumbing: a joint state in the canonical dialect, its dialect-A
//! translation, the exact bytes on the wire, and a latency queue holding
//! messages back for the configured delay.
//!
//! cargo run --example bus_bridge

use twinlink::bus::schema::{GripperCmd, JointStates};
use twinlink::bus::{
    bridge_translate, decode_frame, encode_frame, standard_rules, Envelope, Hub, LatencyConfig,
    LatencyQueue, GRIPPER_CMD, JOINT_STATES,
};

fn main() -> anyhow::Result<()> {
    let b = Envelope::new(
        JOINT_STATES,
        "twin",
        1,
        0.25,
        &JointStates {
            name: vec!["s0".into(), "s1".into()],
            position_rad: vec![std::f64::consts::PI, -0.5],
            velocity_rad_s: vec![0.0, 0.1],
        },
    );
    let a = bridge_translate(&b, &standard_rules())?;
    println!("dialect B: {}", serde_json::to_string(&b.payload)?);
    println!("dialect A: {}", serde_json::to_string(&a.payload)?);

    let frame = encode_frame(&a)?;
    println!("frame: {} bytes, length prefix {:02x?}", frame.len(), &frame[..4]);
    println!("decoded: {:?}", decode_frame(&frame)?);

    // In-process fan-out.
    let hub = Hub::new();
    let sub = hub.subscribe(&[JOINT_STATES]);
    hub.publish(b)?;
    println!("hub delivered seq {}", sub.try_recv().expect("published").seq);

    let mut queue = LatencyQueue::new(LatencyConfig { delay: 0.5, jitter: 0.05 }, 7)?;
    for k in 0..5 {
        let t = k as f64 * 0.1;
        let due = queue.enqueue(GRIPPER_CMD, GripperCmd { aperture_fraction: k as f64 / 4.0 }, t);
        println!("sent at {t:.2} s, due {due:.4} s");
    }
    let mut now = 0.0;
    while !queue.is_empty() {
        for d in queue.dequeue(now) {
            println!("{now:.4} s: delivered aperture {:.2} (sent {:.2})", d.item.aperture_fraction, d.sent_at);
        }
        now += 1.0 / 120.0;
    }
    Ok(())
}
