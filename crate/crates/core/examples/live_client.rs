//! A live session over TCP: starts a server in-process, connects a client,
//! calibrates, nudges the device 5 cm sideways and prints the joint states
//! and control point the server streams back.
//!
//! cargo run --example live_client
//!
//! Point it at a running `twinlink serve` instead with `-- 127.0.0.1:7400`.

use std::time::{Duration, Instant};

use twinlink::bus::schema::{self, JointStates, RawInput, WorldSnapshot};
use twinlink::bus::{Dialect, JOINT_STATES, RAW_INPUT, WORLD_STATE};
use twinlink::client::BusClient;
use twinlink::control_io::GraspInput;
use twinlink::scenario::Scenario;
use twinlink::serve::{spawn_server, ServeOptions};

fn main() -> anyhow::Result<()> {
    let (addr, server) = match std::env::args().nth(1) {
        Some(addr) => (addr, None),
        None => {
            let scenario = Scenario::load(concat!(env!("CARGO_MANIFEST_DIR"), "/data/scenarios/fast.toml"))?;
            let handle = spawn_server(scenario, "127.0.0.1:0", ServeOptions { speed: 1.0, seed: None })?;
            (handle.local_addr.to_string(), Some(handle))
        }
    };
    let mut client = BusClient::connect(&addr, "example", Dialect::B)?;
    println!("connected to {addr}: arm {}, delay {} s", client.scene.arm.name, client.scene.latency.delay);

    let input = |y: f64, calibrate: bool| RawInput {
        position: [0.0, y, 0.0],
        orientation: [1.0, 0.0, 0.0, 0.0],
        grasp: GraspInput::Trigger(0.0),
        calibrate,
    };
    let start = Instant::now();
    client.publish(RAW_INPUT, 0.0, &input(0.0, true))?;
    let mut last_print = Instant::now() - Duration::from_secs(1);
    while start.elapsed() < Duration::from_secs(3) {
        let t = start.elapsed().as_secs_f64();
        client.publish(RAW_INPUT, t, &input(if t > 0.5 { 0.05 } else { 0.0 }, false))?;
        let env = client.recv(Duration::from_secs(1))?;
        if last_print.elapsed() < Duration::from_millis(250) {
            continue;
        }
        match env.topic.as_str() {
            JOINT_STATES => {
                let js: JointStates = schema::decode(&env)?;
                let q: Vec<String> = js.position_rad.iter().map(|q| format!("{q:+.3}")).collect();
                println!("{:5.2} s  joints [{}]", env.timestamp, q.join(" "));
                last_print = Instant::now();
            }
            WORLD_STATE => {
                let w: WorldSnapshot = schema::decode(&env)?;
                let p = w.control_point.position;
                println!("{:5.2} s  control point ({:.3}, {:.3}, {:.3})", w.time, p[0], p[1], p[2]);
            }
            _ => {}
        }
    }
    if let Some(server) = server {
        server.shutdown();
    }
    Ok(())
}
