//! Scripted operator: builds device trajectories from twin-frame
//! waypoints, for replay runs that stand in for a human at the controls.
//!
//! The first sample is the identity device pose, so the replay pipeline
//! calibrates on it and maps it to the rest target. Later samples are the
//! device poses that map to the requested targets.

use nalgebra::Vector3;

use crate::control_io::{GraspInput, RawPoseSample};
use crate::pose::Pose;
use crate::scenario::{Scenario, INPUT_HZ};

pub struct ScriptBuilder {
    rest_inverse: Pose,
    orientation: Pose,
    position: Vector3<f64>,
    trigger: f64,
    time: f64,
    samples: Vec<RawPoseSample>,
}

impl ScriptBuilder {
    /// Starts at `rest`, gripper open, and keeps `rest`'s orientation for
    /// every waypoint.
    pub fn new(rest: Pose) -> Self {
        let mut b = Self {
            rest_inverse: rest.inverse(),
            orientation: Pose::new(Vector3::zeros(), rest.orientation),
            position: rest.position,
            trigger: 0.0,
            time: 0.0,
            samples: Vec::new(),
        };
        b.samples.push(RawPoseSample {
            device_pose: Pose::identity(),
            grasp: GraspInput::Trigger(0.0),
            timestamp: 0.0,
        });
        b
    }

    fn record(&mut self) {
        let target = Pose::new(self.position, self.orientation.orientation);
        self.samples.push(RawPoseSample {
            device_pose: self.rest_inverse.compose(&target),
            grasp: GraspInput::Trigger(self.trigger),
            timestamp: self.time,
        });
    }

    /// Minimum-jerk move to `to` over `duration` seconds.
    pub fn move_to(&mut self, to: Vector3<f64>, duration: f64) -> &mut Self {
        let from = self.position;
        let steps = (duration * INPUT_HZ).round().max(1.0) as usize;
        for k in 1..=steps {
            let s = k as f64 / steps as f64;
            let blend = s * s * s * (10.0 - 15.0 * s + 6.0 * s * s);
            self.position = from + (to - from) * blend;
            self.time += 1.0 / INPUT_HZ;
            self.record();
        }
        self
    }

    /// Holds position for `duration` seconds.
    pub fn hold(&mut self, duration: f64) -> &mut Self {
        let here = self.position;
        self.move_to(here, duration)
    }

    /// Sets the trigger (1 = squeezed) and holds for `duration` seconds.
    pub fn grip(&mut self, trigger: f64, duration: f64) -> &mut Self {
        self.trigger = trigger;
        self.hold(duration)
    }

    pub fn position(&self) -> Vector3<f64> {
        self.position
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn build(&self) -> Vec<RawPoseSample> {
        self.samples.clone()
    }
}

/// Control-point height for carrying a cube over a two-cube stack.
const TRAVEL_Z: f64 = 0.22;
/// Release this far above the resting height.
const RELEASE_GAP: f64 = 0.004;

/// Picks cube 0, 1, 2 in turn and stacks them in the zone, slowly and with
/// settling pauses.
pub fn one_tower(scenario: &Scenario) -> Vec<RawPoseSample> {
    let task = &scenario.task;
    let side = task.cube_side;
    let zone = Vector3::new(task.zone_center[0], task.zone_center[1], 0.0);
    let mut b = ScriptBuilder::new(scenario.rest_target());
    b.hold(1.0);
    for (level, id) in [0usize, 1, 2].into_iter().enumerate() {
        let [x, y] = task.triangle_vertices[id];
        let cube = Vector3::new(x, y, 0.5 * side);
        let travel = |p: Vector3<f64>| Vector3::new(p.x, p.y, TRAVEL_Z);
        let leg = (travel(cube) - travel(b.position())).norm();
        b.move_to(travel(b.position()), 1.5)
            .move_to(travel(cube), 1.0 + leg / 0.12)
            .hold(0.5)
            .move_to(cube, 2.5)
            .hold(1.5)
            .grip(1.0, 1.0)
            .move_to(travel(cube), 2.0);
        let rest_z = 0.5 * side + level as f64 * side + RELEASE_GAP;
        let leg = (travel(zone) - travel(cube)).norm();
        b.move_to(travel(zone), 1.0 + leg / 0.12)
            .hold(0.5)
            .move_to(Vector3::new(zone.x, zone.y, rest_z), 2.5)
            .hold(1.5)
            .grip(0.0, 1.0)
            .move_to(travel(zone), 1.5);
    }
    b.hold(1.0);
    b.build()
}

/// Holds the rest pose briefly, then drives the target to `goal` and keeps
/// it there until `duration` has passed.
pub fn push_toward(scenario: &Scenario, goal: Vector3<f64>, duration: f64) -> Vec<RawPoseSample> {
    let mut b = ScriptBuilder::new(scenario.rest_target());
    b.hold(0.5).move_to(goal, 1.5);
    let left = duration - b.time();
    if left > 0.0 {
        b.hold(left);
    }
    b.build()
}
