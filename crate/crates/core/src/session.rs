//! The simulation loop shared by scripted replay and the live server:
//! input mapping, the latency pipeline, motion generation and the twin.

use crate::bus::{LatencyQueue, GRIPPER_CMD, TARGET_POSE};
use crate::control_io::{InputPipeline, MappedInput, RawPoseSample};
use crate::kinematics::JointState;
use crate::pose::Pose;
use crate::scenario::Scenario;
use crate::twin::{spawn_task, EventKind, TaskEvent, WorldState};

#[derive(Debug, Clone, Copy, PartialEq)]
enum Command {
    Target(Pose),
    /// Aperture fraction, 1 = open.
    Gripper(f64),
}

/// One arm, one world, one input stream.
pub struct Session {
    scenario: Scenario,
    world: WorldState,
    joints: JointState,
    pipeline: InputPipeline,
    queue: LatencyQueue<Command>,
    target: Pose,
    aperture_fraction: f64,
}

impl Session {
    pub fn new(scenario: Scenario, seed: u64) -> anyhow::Result<Self> {
        let world = spawn_task(&scenario.task)?;
        let joints = JointState::home(&scenario.arm);
        let rest = scenario.rest_target();
        let pipeline = InputPipeline::new(rest, scenario.workspace);
        let queue = LatencyQueue::new(scenario.latency, seed)?;
        Ok(Self {
            scenario,
            world,
            joints,
            pipeline,
            queue,
            target: rest,
            aperture_fraction: 1.0,
        })
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn world(&self) -> &WorldState {
        &self.world
    }

    pub fn joints(&self) -> &JointState {
        &self.joints
    }

    /// Simulation clock, seconds.
    pub fn time(&self) -> f64 {
        self.world.time
    }

    pub fn dt(&self) -> f64 {
        self.scenario.motion.tick_dt
    }

    /// Target the arm is currently tracking (after the latency pipeline).
    pub fn active_target(&self) -> &Pose {
        &self.target
    }

    pub fn input_calibrated(&self) -> bool {
        self.pipeline.calibration().is_some()
    }

    /// Re-anchors the input stream on `sample`.
    pub fn recalibrate(&mut self, sample: &RawPoseSample) {
        self.pipeline.recalibrate(sample);
    }

    /// Maps a device sample and sends the resulting target and grip command
    /// down the latency pipeline. The first sample calibrates the stream.
    pub fn submit_sample(&mut self, sample: &RawPoseSample) -> Option<MappedInput> {
        let mapped = self.pipeline.process(sample)?;
        let now = self.time();
        self.queue.enqueue(TARGET_POSE, Command::Target(mapped.target), now);
        self.queue
            .enqueue(GRIPPER_CMD, Command::Gripper(mapped.aperture_fraction), now);
        Some(mapped)
    }

    /// Sends a grip command on its own, as a `/gripper_cmd` publisher does.
    pub fn submit_gripper(&mut self, aperture_fraction: f64) {
        let now = self.time();
        self.queue.enqueue(
            GRIPPER_CMD,
            Command::Gripper(aperture_fraction.clamp(0.0, 1.0)),
            now,
        );
    }

    /// Advances one physics tick. A completed tower is followed at once by
    /// a task reset.
    pub fn step(&mut self) -> anyhow::Result<Vec<TaskEvent>> {
        for d in self.queue.dequeue(self.time()) {
            match d.item {
                Command::Target(p) => self.target = p,
                Command::Gripper(f) => self.aperture_fraction = f,
            }
        }
        let s = &self.scenario;
        self.joints = crate::motion::step(&s.arm, &self.joints, &self.target, &s.planes, &s.motion)?;
        let cp = s.arm.forward_kinematics(&self.joints.positions)?.control_point;
        let dt = s.motion.tick_dt;
        let aperture = self.aperture_fraction * self.world.gripper.max_aperture;
        let mut events = self.world.update_gripper(aperture, &cp, dt);
        events.extend(self.world.physics_step(dt));
        if let (true, Some(tower)) = self.world.detect_tower() {
            events.push(tower);
            events.push(self.world.reset_task());
        }
        Ok(events)
    }

    /// Ends the task: logs a final `Reset`.
    pub fn finish(&mut self) -> TaskEvent {
        self.world.reset_task()
    }

    pub fn events(&self) -> &[TaskEvent] {
        &self.world.events
    }

    pub fn count(&self, kind: EventKind) -> usize {
        self.world.events.iter().filter(|e| e.kind == kind).count()
    }
}
