//! Typed dialect-B payloads for every topic, and envelope validation.
//!
//! A payload is valid when it deserializes into its topic's type with no
//! unknown fields and passes that type's range checks. Dialect-A envelopes
//! are validated by translating them to dialect B first.

use std::sync::LazyLock;

use nalgebra::Vector3;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::{bridge, BridgeRule, BusError, Dialect, Envelope, LatencyConfig};
use crate::control_io::{GraspInput, Workspace};
use crate::kinematics::{ArmModel, CollisionSphere, JointSpec};
use crate::metrics::SessionStats;
use crate::pose::Pose;
use crate::twin::{EventKind, Support, TaskConfig, TaskEvent, WorldState};

pub const PROTOCOL_VERSION: u32 = 1;

static RULES: LazyLock<Vec<BridgeRule>> = LazyLock::new(bridge::standard_rules);

/// A topic payload type.
pub trait Payload: Serialize + DeserializeOwned {
    const TOPIC: &'static str;

    /// Range checks beyond what deserialization enforces.
    fn check(&self) -> Result<(), String> {
        Ok(())
    }
}

/// Checks `envelope.payload` against the schema of its topic.
pub fn validate(envelope: &Envelope) -> Result<(), BusError> {
    match envelope.topic.as_str() {
        super::RAW_INPUT => decode::<RawInput>(envelope).map(drop),
        super::TARGET_POSE => decode::<TargetPose>(envelope).map(drop),
        super::JOINT_STATES => decode::<JointStates>(envelope).map(drop),
        super::GRIPPER_CMD => decode::<GripperCmd>(envelope).map(drop),
        super::WORLD_STATE => decode::<WorldSnapshot>(envelope).map(drop),
        super::EVENTS => decode::<EventMsg>(envelope).map(drop),
        super::HANDSHAKE => decode::<Handshake>(envelope).map(drop),
        other => Err(BusError::UnknownTopic(other.to_string())),
    }
}

/// Typed payload of an envelope in either dialect.
pub fn decode<T: Payload>(envelope: &Envelope) -> Result<T, BusError> {
    let schema_err = |message: String| BusError::Schema {
        topic: envelope.topic.clone(),
        message,
    };
    if envelope.topic != T::TOPIC {
        return Err(schema_err(format!("expected topic {}", T::TOPIC)));
    }
    let translated;
    let canonical = match envelope.dialect {
        Dialect::B => envelope,
        Dialect::A => {
            translated = bridge::bridge_translate(envelope, &RULES)?;
            &translated
        }
    };
    let value: T =
        serde_json::from_value(canonical.payload.clone()).map_err(|e| schema_err(e.to_string()))?;
    value.check().map_err(schema_err)?;
    Ok(value)
}

fn check_unit(name: &str, v: f64) -> Result<(), String> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(format!("{name} must be in [0, 1], got {v}"))
    }
}

/// Position plus (w, x, y, z) orientation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoseMsg {
    pub position: [f64; 3],
    pub orientation: [f64; 4],
}

impl PoseMsg {
    fn check(&self) -> Result<(), String> {
        let n = self.orientation.iter().map(|v| v * v).sum::<f64>().sqrt();
        if (n - 1.0).abs() > 1e-6 {
            return Err(format!("orientation norm {n} is not 1"));
        }
        Ok(())
    }

    pub fn to_pose(&self) -> Pose {
        Pose::from_wxyz(Vector3::from(self.position), self.orientation)
            .expect("checked quaternion")
    }
}

impl From<&Pose> for PoseMsg {
    fn from(p: &Pose) -> Self {
        Self {
            position: p.position.into(),
            orientation: p.wxyz(),
        }
    }
}

/// `/raw_input`: one device sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawInput {
    pub position: [f64; 3],
    pub orientation: [f64; 4],
    pub grasp: GraspInput,
    /// Re-anchor the mapping on this sample ("set origin").
    #[serde(default)]
    pub calibrate: bool,
}

impl Payload for RawInput {
    const TOPIC: &'static str = super::RAW_INPUT;

    fn check(&self) -> Result<(), String> {
        PoseMsg {
            position: self.position,
            orientation: self.orientation,
        }
        .check()?;
        match self.grasp {
            GraspInput::Trigger(g) => check_unit("trigger", g),
            GraspInput::Fingers(f) => {
                check_unit("thumb", f.thumb)?;
                check_unit("index", f.index)
            }
        }
    }
}

impl RawInput {
    pub fn device_pose(&self) -> Pose {
        PoseMsg {
            position: self.position,
            orientation: self.orientation,
        }
        .to_pose()
    }
}

/// `/target_pose`: the mapped control-point target.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetPose {
    pub position: [f64; 3],
    pub orientation: [f64; 4],
}

impl Payload for TargetPose {
    const TOPIC: &'static str = super::TARGET_POSE;

    fn check(&self) -> Result<(), String> {
        PoseMsg {
            position: self.position,
            orientation: self.orientation,
        }
        .check()
    }
}

impl From<&Pose> for TargetPose {
    fn from(p: &Pose) -> Self {
        Self {
            position: p.position.into(),
            orientation: p.wxyz(),
        }
    }
}

/// `/joint_states`: positions and velocities in joint order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JointStates {
    pub name: Vec<String>,
    pub position_rad: Vec<f64>,
    pub velocity_rad_s: Vec<f64>,
}

impl Payload for JointStates {
    const TOPIC: &'static str = super::JOINT_STATES;

    fn check(&self) -> Result<(), String> {
        let n = self.name.len();
        if self.position_rad.len() != n || self.velocity_rad_s.len() != n {
            return Err("name, position_rad and velocity_rad_s differ in length".into());
        }
        Ok(())
    }
}

/// `/gripper_cmd`: requested opening, 1 = fully open.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GripperCmd {
    pub aperture_fraction: f64,
}

impl Payload for GripperCmd {
    const TOPIC: &'static str = super::GRIPPER_CMD;

    fn check(&self) -> Result<(), String> {
        check_unit("aperture_fraction", self.aperture_fraction)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Training,
    Task,
    Finished,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CubeMsg {
    pub id: usize,
    pub position: [f64; 3],
    pub orientation: [f64; 4],
    pub side: f64,
    pub support: Support,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ZoneMsg {
    pub center: [f64; 3],
    pub half_extent: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GripperMsg {
    pub aperture: f64,
    pub commanded_aperture: f64,
    pub force_capped: bool,
    pub max_aperture: f64,
}

/// `/world_state`: snapshot of the twin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorldSnapshot {
    /// Simulation clock, seconds.
    pub time: f64,
    pub phase: Phase,
    /// Seconds spent in the current phase.
    pub phase_elapsed: f64,
    pub phase_duration: f64,
    pub cubes: Vec<CubeMsg>,
    pub zone: ZoneMsg,
    pub gripper: GripperMsg,
    pub control_point: PoseMsg,
}

impl Payload for WorldSnapshot {
    const TOPIC: &'static str = super::WORLD_STATE;

    fn check(&self) -> Result<(), String> {
        for c in &self.cubes {
            PoseMsg {
                position: c.position,
                orientation: c.orientation,
            }
            .check()?;
            if !(c.side > 0.0) {
                return Err(format!("cube {} side must be > 0", c.id));
            }
        }
        let g = &self.gripper;
        if !(0.0..=g.max_aperture).contains(&g.aperture) {
            return Err("gripper aperture out of range".into());
        }
        self.control_point.check()
    }
}

impl WorldSnapshot {
    pub fn from_world(world: &WorldState, phase: Phase, phase_elapsed: f64, phase_duration: f64) -> Self {
        Self {
            time: world.time,
            phase,
            phase_elapsed,
            phase_duration,
            cubes: world
                .cubes
                .iter()
                .map(|c| CubeMsg {
                    id: c.id,
                    position: c.pose.position.into(),
                    orientation: c.pose.wxyz(),
                    side: c.side,
                    support: c.support,
                })
                .collect(),
            zone: ZoneMsg {
                center: world.zone.center.into(),
                half_extent: world.zone.half_extent,
            },
            gripper: GripperMsg {
                aperture: world.gripper.aperture,
                commanded_aperture: world.gripper.commanded_aperture,
                force_capped: world.gripper.force_capped,
                max_aperture: world.gripper.max_aperture,
            },
            control_point: world.control_point().into(),
        }
    }
}

/// Kind string of the end-of-session statistics message on `/events`.
pub const SESSION_STATS_KIND: &str = "SessionStats";

/// `/events`: a task event, or the final session statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EventMsg {
    /// An event kind name, or `SessionStats`.
    pub kind: String,
    #[serde(default)]
    pub cube_id: Option<usize>,
    pub time: f64,
    pub phase: Phase,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stats: Option<SessionStats>,
}

impl Payload for EventMsg {
    const TOPIC: &'static str = super::EVENTS;

    fn check(&self) -> Result<(), String> {
        let is_stats = self.kind == SESSION_STATS_KIND;
        if !is_stats && EventKind::parse(&self.kind).is_none() {
            return Err(format!("unknown event kind '{}'", self.kind));
        }
        if is_stats != self.stats.is_some() {
            return Err("stats must be present exactly when kind is SessionStats".into());
        }
        Ok(())
    }
}

impl EventMsg {
    pub fn task(e: &TaskEvent, phase: Phase) -> Self {
        Self {
            kind: e.kind.as_str().to_string(),
            cube_id: e.cube_id,
            time: e.timestamp,
            phase,
            stats: None,
        }
    }

    pub fn session_stats(stats: SessionStats, time: f64, phase: Phase) -> Self {
        Self {
            kind: SESSION_STATS_KIND.to_string(),
            cube_id: None,
            time,
            phase,
            stats: Some(stats),
        }
    }

    pub fn task_event(&self) -> Option<TaskEvent> {
        Some(TaskEvent {
            kind: EventKind::parse(&self.kind)?,
            cube_id: self.cube_id,
            timestamp: self.time,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Client,
    Server,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JointMsg {
    pub name: String,
    pub origin: PoseMsg,
    pub axis: [f64; 3],
    pub lower_limit: f64,
    pub upper_limit: f64,
    pub max_velocity: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SphereMsg {
    pub link_index: usize,
    pub local_offset: [f64; 3],
    pub radius: f64,
}

/// Chain parameters a client needs to run forward kinematics itself.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArmChain {
    pub name: String,
    pub joints: Vec<JointMsg>,
    pub spheres: Vec<SphereMsg>,
    pub control_point: PoseMsg,
    pub home: Vec<f64>,
}

impl ArmChain {
    /// Rebuilds the arm model, as a client does for local kinematics.
    pub fn to_model(&self) -> ArmModel {
        ArmModel {
            name: self.name.clone(),
            joints: self
                .joints
                .iter()
                .map(|j| JointSpec {
                    name: j.name.clone(),
                    parent_offset: j.origin.to_pose(),
                    axis: Vector3::from(j.axis),
                    lower_limit: j.lower_limit,
                    upper_limit: j.upper_limit,
                    max_velocity: j.max_velocity,
                })
                .collect(),
            spheres: self
                .spheres
                .iter()
                .map(|s| CollisionSphere {
                    link_index: s.link_index,
                    local_offset: Vector3::from(s.local_offset),
                    radius: s.radius,
                })
                .collect(),
            control_point_offset: self.control_point.to_pose(),
            home_configuration: self.home.clone(),
        }
    }
}

impl From<&ArmModel> for ArmChain {
    fn from(m: &ArmModel) -> Self {
        Self {
            name: m.name.clone(),
            joints: m
                .joints
                .iter()
                .map(|j| JointMsg {
                    name: j.name.clone(),
                    origin: (&j.parent_offset).into(),
                    axis: j.axis.into(),
                    lower_limit: j.lower_limit,
                    upper_limit: j.upper_limit,
                    max_velocity: j.max_velocity,
                })
                .collect(),
            spheres: m
                .spheres
                .iter()
                .map(|s| SphereMsg {
                    link_index: s.link_index,
                    local_offset: s.local_offset.into(),
                    radius: s.radius,
                })
                .collect(),
            control_point: (&m.control_point_offset).into(),
            home: m.home_configuration.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlaneMsg {
    pub normal: [f64; 3],
    pub offset: f64,
    pub margin: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Rates {
    pub physics_hz: f64,
    pub input_hz: f64,
    pub publish_hz: f64,
}

/// Scenario constants sent by the server.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scene {
    pub arm: ArmChain,
    pub task: TaskConfig,
    pub workspace: Workspace,
    pub planes: Vec<PlaneMsg>,
    pub latency: LatencyConfig,
    pub rates: Rates,
    pub rest_target: PoseMsg,
}

/// `/handshake`: first message in each direction. A client names the
/// dialect it wants to receive; the server answers with the scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Handshake {
    pub protocol: u32,
    pub role: Role,
    pub dialect: Dialect,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scene: Option<Scene>,
}

impl Payload for Handshake {
    const TOPIC: &'static str = super::HANDSHAKE;

    fn check(&self) -> Result<(), String> {
        if self.protocol != PROTOCOL_VERSION {
            return Err(format!(
                "protocol {} unsupported, expected {PROTOCOL_VERSION}",
                self.protocol
            ));
        }
        if self.role == Role::Server && self.scene.is_none() {
            return Err("server handshake must carry the scene".into());
        }
        Ok(())
    }
}
