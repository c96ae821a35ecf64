//! Digital-twin world for the three-cube stacking task.
//!
//! Cubes rest on the table or on each other, a single-aperture gripper grasps
//! them at the control point, and a kinematic settle model replaces rigid
//! body physics: a released cube drops straight down and lands on the
//! highest thing under it. It stays there if the footprint overlap with that
//! support is at least half a face, and tumbles off otherwise.
//!
//! Every pick ends in exactly one outcome. A released cube that settles on a
//! valid support inside the stacking zone is a `Place`; anything else
//! (settling outside the zone, tumbling) is a `Drop`. A resting cube moved
//! more than half a side by something else is reported as a `Collapse`.

use nalgebra::{UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pose::Pose;

pub const GRAVITY: f64 = 9.81;

#[derive(Debug, Error, PartialEq)]
pub enum TwinError {
    #[error("triangle vertices {0} and {1} are closer than one cube side")]
    OverlappingVertices(usize, usize),
    #[error("invalid task config: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "cube")]
pub enum Support {
    Table,
    OnCube(usize),
    Grasped,
    Falling,
}

impl Support {
    pub fn is_resting(&self) -> bool {
        matches!(self, Support::Table | Support::OnCube(_))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Cube {
    pub id: usize,
    pub pose: Pose,
    pub side: f64,
    pub attached: bool,
    pub support: Support,
    /// Where the cube last came to rest; displacement is measured from here.
    #[serde(skip)]
    rest_position: Vector3<f64>,
    #[serde(skip)]
    fall_speed: f64,
    /// Set when a tumbling released cube already got its Drop.
    #[serde(skip)]
    outcome_logged: bool,
}

impl Cube {
    pub fn center(&self) -> Vector3<f64> {
        self.pose.position
    }

    fn top(&self) -> f64 {
        self.pose.position.z + 0.5 * self.side
    }

    fn bottom(&self) -> f64 {
        self.pose.position.z - 0.5 * self.side
    }
}

/// The marked square the tower must be built in.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StackZone {
    pub center: Vector3<f64>,
    pub half_extent: f64,
}

impl StackZone {
    /// Zone whose side is 2 cm longer than the cube's.
    pub fn for_cube(center: Vector3<f64>, cube_side: f64) -> Self {
        Self {
            center,
            half_extent: 0.5 * (cube_side + 0.02),
        }
    }

    pub fn contains_xy(&self, p: &Vector3<f64>) -> bool {
        (p.x - self.center.x).abs() <= self.half_extent
            && (p.y - self.center.y).abs() <= self.half_extent
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GripperState {
    pub aperture: f64,
    pub commanded_aperture: f64,
    /// Set while the fingers are held open by a grasped cube against a
    /// tighter command.
    pub force_capped: bool,
    pub max_aperture: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EventKind {
    Pick,
    Place,
    Drop,
    Collapse,
    TowerComplete,
    Reset,
}

impl EventKind {
    pub const ALL: [EventKind; 6] = [
        EventKind::Pick,
        EventKind::Place,
        EventKind::Drop,
        EventKind::Collapse,
        EventKind::TowerComplete,
        EventKind::Reset,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            EventKind::Pick => "Pick",
            EventKind::Place => "Place",
            EventKind::Drop => "Drop",
            EventKind::Collapse => "Collapse",
            EventKind::TowerComplete => "TowerComplete",
            EventKind::Reset => "Reset",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.as_str() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TaskEvent {
    pub kind: EventKind,
    pub cube_id: Option<usize>,
    pub timestamp: f64,
}

/// Task layout and the gripper constants of the twin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TaskConfig {
    /// Table-plane (x, y) positions of the three cubes.
    pub triangle_vertices: [[f64; 2]; 3],
    /// Table-plane (x, y) center of the stacking zone.
    pub zone_center: [f64; 2],
    pub cube_side: f64,
    pub session_duration: f64,
    pub training_duration: f64,
    pub max_aperture: f64,
    /// Finger travel speed, m/s.
    pub finger_speed: f64,
    /// Capture box edge as a multiple of the cube side.
    pub capture_box_scale: f64,
}

impl Default for TaskConfig {
    fn default() -> Self {
        Self {
            triangle_vertices: [[0.55, 0.0], [0.30, -0.20], [0.30, 0.20]],
            zone_center: [0.40, 0.0],
            cube_side: 0.05,
            session_duration: 600.0,
            training_duration: 300.0,
            max_aperture: 0.08,
            finger_speed: 0.2,
            capture_box_scale: 1.5,
        }
    }
}

impl TaskConfig {
    /// Isosceles layout: apex at `front` on the x axis, the other two
    /// vertices 0.25 m closer to the base and 0.20 m to either side.
    pub fn isosceles(front: f64, zone_center: [f64; 2]) -> Self {
        Self {
            triangle_vertices: [[front, 0.0], [front - 0.25, -0.20], [front - 0.25, 0.20]],
            zone_center,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), TwinError> {
        let bad = |m: &str| Err(TwinError::Config(m.to_string()));
        if !(self.cube_side > 0.0) {
            return bad("cube_side must be > 0");
        }
        if !(self.session_duration > 0.0 && self.training_duration > 0.0) {
            return bad("durations must be > 0");
        }
        if !(self.max_aperture > self.cube_side) {
            return bad("max_aperture must exceed the cube side");
        }
        if !(self.finger_speed > 0.0 && self.capture_box_scale > 0.0) {
            return bad("finger_speed and capture_box_scale must be > 0");
        }
        let v = &self.triangle_vertices;
        for i in 0..3 {
            for j in (i + 1)..3 {
                let d = ((v[i][0] - v[j][0]).powi(2) + (v[i][1] - v[j][1]).powi(2)).sqrt();
                if d < self.cube_side {
                    return Err(TwinError::OverlappingVertices(i, j));
                }
            }
        }
        Ok(())
    }

    pub fn zone(&self) -> StackZone {
        StackZone::for_cube(
            Vector3::new(self.zone_center[0], self.zone_center[1], 0.0),
            self.cube_side,
        )
    }

    pub fn spawn_pose(&self, i: usize) -> Pose {
        let [x, y] = self.triangle_vertices[i];
        Pose::from_translation(x, y, 0.5 * self.cube_side)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WorldState {
    pub time: f64,
    pub cubes: Vec<Cube>,
    pub zone: StackZone,
    pub gripper: GripperState,
    #[serde(skip)]
    pub events: Vec<TaskEvent>,
    #[serde(skip)]
    config: TaskConfig,
    #[serde(skip)]
    control_point: Pose,
    /// Cube released by the gripper whose outcome is not decided yet.
    #[serde(skip)]
    pending_release: Option<usize>,
    /// Cube pose relative to the control point while grasped.
    #[serde(skip)]
    grasp_offset: Option<Pose>,
    #[serde(skip)]
    tower_reported: bool,
}

/// Footprint overlap of two axis-aligned squares of equal side, as a
/// fraction of one face.
pub fn footprint_overlap(a: &Vector3<f64>, b: &Vector3<f64>, side: f64) -> f64 {
    let ox = (side - (a.x - b.x).abs()).max(0.0);
    let oy = (side - (a.y - b.y).abs()).max(0.0);
    ox * oy / (side * side)
}

fn flatten(orientation: &UnitQuaternion<f64>) -> UnitQuaternion<f64> {
    let (_, _, yaw) = orientation.euler_angles();
    UnitQuaternion::from_euler_angles(0.0, 0.0, yaw)
}

enum Landing {
    Table,
    Cube(usize),
}

/// Spawns the three cubes on the triangle vertices with an open gripper.
pub fn spawn_task(config: &TaskConfig) -> Result<WorldState, TwinError> {
    config.validate()?;
    let mut world = WorldState {
        time: 0.0,
        cubes: Vec::new(),
        zone: config.zone(),
        gripper: GripperState {
            aperture: config.max_aperture,
            commanded_aperture: config.max_aperture,
            force_capped: false,
            max_aperture: config.max_aperture,
        },
        events: Vec::new(),
        config: config.clone(),
        control_point: Pose::identity(),
        pending_release: None,
        grasp_offset: None,
        tower_reported: false,
    };
    world.place_cubes_at_spawn();
    world.events.push(TaskEvent {
        kind: EventKind::Reset,
        cube_id: None,
        timestamp: 0.0,
    });
    Ok(world)
}

impl WorldState {
    pub fn config(&self) -> &TaskConfig {
        &self.config
    }

    pub fn control_point(&self) -> &Pose {
        &self.control_point
    }

    pub fn grasped(&self) -> Option<usize> {
        self.cubes
            .iter()
            .find(|c| c.support == Support::Grasped)
            .map(|c| c.id)
    }

    pub fn pending_release(&self) -> Option<usize> {
        self.pending_release
    }

    fn place_cubes_at_spawn(&mut self) {
        let side = self.config.cube_side;
        self.cubes = (0..3)
            .map(|id| {
                let pose = self.config.spawn_pose(id);
                Cube {
                    id,
                    pose,
                    side,
                    attached: false,
                    support: Support::Table,
                    rest_position: pose.position,
                    fall_speed: 0.0,
                    outcome_logged: false,
                }
            })
            .collect();
    }

    fn emit(&mut self, out: &mut Vec<TaskEvent>, kind: EventKind, cube_id: Option<usize>) {
        let e = TaskEvent {
            kind,
            cube_id,
            timestamp: self.time,
        };
        self.events.push(e);
        out.push(e);
    }

    /// Moves the fingers toward `commanded_aperture` for `dt` seconds with
    /// the control point at `control_point`, grasping or releasing as the
    /// aperture crosses the cube side.
    pub fn update_gripper(
        &mut self,
        commanded_aperture: f64,
        control_point: &Pose,
        dt: f64,
    ) -> Vec<TaskEvent> {
        let mut out = Vec::new();
        self.control_point = *control_point;
        let max = self.gripper.max_aperture;
        let cmd = commanded_aperture.clamp(0.0, max);
        self.gripper.commanded_aperture = cmd;
        let travel = self.config.finger_speed * dt;
        let prev = self.gripper.aperture;
        let side = self.config.cube_side;

        if let Some(held) = self.grasped() {
            if cmd <= side {
                // The held cube blocks the fingers.
                self.gripper.aperture = side;
                self.gripper.force_capped = cmd < side;
            } else {
                self.gripper.aperture = (prev + travel).min(cmd).max(side);
                self.gripper.force_capped = false;
                if self.gripper.aperture > side {
                    let cube = &mut self.cubes[held];
                    cube.support = Support::Falling;
                    cube.attached = false;
                    cube.fall_speed = 0.0;
                    self.grasp_offset = None;
                    self.pending_release = Some(held);
                }
            }
            return out;
        }

        self.gripper.force_capped = false;
        if cmd >= prev {
            self.gripper.aperture = (prev + travel).min(cmd);
            return out;
        }
        let next = (prev - travel).max(cmd);
        self.gripper.aperture = next;
        if self.pending_release.is_some() || prev < side || next > side {
            return out;
        }
        if let Some(id) = self.capture_candidate(control_point) {
            self.gripper.aperture = side;
            self.gripper.force_capped = cmd < side;
            let cube = &mut self.cubes[id];
            cube.support = Support::Grasped;
            cube.attached = true;
            self.grasp_offset = Some(control_point.inverse().compose(&cube.pose));
            self.emit(&mut out, EventKind::Pick, Some(id));
        }
        out
    }

    /// Nearest resting cube whose center lies in the capture box.
    fn capture_candidate(&self, cp: &Pose) -> Option<usize> {
        let half = 0.5 * self.config.capture_box_scale * self.config.cube_side;
        self.cubes
            .iter()
            .filter(|c| c.support.is_resting())
            .filter(|c| {
                let d = c.center() - cp.position;
                d.iter().all(|v| v.abs() <= half)
            })
            .min_by(|a, b| {
                let da = (a.center() - cp.position).norm();
                let db = (b.center() - cp.position).norm();
                da.total_cmp(&db).then(a.id.cmp(&b.id))
            })
            .map(|c| c.id)
    }

    /// Advances the settle model by `dt`.
    pub fn physics_step(&mut self, dt: f64) -> Vec<TaskEvent> {
        let mut out = Vec::new();
        self.time += dt;
        let side = self.config.cube_side;

        if let (Some(id), Some(offset)) = (self.grasped(), self.grasp_offset) {
            let mut pose = self.control_point.compose(&offset);
            pose.position.z = pose.position.z.max(0.5 * side);
            self.cubes[id].pose = pose;
        }

        self.release_unsupported();

        for id in 0..self.cubes.len() {
            if self.cubes[id].support != Support::Falling {
                continue;
            }
            let cube = &mut self.cubes[id];
            cube.fall_speed += GRAVITY * dt;
            let start_bottom = cube.bottom();
            let drop = cube.fall_speed * dt;
            let (landing, top) = self.landing_under(id, start_bottom);
            if start_bottom - drop > top {
                self.cubes[id].pose.position.z -= drop;
                continue;
            }
            self.land(id, landing, top, &mut out);
        }
        out
    }

    /// Cubes whose support has gone (picked, knocked, falling) start falling.
    fn release_unsupported(&mut self) {
        loop {
            let mut changed = false;
            for id in 0..self.cubes.len() {
                if let Support::OnCube(below) = self.cubes[id].support {
                    let b = &self.cubes[below];
                    let still = b.support.is_resting()
                        && footprint_overlap(&b.center(), &self.cubes[id].center(), b.side) > 0.0;
                    if !still {
                        let cube = &mut self.cubes[id];
                        cube.support = Support::Falling;
                        cube.fall_speed = 0.0;
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }
    }

    /// Highest surface under a falling cube whose bottom is at `bottom`.
    fn landing_under(&self, id: usize, bottom: f64) -> (Landing, f64) {
        let me = &self.cubes[id];
        let mut best = (Landing::Table, 0.0);
        for other in &self.cubes {
            if other.id == id || !other.support.is_resting() {
                continue;
            }
            if footprint_overlap(&other.center(), &me.center(), me.side) <= 0.0 {
                continue;
            }
            let top = other.top();
            if top <= bottom + 1e-9 && top > best.1 {
                best = (Landing::Cube(other.id), top);
            }
        }
        best
    }

    fn land(&mut self, id: usize, landing: Landing, top: f64, out: &mut Vec<TaskEvent>) {
        let side = self.config.cube_side;
        let released = self.pending_release == Some(id);
        match landing {
            Landing::Cube(below) => {
                let overlap =
                    footprint_overlap(&self.cubes[below].center(), &self.cubes[id].center(), side);
                if overlap < 0.5 {
                    self.tumble(id, below, top, released, out);
                    return;
                }
                self.rest(id, Support::OnCube(below), top, released, out);
            }
            Landing::Table => self.rest(id, Support::Table, 0.0, released, out),
        }
    }

    fn rest(
        &mut self,
        id: usize,
        support: Support,
        top: f64,
        released: bool,
        out: &mut Vec<TaskEvent>,
    ) {
        let side = self.config.cube_side;
        let cube = &mut self.cubes[id];
        cube.pose.position.z = top + 0.5 * side;
        cube.pose.orientation = flatten(&cube.pose.orientation);
        cube.support = support;
        cube.fall_speed = 0.0;
        let displaced = (cube.pose.position - cube.rest_position).norm() > 0.5 * side
            && !std::mem::take(&mut cube.outcome_logged);
        cube.rest_position = cube.pose.position;
        let in_zone = self.zone.contains_xy(&self.cubes[id].center());
        if released {
            self.pending_release = None;
            let kind = if in_zone { EventKind::Place } else { EventKind::Drop };
            self.emit(out, kind, Some(id));
        } else if displaced {
            self.emit(out, EventKind::Collapse, Some(id));
        }
    }

    /// The cube hit the edge of `below` and slides off; a stacked `below`
    /// is knocked out of place.
    fn tumble(
        &mut self,
        id: usize,
        below: usize,
        top: f64,
        released: bool,
        out: &mut Vec<TaskEvent>,
    ) {
        let side = self.config.cube_side;
        let base = self.cubes[below].center();
        let mine = self.cubes[id].center();
        let d = mine - base;
        // Dominant horizontal axis decides which way things fall apart.
        let (axis, sign) = if d.x.abs() >= d.y.abs() {
            (0, if d.x >= 0.0 { 1.0 } else { -1.0 })
        } else {
            (1, if d.y >= 0.0 { 1.0 } else { -1.0 })
        };
        if released {
            self.pending_release = None;
            self.emit(out, EventKind::Drop, Some(id));
        }
        {
            let cube = &mut self.cubes[id];
            cube.pose.position[axis] = base[axis] + sign * side * 1.001;
            cube.pose.position.z = top + 0.5 * side;
            cube.support = Support::Falling;
            cube.fall_speed = 0.0;
            cube.outcome_logged |= released;
        }
        if matches!(self.cubes[below].support, Support::OnCube(_)) {
            let knocked = &mut self.cubes[below];
            knocked.pose.position[axis] -= sign * side;
            knocked.support = Support::Falling;
            knocked.fall_speed = 0.0;
        }
    }

    /// Whether the three cubes currently form a tower on the zone; emits
    /// `TowerComplete` the first time a given tower is seen.
    pub fn detect_tower(&mut self) -> (bool, Option<TaskEvent>) {
        let complete = self.tower_chain().is_some();
        if !complete {
            self.tower_reported = false;
            return (false, None);
        }
        if self.tower_reported {
            return (true, None);
        }
        self.tower_reported = true;
        let mut out = Vec::new();
        self.emit(&mut out, EventKind::TowerComplete, None);
        (true, out.pop())
    }

    /// Bottom-to-top ids of a complete tower, if there is one.
    pub fn tower_chain(&self) -> Option<[usize; 3]> {
        let bottom = self.cubes.iter().find(|c| {
            c.support == Support::Table && self.zone.contains_xy(&c.center())
        })?;
        let on = |id: usize| {
            self.cubes
                .iter()
                .find(|c| c.support == Support::OnCube(id))
                .map(|c| c.id)
        };
        let middle = on(bottom.id)?;
        let top = on(middle)?;
        Some([bottom.id, middle, top])
    }

    /// Returns the cubes to the triangle, opens the gripper and logs a
    /// `Reset`. Event history is kept.
    pub fn reset_task(&mut self) -> TaskEvent {
        self.place_cubes_at_spawn();
        self.gripper.aperture = self.gripper.max_aperture;
        self.gripper.commanded_aperture = self.gripper.max_aperture;
        self.gripper.force_capped = false;
        self.pending_release = None;
        self.grasp_offset = None;
        self.tower_reported = false;
        let mut out = Vec::new();
        self.emit(&mut out, EventKind::Reset, None);
        out[0]
    }
}
