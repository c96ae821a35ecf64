//! Independent oracles and generators shared by the integration tests and
//! the acceptance harness. Nothing here calls the code paths it checks.

#![allow(dead_code)]

use std::path::PathBuf;

use nalgebra::{DMatrix, DVector, UnitQuaternion, Vector3};
use rand::Rng;
use serde_json::Value;

use twinlink::bus::schema::{
    CubeMsg, EventMsg, GripperCmd, GripperMsg, Handshake, JointStates, Phase, PoseMsg,
    RawInput, Role, TargetPose, WorldSnapshot, ZoneMsg, PROTOCOL_VERSION,
};
use twinlink::bus::{self, Dialect, Envelope};
use twinlink::control_io::{FingerFlexion, GraspInput};
use twinlink::kinematics::{ArmModel, CollisionSphere, JointSpec, LinkPoint};
use twinlink::metrics::SessionStats;
use twinlink::motion::TaskPolicy;
use twinlink::pose::Pose;
use twinlink::scenario::Scenario;
use twinlink::twin::{EventKind, Support, TaskEvent};

pub fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data")
}

pub fn scenario(name: &str) -> Scenario {
    Scenario::load(data_dir().join("scenarios").join(name)).expect("bundled scenario loads")
}

// ---------------------------------------------------------------- kinematics

/// Planar arm in the xy plane: `lengths[i]` is the link after joint `i`,
/// all axes +z, control point at the tip.
pub fn planar_description(lengths: &[f64]) -> String {
    let mut doc = format!("name = \"planar\"\nhome = {:?}\n", vec![0.0; lengths.len()]);
    let mut prev = 0.0;
    for (i, l) in lengths.iter().enumerate() {
        doc += &format!(
            "[[joint]]\nname = \"j{i}\"\norigin = {{ xyz = [{prev:?}, 0.0, 0.0] }}\naxis = [0.0, 0.0, 1.0]\nlimits = [-3.5, 3.5]\nmax_velocity = 1.0\n"
        );
        prev = *l;
    }
    doc += &format!("[control_point]\nxyz = [{prev:?}, 0.0, 0.0]\n");
    doc
}

fn random_unit(rng: &mut impl Rng) -> Vector3<f64> {
    loop {
        let v = Vector3::from_fn(|_, _| rng.random_range(-1.0..1.0));
        let n = v.norm();
        if n > 0.1 && n <= 1.0 {
            return v / n;
        }
    }
}

pub fn random_rotation(rng: &mut impl Rng) -> UnitQuaternion<f64> {
    let axis = nalgebra::Unit::new_normalize(random_unit(rng));
    UnitQuaternion::from_axis_angle(&axis, rng.random_range(-3.1..3.1))
}

/// A random chain of `dof` revolute joints with arbitrary offsets and axes.
pub fn random_model(rng: &mut impl Rng, dof: usize) -> ArmModel {
    let joints = (0..dof)
        .map(|i| {
            let lo = rng.random_range(-3.0..-0.5);
            let hi = rng.random_range(0.5..3.0);
            JointSpec {
                name: format!("j{i}"),
                parent_offset: Pose::new(
                    Vector3::from_fn(|_, _| rng.random_range(-0.4..0.4)),
                    random_rotation(rng),
                ),
                axis: random_unit(rng),
                lower_limit: lo,
                upper_limit: hi,
                max_velocity: 1.0,
            }
        })
        .collect();
    let spheres = (1..=dof)
        .map(|link| CollisionSphere {
            link_index: link,
            local_offset: Vector3::from_fn(|_, _| rng.random_range(-0.1..0.1)),
            radius: 0.05,
        })
        .collect();
    ArmModel {
        name: "random".into(),
        joints,
        spheres,
        control_point_offset: Pose::new(
            Vector3::from_fn(|_, _| rng.random_range(-0.2..0.2)),
            random_rotation(rng),
        ),
        home_configuration: vec![0.0; dof],
    }
}

pub fn random_q(rng: &mut impl Rng, model: &ArmModel) -> Vec<f64> {
    model
        .joints
        .iter()
        .map(|j| rng.random_range(j.lower_limit..=j.upper_limit))
        .collect()
}

/// Central finite differences of a link point's world position and of the
/// link orientation (as a world-frame rotation vector).
pub fn fd_jacobian(model: &ArmModel, q: &[f64], point: &LinkPoint, h: f64) -> DMatrix<f64> {
    let n = q.len();
    let eval = |q: &[f64]| {
        let fk = model.forward_kinematics(q).unwrap();
        (fk.point_world(point), fk.links[point.link_index].orientation)
    };
    let mut jac = DMatrix::zeros(6, n);
    for j in 0..n {
        let mut qp = q.to_vec();
        let mut qm = q.to_vec();
        qp[j] += h;
        qm[j] -= h;
        let (pp, rp) = eval(&qp);
        let (pm, rm) = eval(&qm);
        let lin = (pp - pm) / (2.0 * h);
        let ang = (rp * rm.inverse()).scaled_axis() / (2.0 * h);
        for r in 0..3 {
            jac[(r, j)] = lin[r];
            jac[(3 + r, j)] = ang[r];
        }
    }
    jac
}

// -------------------------------------------------------------------- motion

/// Weighted least squares by stacking `Lᵢᵀ Jᵢ a ≈ Lᵢᵀ aᵢ` (with the
/// Cholesky factor `Mᵢ = Lᵢ Lᵢᵀ`) and solving with a dense QR factorization.
/// Needs positive definite metrics and a full-column-rank stack.
pub fn weighted_lstsq_oracle(policies: &[TaskPolicy]) -> DVector<f64> {
    let n = policies[0].jacobian.ncols();
    let rows: usize = policies.iter().map(|p| p.desired_accel.len()).sum();
    let mut a = DMatrix::zeros(rows, n);
    let mut y = DVector::zeros(rows);
    let mut r = 0;
    for p in policies {
        let k = p.desired_accel.len();
        let l = p.metric.clone().cholesky().expect("positive definite metric").l();
        let lt = l.transpose();
        a.view_mut((r, 0), (k, n)).copy_from(&(&lt * &p.jacobian));
        y.rows_mut(r, k).copy_from(&(&lt * &p.desired_accel));
        r += k;
    }
    let qr = a.qr();
    let rhs = qr.q().transpose() * y;
    qr.r().solve_upper_triangular(&rhs).expect("full column rank")
}

// ------------------------------------------------------------------- metrics

/// Counts produced by re-scanning the log for every event instead of
/// keeping running state.
#[derive(Debug, Clone, PartialEq)]
pub struct BruteCounts {
    pub picks: usize,
    pub places: usize,
    pub drops: usize,
    pub collapses: usize,
    pub towers: usize,
    pub unresolved: usize,
    pub still_in_place: usize,
    pub tower_times: Vec<f64>,
}

pub fn brute_force_counts(events: &[TaskEvent]) -> BruteCounts {
    let mut c = BruteCounts {
        picks: 0,
        places: 0,
        drops: 0,
        collapses: 0,
        towers: 0,
        unresolved: 0,
        still_in_place: 0,
        tower_times: Vec::new(),
    };
    for (i, e) in events.iter().enumerate() {
        match e.kind {
            EventKind::Pick => {
                let outcome = events[i + 1..]
                    .iter()
                    .find(|f| f.kind != EventKind::Collapse && f.kind != EventKind::TowerComplete);
                match outcome.map(|f| f.kind) {
                    Some(EventKind::Place) => {
                        c.picks += 1;
                        c.places += 1;
                    }
                    Some(EventKind::Drop) => {
                        c.picks += 1;
                        c.drops += 1;
                    }
                    _ => c.unresolved += 1,
                }
            }
            EventKind::Place => {
                let displaced = events[i + 1..]
                    .iter()
                    .take_while(|f| {
                        f.kind != EventKind::Reset
                            && !(f.kind == EventKind::Pick && f.cube_id == e.cube_id)
                    })
                    .any(|f| f.kind == EventKind::Collapse && f.cube_id == e.cube_id);
                if !displaced {
                    c.still_in_place += 1;
                }
            }
            EventKind::Collapse => c.collapses += 1,
            EventKind::TowerComplete => {
                c.towers += 1;
                let epoch = events[..i]
                    .iter()
                    .rev()
                    .find(|f| f.kind == EventKind::Reset)
                    .map_or(0.0, |f| f.timestamp);
                c.tower_times.push(e.timestamp - epoch);
            }
            EventKind::Drop | EventKind::Reset => {}
        }
    }
    c
}

/// A random log that satisfies the event-log invariants.
pub fn random_log(rng: &mut impl Rng, len: usize) -> Vec<TaskEvent> {
    let mut events = Vec::with_capacity(len);
    let mut t = 0.0;
    let mut open: Option<usize> = None;
    while events.len() < len {
        if rng.random_bool(0.8) {
            t += rng.random_range(0.0..5.0);
        }
        let cube = rng.random_range(0..3);
        let (kind, cube_id) = match (open, rng.random_range(0..10)) {
            (None, 0..=5) => {
                open = Some(cube);
                (EventKind::Pick, Some(cube))
            }
            (Some(c), 0..=4) => {
                open = None;
                (EventKind::Place, Some(c))
            }
            (Some(c), 5..=6) => {
                open = None;
                (EventKind::Drop, Some(c))
            }
            (_, 7..=8) => (EventKind::Collapse, Some(cube)),
            (_, 9) if rng.random_bool(0.5) => (EventKind::TowerComplete, None),
            _ => {
                open = None;
                (EventKind::Reset, None)
            }
        };
        events.push(TaskEvent {
            kind,
            cube_id,
            timestamp: t,
        });
    }
    events
}

// ----------------------------------------------------------------------- bus

fn random_pose_msg(rng: &mut impl Rng) -> PoseMsg {
    let p = Pose::new(
        Vector3::from_fn(|_, _| rng.random_range(-2.0..2.0)),
        random_rotation(rng),
    );
    PoseMsg::from(&p)
}

fn random_phase(rng: &mut impl Rng) -> Phase {
    [Phase::Training, Phase::Task, Phase::Finished][rng.random_range(0..3)]
}

fn random_stats(rng: &mut impl Rng) -> SessionStats {
    let picks = rng.random_range(0..20);
    let places = rng.random_range(0..=picks);
    let rate = |num: usize, den: usize| (den > 0).then(|| 100.0 * num as f64 / den as f64);
    SessionStats {
        picks,
        places,
        drops: picks - places,
        collapses: rng.random_range(0..=places),
        towers: rng.random_range(0..3),
        unresolved_picks: rng.random_range(0..2),
        placing_rate: rate(places, picks),
        dropping_rate: rate(places, picks).map(|p| 100.0 - p),
        collapse_rate: rate(places / 2, places),
        still_in_place_rate: rate(places / 2, picks),
        tower_times: (0..rng.random_range(0..3)).map(|_| rng.random_range(1.0..600.0)).collect(),
    }
}

/// One random canonical (dialect B) payload for `topic`.
pub fn random_payload(rng: &mut impl Rng, topic: &str, scene_source: &Scenario) -> Value {
    let to_value = |v: Result<Value, serde_json::Error>| v.expect("payload serializes");
    match topic {
        bus::RAW_INPUT => {
            let pose = random_pose_msg(rng);
            let grasp = if rng.random_bool(0.5) {
                GraspInput::Trigger(rng.random_range(0.0..=1.0))
            } else {
                GraspInput::Fingers(FingerFlexion {
                    thumb: rng.random_range(0.0..=1.0),
                    index: rng.random_range(0.0..=1.0),
                })
            };
            to_value(serde_json::to_value(RawInput {
                position: pose.position,
                orientation: pose.orientation,
                grasp,
                calibrate: rng.random_bool(0.2),
            }))
        }
        bus::TARGET_POSE => {
            let pose = random_pose_msg(rng);
            to_value(serde_json::to_value(TargetPose {
                position: pose.position,
                orientation: pose.orientation,
            }))
        }
        bus::JOINT_STATES => {
            let n = rng.random_range(0..8);
            to_value(serde_json::to_value(JointStates {
                name: (0..n).map(|i| format!("joint_{i}")).collect(),
                position_rad: (0..n).map(|_| rng.random_range(-3.2..3.2)).collect(),
                velocity_rad_s: (0..n).map(|_| rng.random_range(-2.0..2.0)).collect(),
            }))
        }
        bus::GRIPPER_CMD => to_value(serde_json::to_value(GripperCmd {
            aperture_fraction: rng.random_range(0.0..=1.0),
        })),
        bus::WORLD_STATE => {
            let cubes = (0..rng.random_range(0..4))
                .map(|id| {
                    let pose = random_pose_msg(rng);
                    let support = match rng.random_range(0..4) {
                        0 => Support::Table,
                        1 => Support::OnCube(rng.random_range(0..3)),
                        2 => Support::Grasped,
                        _ => Support::Falling,
                    };
                    CubeMsg {
                        id,
                        position: pose.position,
                        orientation: pose.orientation,
                        side: rng.random_range(0.01..0.1),
                        support,
                    }
                })
                .collect();
            let max_aperture = rng.random_range(0.05..0.15);
            to_value(serde_json::to_value(WorldSnapshot {
                time: rng.random_range(0.0..900.0),
                phase: random_phase(rng),
                phase_elapsed: rng.random_range(0.0..300.0),
                phase_duration: rng.random_range(1.0..600.0),
                cubes,
                zone: ZoneMsg {
                    center: [rng.random_range(0.0..1.0), rng.random_range(-0.5..0.5), 0.0],
                    half_extent: rng.random_range(0.01..0.1),
                },
                gripper: GripperMsg {
                    aperture: rng.random_range(0.0..=max_aperture),
                    commanded_aperture: rng.random_range(0.0..=max_aperture),
                    force_capped: rng.random_bool(0.3),
                    max_aperture,
                },
                control_point: random_pose_msg(rng),
            }))
        }
        bus::EVENTS => {
            let phase = random_phase(rng);
            let time = rng.random_range(0.0..900.0);
            let msg = if rng.random_bool(0.2) {
                EventMsg::session_stats(random_stats(rng), time, phase)
            } else {
                let kind = EventKind::ALL[rng.random_range(0..EventKind::ALL.len())];
                let cube_id = rng.random_bool(0.7).then(|| rng.random_range(0..3));
                EventMsg::task(
                    &TaskEvent {
                        kind,
                        cube_id,
                        timestamp: time,
                    },
                    phase,
                )
            };
            to_value(serde_json::to_value(msg))
        }
        bus::HANDSHAKE => {
            let dialect = if rng.random_bool(0.5) { Dialect::A } else { Dialect::B };
            let msg = if rng.random_bool(0.5) {
                Handshake {
                    protocol: PROTOCOL_VERSION,
                    role: Role::Client,
                    dialect,
                    scene: None,
                }
            } else {
                let mut scene = scene_source.scene();
                scene.arm.home = scene
                    .arm
                    .home
                    .iter()
                    .map(|q| q + rng.random_range(-0.01..0.01))
                    .collect();
                Handshake {
                    protocol: PROTOCOL_VERSION,
                    role: Role::Server,
                    dialect,
                    scene: Some(scene),
                }
            };
            to_value(serde_json::to_value(msg))
        }
        other => panic!("no generator for {other}"),
    }
}

/// A dialect-B envelope on `topic` with random header fields.
pub fn random_envelope(rng: &mut impl Rng, topic: &str, scene_source: &Scenario) -> Envelope {
    Envelope {
        topic: topic.to_string(),
        dialect: Dialect::B,
        publisher: format!("pub-{}", rng.random_range(0..5)),
        seq: rng.random_range(1..u64::MAX / 2),
        timestamp: rng.random_range(0.0..1e4),
        payload: random_payload(rng, topic, scene_source),
    }
}

/// Structural equality that tolerates `tol` of relative difference on
/// numbers reached through one of `loose_keys`; everything else must match
/// exactly.
pub fn values_match(a: &Value, b: &Value, loose_keys: &[&str], tol: f64, loose: bool) -> bool {
    match (a, b) {
        (Value::Object(x), Value::Object(y)) => {
            x.len() == y.len()
                && x.iter().all(|(k, va)| {
                    y.get(k).is_some_and(|vb| {
                        values_match(va, vb, loose_keys, tol, loose || loose_keys.contains(&k.as_str()))
                    })
                })
        }
        (Value::Array(x), Value::Array(y)) => {
            x.len() == y.len()
                && x.iter().zip(y).all(|(va, vb)| values_match(va, vb, loose_keys, tol, loose))
        }
        (Value::Number(x), Value::Number(y)) if loose => {
            let (x, y) = (x.as_f64().unwrap(), y.as_f64().unwrap());
            (x - y).abs() <= tol * x.abs().max(y.abs()).max(1.0)
        }
        _ => a == b,
    }
}
