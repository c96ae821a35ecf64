//! Teleoperation digital twin: an operator's hand pose drives a simulated
//! arm through RMP-style motion generation, a kinematic block-stacking task
//! records what happens, and everything crosses a two-dialect message bus
//! with injected latency.
//!
//! The pieces, bottom up:
//!
//! * [`pose`], [`kinematics`]: rigid transforms, the serial-chain arm model,
//!   forward kinematics and Jacobians.
//! * [`motion`]: task policies, their pullback and resolution, and the
//!   per-tick integrator with safety planes and speed caps.
//! * [`control_io`]: device calibration, pose and grasp mapping, trajectory
//!   files.
//! * [`twin`]: cubes, gripper, stacking physics and task events.
//! * [`metrics`]: session and cohort statistics from event logs.
//! * [`bus`]: envelopes, framing, schemas, the dialect bridge, latency
//!   injection and the in-process hub.
//!
//! On top of those, [`scenario`] loads a run configuration, [`session`] ties
//! one operator stream to one twin, [`replay`] runs a recorded trajectory
//! headless, and [`serve`] / [`client`] put a live session on the network.

pub mod pose;
pub mod kinematics;
pub mod motion;
pub mod control_io;
pub mod twin;
pub mod metrics;
pub mod bus;

pub mod scenario;
pub mod session;
pub mod script;
pub mod replay;
pub mod serve;
pub mod client;
pub mod bench;
