//! RMP-style motion generation.
//!
//! Every behaviour is a [`TaskPolicy`]: a desired acceleration in some task
//! space, the metric that weights it, and the Jacobian mapping joint
//! velocities into that space. [`resolve`] pulls all of them back into joint
//! space and solves for the metric-weighted compromise acceleration.
//! [`step`] builds the standard policy set for one tick (control-point
//! attractor, one barrier per sphere/plane pair, joint-limit barriers and a
//! light joint-space damper) and integrates it.

mod policies;

pub use policies::{
    attractor_policy, barrier_weight, cspace_damping_policy, jointlimit_policy, plane_policy,
};

use nalgebra::{DMatrix, DVector, SymmetricEigen, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kinematics::{ArmModel, JointState, KinematicsError, LinkPoint};
use crate::pose::Pose;

/// Eigenvalues of the normal matrix below this fraction of the largest one
/// are truncated.
pub const PINV_RELATIVE_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MotionError {
    #[error("no policies to resolve")]
    NoPolicies,
    #[error("policy {index} acts on {got} joints, expected {expected}")]
    ColumnMismatch {
        index: usize,
        expected: usize,
        got: usize,
    },
    #[error("policy {index} has inconsistent task dimensions")]
    TaskShape { index: usize },
    #[error("invalid motion config: {0}")]
    Config(String),
    #[error("joint state has {got} entries, model has {expected} joints")]
    StateDimension { expected: usize, got: usize },
    #[error(transparent)]
    Kinematics(#[from] KinematicsError),
}

/// A second-order policy `(desired_accel, metric)` living in a task space
/// with Jacobian `jacobian` (task_dim × n).
#[derive(Debug, Clone, PartialEq)]
pub struct TaskPolicy {
    pub jacobian: DMatrix<f64>,
    pub desired_accel: DVector<f64>,
    pub metric: DMatrix<f64>,
}

impl TaskPolicy {
    pub fn task_dim(&self) -> usize {
        self.desired_accel.len()
    }

    pub fn columns(&self) -> usize {
        self.jacobian.ncols()
    }

    /// Re-expresses the policy through an inner map: if this policy lives on
    /// `y` and `y` moves with `inner` (its Jacobian w.r.t. `x`), the result
    /// is the same policy seen from `x`.
    pub fn pullback(&self, inner: &DMatrix<f64>) -> TaskPolicy {
        TaskPolicy {
            jacobian: &self.jacobian * inner,
            desired_accel: self.desired_accel.clone(),
            metric: self.metric.clone(),
        }
    }

    /// True when the metric is symmetric and positive semi-definite within
    /// `1e-9`.
    pub fn metric_is_valid(&self) -> bool {
        let m = &self.metric;
        if m.nrows() != m.ncols() || m.nrows() != self.task_dim() {
            return false;
        }
        if (m - m.transpose()).abs().max() > 1e-9 {
            return false;
        }
        if m.nrows() == 0 {
            return true;
        }
        SymmetricEigen::new(m.clone())
            .eigenvalues
            .iter()
            .all(|&l| l >= -1e-9)
    }

    /// True when the policy contributes nothing.
    pub fn is_inert(&self) -> bool {
        self.metric.iter().all(|&v| v == 0.0)
    }
}

/// Combines policies into one joint acceleration:
/// `a = (Σ JᵢᵀMᵢJᵢ)⁺ Σ JᵢᵀMᵢaᵢ`, with a truncated pseudo-inverse.
///
/// The normal matrix is never formed. Each metric is factored as
/// `Mᵢ = WᵢᵀWᵢ` and the whitened rows `WᵢJᵢ a ≈ Wᵢaᵢ` are stacked and solved
/// by SVD, which keeps the error proportional to the condition number of
/// the stacked system instead of its square.
pub fn resolve(policies: &[TaskPolicy]) -> Result<DVector<f64>, MotionError> {
    let first = policies.first().ok_or(MotionError::NoPolicies)?;
    let n = first.columns();
    let mut rows: Vec<(DMatrix<f64>, DVector<f64>)> = Vec::with_capacity(policies.len());
    for (index, p) in policies.iter().enumerate() {
        if p.columns() != n {
            return Err(MotionError::ColumnMismatch {
                index,
                expected: n,
                got: p.columns(),
            });
        }
        let k = p.task_dim();
        if p.jacobian.nrows() != k || p.metric.nrows() != k || p.metric.ncols() != k {
            return Err(MotionError::TaskShape { index });
        }
        if k == 0 || p.is_inert() {
            continue;
        }
        let w = metric_sqrt(&p.metric);
        rows.push((&w * &p.jacobian, w * &p.desired_accel));
    }
    let total: usize = rows.iter().map(|(a, _)| a.nrows()).sum();
    if n == 0 || total == 0 {
        return Ok(DVector::zeros(n));
    }
    let mut a = DMatrix::<f64>::zeros(total, n);
    let mut y = DVector::<f64>::zeros(total);
    let mut r = 0;
    for (block, rhs) in &rows {
        let k = block.nrows();
        a.view_mut((r, 0), (k, n)).copy_from(block);
        y.rows_mut(r, k).copy_from(rhs);
        r += k;
    }
    Ok(truncated_lstsq(a, &y))
}

/// `W` with `WᵀW = M` for a symmetric positive semi-definite `M`; round-off
/// negative eigenvalues count as zero.
fn metric_sqrt(metric: &DMatrix<f64>) -> DMatrix<f64> {
    let sym = (metric + metric.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let mut w = eig.eigenvectors.transpose();
    for (i, &lambda) in eig.eigenvalues.iter().enumerate() {
        w.row_mut(i).scale_mut(lambda.max(0.0).sqrt());
    }
    w
}

/// Minimum-norm least squares `A⁺y`. Singular values below
/// `sqrt(PINV_RELATIVE_TOLERANCE)` of the largest are dropped, which is the
/// same as truncating eigenvalues of `AᵀA` at `PINV_RELATIVE_TOLERANCE`.
fn truncated_lstsq(a: DMatrix<f64>, y: &DVector<f64>) -> DVector<f64> {
    let n = a.ncols();
    let svd = a.clone().svd(true, true);
    let (u, v_t) = (svd.u.expect("requested"), svd.v_t.expect("requested"));
    let sigma_max = svd.singular_values.max();
    if sigma_max == 0.0 {
        return DVector::zeros(n);
    }
    let cutoff = PINV_RELATIVE_TOLERANCE.sqrt() * sigma_max;
    let kept: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&i| svd.singular_values[i] > cutoff)
        .collect();
    let mut x = DVector::zeros(n);
    for &i in &kept {
        let coeff = u.column(i).dot(y) / svd.singular_values[i];
        x.axpy(coeff, &v_t.row(i).transpose(), 1.0);
    }
    // The iterative SVD converges only to ~1e-13; two refinement passes on
    // the normal-equation residual, restricted to the kept subspace, recover
    // the remaining digits.
    for _ in 0..2 {
        let g = a.tr_mul(&(y - &a * &x));
        for &i in &kept {
            let v = v_t.row(i).transpose();
            let sigma = svd.singular_values[i];
            x.axpy(v.dot(&g) / (sigma * sigma), &v, 1.0);
        }
    }
    x
}

/// Half-space the arm's collision spheres must stay on the positive side of.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SafetyPlane {
    /// Unit normal pointing into the allowed region.
    pub normal: Vector3<f64>,
    /// The plane is `{x : normal · x = offset}`.
    pub offset: f64,
    /// Width of the influence zone in front of the plane.
    pub margin: f64,
}

impl SafetyPlane {
    pub fn new(normal: Vector3<f64>, offset: f64, margin: f64) -> Result<Self, MotionError> {
        if (normal.norm() - 1.0).abs() > 1e-9 {
            return Err(MotionError::Config(format!(
                "safety plane normal has norm {}",
                normal.norm()
            )));
        }
        if !(margin >= 0.0) {
            return Err(MotionError::Config("safety plane margin must be >= 0".into()));
        }
        Ok(Self {
            normal,
            offset,
            margin,
        })
    }

    /// Signed clearance of a sphere; negative means penetration.
    pub fn clearance(&self, center: &Vector3<f64>, radius: f64) -> f64 {
        self.normal.dot(center) - self.offset - radius
    }
}

/// Gains and integration settings. Units are SI; angles in radians.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MotionConfig {
    /// Attractor stiffness, 1/s².
    pub attractor_gain: f64,
    /// Attractor damping, 1/s.
    pub attractor_damping: f64,
    /// Peak repulsive acceleration at contact, m/s².
    pub repulsion_gain: f64,
    /// Scales the plane-barrier metric: weight = w(d) / lengthscale².
    pub repulsion_lengthscale: f64,
    /// Extra braking applied while a sphere approaches a plane, 1/s.
    pub repulsion_damping: f64,
    /// Peak joint-limit repulsion, rad/s².
    pub jointlimit_gain: f64,
    /// Width of the joint-limit influence zone, rad.
    pub jointlimit_margin: f64,
    pub jointlimit_weight: f64,
    /// Joint-space damping that keeps redundant motion from drifting, 1/s.
    pub cspace_damping: f64,
    pub cspace_weight: f64,
    /// Per-joint velocity cap, rad/s.
    pub speed_cap: f64,
    /// Integration step, s.
    pub tick_dt: f64,
}

impl Default for MotionConfig {
    fn default() -> Self {
        Self {
            attractor_gain: 30.0,
            attractor_damping: 11.0,
            repulsion_gain: 25.0,
            repulsion_lengthscale: 0.1,
            repulsion_damping: 10.0,
            jointlimit_gain: 20.0,
            jointlimit_margin: 0.15,
            jointlimit_weight: 10.0,
            cspace_damping: 4.0,
            cspace_weight: 0.01,
            speed_cap: 1.5,
            tick_dt: 1.0 / 120.0,
        }
    }
}

impl MotionConfig {
    pub fn validate(&self) -> Result<(), MotionError> {
        let gains = [
            ("attractor_gain", self.attractor_gain),
            ("attractor_damping", self.attractor_damping),
            ("repulsion_gain", self.repulsion_gain),
            ("repulsion_damping", self.repulsion_damping),
            ("jointlimit_gain", self.jointlimit_gain),
            ("jointlimit_margin", self.jointlimit_margin),
            ("jointlimit_weight", self.jointlimit_weight),
            ("cspace_damping", self.cspace_damping),
            ("cspace_weight", self.cspace_weight),
        ];
        for (name, v) in gains {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(MotionError::Config(format!("{name} must be finite and >= 0")));
            }
        }
        for (name, v) in [
            ("repulsion_lengthscale", self.repulsion_lengthscale),
            ("speed_cap", self.speed_cap),
            ("tick_dt", self.tick_dt),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(MotionError::Config(format!("{name} must be finite and > 0")));
            }
        }
        Ok(())
    }
}

/// Builds every policy active at `state` for the given target.
pub fn build_policies(
    model: &ArmModel,
    state: &JointState,
    target: &Pose,
    planes: &[SafetyPlane],
    cfg: &MotionConfig,
) -> Result<Vec<TaskPolicy>, MotionError> {
    let n = model.dof();
    if state.positions.len() != n || state.velocities.len() != n {
        return Err(MotionError::StateDimension {
            expected: n,
            got: state.positions.len().min(state.velocities.len()),
        });
    }
    let fk = model.forward_kinematics(&state.positions)?;
    let qdot = DVector::from_column_slice(&state.velocities);

    let j_cp = fk.control_point_jacobian(model);
    let cp_vel = &j_cp * &qdot;
    let cp_vel6: [f64; 6] = std::array::from_fn(|i| cp_vel[i]);
    let mut policies =
        vec![attractor_policy(&fk.control_point, &cp_vel6, target, cfg).pullback(&j_cp)];

    for sphere in &model.spheres {
        if sphere.link_index == 0 {
            // Base spheres cannot move; their policies would be inert.
            continue;
        }
        let point = LinkPoint {
            link_index: sphere.link_index,
            local_offset: sphere.local_offset,
        };
        let jac = fk.jacobian(model, &point);
        let j_lin = jac.rows(0, 3).into_owned();
        let center = fk.point_world(&point);
        let vel = &j_lin * &qdot;
        let vel = Vector3::new(vel[0], vel[1], vel[2]);
        for plane in planes {
            let p = plane_policy(&center, &vel, sphere.radius, plane, cfg);
            if !p.is_inert() {
                policies.push(p.pullback(&j_lin));
            }
        }
    }

    let jl = jointlimit_policy(&state.positions, &state.velocities, model, cfg)?;
    if !jl.is_inert() {
        policies.push(jl);
    }
    if cfg.cspace_weight > 0.0 {
        policies.push(cspace_damping_policy(&state.velocities, cfg));
    }
    Ok(policies)
}

/// Advances the arm one tick toward `target`.
///
/// The resolved acceleration is integrated semi-implicitly: velocities are
/// updated first and clamped to `±min(speed_cap, joint max_velocity)`, then
/// positions are advanced with the clamped velocity and clamped to the joint
/// range. A joint stopped by its limit loses the velocity pushing it out.
pub fn step(
    model: &ArmModel,
    state: &JointState,
    target: &Pose,
    planes: &[SafetyPlane],
    cfg: &MotionConfig,
) -> Result<JointState, MotionError> {
    cfg.validate()?;
    let policies = build_policies(model, state, target, planes, cfg)?;
    let accel = resolve(&policies)?;
    Ok(integrate(model, state, &accel, cfg))
}

fn integrate(
    model: &ArmModel,
    state: &JointState,
    accel: &DVector<f64>,
    cfg: &MotionConfig,
) -> JointState {
    let dt = cfg.tick_dt;
    let mut positions = Vec::with_capacity(model.dof());
    let mut velocities = Vec::with_capacity(model.dof());
    for (i, joint) in model.joints.iter().enumerate() {
        let cap = cfg.speed_cap.min(joint.max_velocity);
        let mut v = (state.velocities[i] + accel[i] * dt).clamp(-cap, cap);
        let raw = state.positions[i] + v * dt;
        let q = raw.clamp(joint.lower_limit, joint.upper_limit);
        if q != raw {
            v = 0.0;
        }
        positions.push(q);
        velocities.push(v);
    }
    JointState {
        positions,
        velocities,
        timestamp: state.timestamp + dt,
    }
}
