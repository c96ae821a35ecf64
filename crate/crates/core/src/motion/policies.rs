use nalgebra::{DMatrix, DVector, Vector3};

use super::{MotionConfig, MotionError, SafetyPlane, TaskPolicy};
use crate::kinematics::ArmModel;
use crate::pose::Pose;

/// Barrier weight `max(0, 1 - d/margin)²`.
///
/// Zero (with zero slope) at the edge of the influence zone, 1 at contact
/// and growing quadratically past it. A zero-width zone only reacts to
/// penetration.
pub fn barrier_weight(d: f64, margin: f64) -> f64 {
    if margin <= 0.0 {
        return if d < 0.0 { 1.0 } else { 0.0 };
    }
    let s = 1.0 - d / margin;
    if s <= 0.0 {
        0.0
    } else {
        s * s
    }
}

/// Control-point attractor in the 6-D (linear, angular) task space:
/// `accel = gain · error − damping · velocity`, identity metric.
///
/// The angular error is the rotation vector from the current orientation to
/// the target's. The Jacobian is the 6×6 identity; pull it back through the
/// control-point Jacobian to use it in joint space.
pub fn attractor_policy(
    current: &Pose,
    current_vel: &[f64; 6],
    target: &Pose,
    cfg: &MotionConfig,
) -> TaskPolicy {
    let linear = target.position - current.position;
    let angular = current.rotation_error_to(target);
    let accel = DVector::from_fn(6, |i, _| {
        let e = if i < 3 { linear[i] } else { angular[i - 3] };
        cfg.attractor_gain * e - cfg.attractor_damping * current_vel[i]
    });
    TaskPolicy {
        jacobian: DMatrix::identity(6, 6),
        desired_accel: accel,
        metric: DMatrix::identity(6, 6),
    }
}

/// One-dimensional barrier keeping a sphere in front of a plane.
///
/// With clearance `d` and normal speed `ḋ`, the policy asks for
/// `w(d) · (repulsion_gain − repulsion_damping · min(ḋ, 0))` along the
/// normal with metric `w(d) / repulsion_lengthscale²`. Its Jacobian is the
/// 1×3 row `normalᵀ`, to be pulled back through the sphere's linear
/// Jacobian.
pub fn plane_policy(
    sphere_center: &Vector3<f64>,
    sphere_vel: &Vector3<f64>,
    sphere_radius: f64,
    plane: &SafetyPlane,
    cfg: &MotionConfig,
) -> TaskPolicy {
    let d = plane.clearance(sphere_center, sphere_radius);
    let d_dot = plane.normal.dot(sphere_vel);
    let w = barrier_weight(d, plane.margin);
    let accel = w * (cfg.repulsion_gain - cfg.repulsion_damping * d_dot.min(0.0));
    let weight = w / (cfg.repulsion_lengthscale * cfg.repulsion_lengthscale);
    TaskPolicy {
        jacobian: DMatrix::from_row_slice(1, 3, plane.normal.as_slice()),
        desired_accel: DVector::from_element(1, accel),
        metric: DMatrix::from_element(1, 1, weight),
    }
}

/// Per-joint barriers against both limits, identity Jacobian.
///
/// Inside a zone of width `jointlimit_margin` the joint is pushed away from
/// the limit with `jointlimit_gain · w` and braked with a critically damped
/// term while moving toward it. The metric is diagonal,
/// `jointlimit_weight · (w_lower + w_upper)`, so mid-range joints are free.
pub fn jointlimit_policy(
    q: &[f64],
    qdot: &[f64],
    model: &ArmModel,
    cfg: &MotionConfig,
) -> Result<TaskPolicy, MotionError> {
    let n = model.dof();
    if q.len() != n || qdot.len() != n {
        return Err(MotionError::StateDimension {
            expected: n,
            got: q.len().min(qdot.len()),
        });
    }
    let brake = 2.0 * cfg.jointlimit_gain.sqrt();
    let mut accel = DVector::zeros(n);
    let mut metric = DMatrix::zeros(n, n);
    for (i, joint) in model.joints.iter().enumerate() {
        let w_lo = barrier_weight(q[i] - joint.lower_limit, cfg.jointlimit_margin);
        let w_hi = barrier_weight(joint.upper_limit - q[i], cfg.jointlimit_margin);
        if w_lo == 0.0 && w_hi == 0.0 {
            continue;
        }
        accel[i] = cfg.jointlimit_gain * (w_lo - w_hi)
            - brake * (w_lo * qdot[i].min(0.0) + w_hi * qdot[i].max(0.0));
        metric[(i, i)] = cfg.jointlimit_weight * (w_lo + w_hi);
    }
    Ok(TaskPolicy {
        jacobian: DMatrix::identity(n, n),
        desired_accel: accel,
        metric,
    })
}

/// Weak joint-space damper: `accel = −cspace_damping · q̇`.
pub fn cspace_damping_policy(qdot: &[f64], cfg: &MotionConfig) -> TaskPolicy {
    let n = qdot.len();
    TaskPolicy {
        jacobian: DMatrix::identity(n, n),
        desired_accel: DVector::from_iterator(n, qdot.iter().map(|v| -cfg.cspace_damping * v)),
        metric: DMatrix::identity(n, n) * cfg.cspace_weight,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinematics::test_models::planar;
    use nalgebra::UnitQuaternion;

    fn cfg() -> MotionConfig {
        MotionConfig::default()
    }

    #[test]
    fn attractor_equilibrium() {
        let p = Pose::new(
            Vector3::new(0.2, 0.1, 0.4),
            UnitQuaternion::from_euler_angles(0.1, 0.2, 0.3),
        );
        let pol = attractor_policy(&p, &[0.0; 6], &p, &cfg());
        assert!(pol.desired_accel.iter().all(|&v| v.abs() < 1e-12));
        assert_eq!(pol.metric, DMatrix::identity(6, 6));
    }

    #[test]
    fn attractor_law_examples() {
        let c = MotionConfig {
            attractor_gain: 1.0,
            attractor_damping: 0.0,
            ..cfg()
        };
        let pol = attractor_policy(
            &Pose::identity(),
            &[0.0; 6],
            &Pose::from_translation(1.0, 0.0, 0.0),
            &c,
        );
        assert_eq!(pol.desired_accel.as_slice(), &[1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);

        let c = MotionConfig {
            attractor_gain: 2.0,
            attractor_damping: 1.0,
            ..cfg()
        };
        let pol = attractor_policy(
            &Pose::identity(),
            &[1.0, 0.0, 0.0, 0.0, 0.0, 0.0],
            &Pose::from_translation(0.5, 0.0, 0.0),
            &c,
        );
        assert_eq!(pol.desired_accel.as_slice(), &[0.0; 6]);
    }

    #[test]
    fn attractor_matches_closed_form_on_samples() {
        let c = MotionConfig {
            attractor_gain: 7.5,
            attractor_damping: 1.25,
            ..cfg()
        };
        for i in 0..20 {
            let f = i as f64 * 0.37;
            let cur = Pose::new(
                Vector3::new(f.sin(), f.cos(), 0.1 * f),
                UnitQuaternion::from_euler_angles(0.1 * f, -0.2, 0.05 * f),
            );
            let tgt = Pose::new(
                Vector3::new(0.3, -0.1 * f, 0.2),
                UnitQuaternion::from_euler_angles(-0.3, 0.1 * f, 0.4),
            );
            let vel = [0.1 * f, -0.2, 0.3, 0.0, 0.05 * f, -0.1];
            let pol = attractor_policy(&cur, &vel, &tgt, &c);
            // rotation error from the axis-angle of q_t q_c⁻¹
            let delta = tgt.orientation * cur.orientation.inverse();
            let rot = delta.scaled_axis();
            for k in 0..6 {
                let e = if k < 3 {
                    tgt.position[k] - cur.position[k]
                } else {
                    rot[k - 3]
                };
                let expected = 7.5 * e - 1.25 * vel[k];
                assert!((pol.desired_accel[k] - expected).abs() < 1e-12);
            }
        }
    }

    fn floor() -> SafetyPlane {
        SafetyPlane::new(Vector3::z(), 0.0, 0.1).unwrap()
    }

    #[test]
    fn plane_inert_outside_margin() {
        let plane = floor();
        for d in [0.2, 0.1] {
            // clearance = z - radius
            let pol = plane_policy(&Vector3::new(0.0, 0.0, d + 0.05), &Vector3::zeros(), 0.05, &plane, &cfg());
            assert_eq!(pol.metric[(0, 0)], 0.0);
            assert_eq!(pol.desired_accel[0], 0.0);
        }
    }

    #[test]
    fn plane_half_margin_hand_evaluation() {
        let plane = floor();
        let c = cfg();
        // d = 0.05 = margin/2, approaching at 0.4 m/s.
        let pol = plane_policy(
            &Vector3::new(1.0, 2.0, 0.1),
            &Vector3::new(0.0, 0.0, -0.4),
            0.05,
            &plane,
            &c,
        );
        let w = 0.25; // (1 - 0.5)²
        let expected = w * (c.repulsion_gain + c.repulsion_damping * 0.4);
        assert!((pol.desired_accel[0] - expected).abs() < 1e-12);
        assert!(pol.desired_accel[0] > 0.0);
        assert!((pol.metric[(0, 0)] - w / (c.repulsion_lengthscale * c.repulsion_lengthscale)).abs() < 1e-9);
        assert_eq!(pol.jacobian.as_slice(), &[0.0, 0.0, 1.0]);
    }

    #[test]
    fn barrier_is_continuous_at_zone_edge() {
        let m = 0.1;
        assert_eq!(barrier_weight(m, m), 0.0);
        let eps = 1e-7;
        assert!(barrier_weight(m - eps, m) < 1e-11);
        assert!(barrier_weight(m - eps, m) > 0.0);
        assert_eq!(barrier_weight(0.0, m), 1.0);
        assert!(barrier_weight(-0.05, m) > 1.0);
        assert_eq!(barrier_weight(0.01, 0.0), 0.0);
    }

    #[test]
    fn jointlimit_mid_range_inert() {
        let arm = planar(3);
        let q: Vec<f64> = arm.joints.iter().map(|j| j.mid_range()).collect();
        let pol = jointlimit_policy(&q, &[0.0; 3], &arm, &cfg()).unwrap();
        assert!(pol.is_inert());
        assert!(pol.desired_accel.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn jointlimit_pushes_off_lower_limit() {
        let arm = planar(2);
        let pol = jointlimit_policy(&[-3.0, 0.0], &[0.0, 0.0], &arm, &cfg()).unwrap();
        assert!(pol.desired_accel[0] > 0.0);
        assert_eq!(pol.desired_accel[1], 0.0);
        let pol = jointlimit_policy(&[0.0, 3.0], &[0.0, 0.0], &arm, &cfg()).unwrap();
        assert!(pol.desired_accel[1] < 0.0);
    }

    #[test]
    fn jointlimit_zero_crossing_is_continuous() {
        let arm = planar(1);
        let c = cfg();
        let edge = -3.0 + c.jointlimit_margin;
        let at = |q: f64| jointlimit_policy(&[q], &[0.0], &arm, &c).unwrap();
        assert!(at(edge).desired_accel[0].abs() < 1e-20);
        let inside = at(edge - 1e-6);
        let expected = c.jointlimit_gain * (1e-6 / c.jointlimit_margin).powi(2);
        assert!((inside.desired_accel[0] - expected).abs() < 1e-12);
        assert!(inside.desired_accel[0] < 1e-8);
    }

    #[test]
    fn jointlimit_dimension_check() {
        let arm = planar(2);
        assert!(jointlimit_policy(&[0.0], &[0.0, 0.0], &arm, &cfg()).is_err());
    }
}
