//! Serial-chain arm model: forward kinematics, Jacobians, joint limits and
//! the collision spheres used by the safety policies.
//!
//! Frames follow one convention throughout. Link 0 is the fixed base. Link
//! `i` (for `1 ≤ i ≤ dof`) is the frame obtained by composing link `i - 1`
//! with joint `i`'s static parent offset and then rotating about the joint
//! axis by `q[i - 1]`. The control point hangs off the last link.

mod description;

pub use description::{load_arm_description, load_arm_file, DescriptionError};

use nalgebra::{DMatrix, UnitQuaternion, Unit, Vector3};
use serde::Serialize;
use thiserror::Error;

use crate::pose::Pose;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KinematicsError {
    #[error("expected {expected} joint values, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("link index {index} out of range (model has {links} links)")]
    InvalidLink { index: usize, links: usize },
}

/// One revolute joint.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JointSpec {
    pub name: String,
    /// Static transform from the parent link frame to the joint frame.
    pub parent_offset: Pose,
    pub axis: Vector3<f64>,
    pub lower_limit: f64,
    pub upper_limit: f64,
    pub max_velocity: f64,
}

impl JointSpec {
    pub fn mid_range(&self) -> f64 {
        0.5 * (self.lower_limit + self.upper_limit)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CollisionSphere {
    pub link_index: usize,
    pub local_offset: Vector3<f64>,
    pub radius: f64,
}

/// A point rigidly attached to a link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkPoint {
    pub link_index: usize,
    pub local_offset: Vector3<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ArmModel {
    pub name: String,
    pub joints: Vec<JointSpec>,
    pub spheres: Vec<CollisionSphere>,
    /// Tracked point between the gripper fingers, relative to the last link.
    pub control_point_offset: Pose,
    pub home_configuration: Vec<f64>,
}

/// Result of a forward-kinematics pass.
#[derive(Debug, Clone)]
pub struct ChainPoses {
    /// `dof + 1` link frames in the world; index 0 is the base.
    pub links: Vec<Pose>,
    /// World frame of every joint before its own rotation is applied.
    pub joint_frames: Vec<Pose>,
    pub control_point: Pose,
}

impl ChainPoses {
    fn joint_axis_world(&self, model: &ArmModel, j: usize) -> Vector3<f64> {
        self.joint_frames[j].orientation * model.joints[j].axis
    }

    pub fn point_world(&self, point: &LinkPoint) -> Vector3<f64> {
        self.links[point.link_index].transform_point(&point.local_offset)
    }

    /// 6×n Jacobian (linear rows first, then angular) of a link-attached
    /// point, built from the already computed frames.
    pub fn jacobian(&self, model: &ArmModel, point: &LinkPoint) -> DMatrix<f64> {
        let n = model.dof();
        let p = self.point_world(point);
        let mut jac = DMatrix::zeros(6, n);
        // Joint j drives link j + 1, so only joints 0..link_index move the point.
        for j in 0..point.link_index.min(n) {
            let axis = self.joint_axis_world(model, j);
            let origin = self.joint_frames[j].position;
            let linear = axis.cross(&(p - origin));
            jac.fixed_view_mut::<3, 1>(0, j).copy_from(&linear);
            jac.fixed_view_mut::<3, 1>(3, j).copy_from(&axis);
        }
        jac
    }

    /// Jacobian of the control point.
    pub fn control_point_jacobian(&self, model: &ArmModel) -> DMatrix<f64> {
        self.jacobian(model, &model.control_point())
    }
}

impl ArmModel {
    pub fn dof(&self) -> usize {
        self.joints.len()
    }

    pub fn link_count(&self) -> usize {
        self.joints.len() + 1
    }

    pub fn control_point(&self) -> LinkPoint {
        LinkPoint {
            link_index: self.dof(),
            local_offset: self.control_point_offset.position,
        }
    }

    pub fn lower_limits(&self) -> Vec<f64> {
        self.joints.iter().map(|j| j.lower_limit).collect()
    }

    pub fn upper_limits(&self) -> Vec<f64> {
        self.joints.iter().map(|j| j.upper_limit).collect()
    }

    pub fn joint_names(&self) -> Vec<String> {
        self.joints.iter().map(|j| j.name.clone()).collect()
    }

    fn check_len(&self, q: &[f64]) -> Result<(), KinematicsError> {
        if q.len() != self.dof() {
            return Err(KinematicsError::DimensionMismatch {
                expected: self.dof(),
                got: q.len(),
            });
        }
        Ok(())
    }

    pub fn forward_kinematics(&self, q: &[f64]) -> Result<ChainPoses, KinematicsError> {
        self.check_len(q)?;
        let mut links = Vec::with_capacity(self.link_count());
        let mut joint_frames = Vec::with_capacity(self.dof());
        let mut current = Pose::identity();
        links.push(current);
        for (joint, &angle) in self.joints.iter().zip(q) {
            let frame = current.compose(&joint.parent_offset);
            let rotation = Pose::new(
                Vector3::zeros(),
                UnitQuaternion::from_axis_angle(&Unit::new_unchecked(joint.axis), angle),
            );
            joint_frames.push(frame);
            current = frame.compose(&rotation);
            links.push(current);
        }
        let control_point = current.compose(&self.control_point_offset);
        Ok(ChainPoses {
            links,
            joint_frames,
            control_point,
        })
    }

    /// Jacobian of a link-attached point at configuration `q`.
    pub fn jacobian(&self, q: &[f64], point: &LinkPoint) -> Result<DMatrix<f64>, KinematicsError> {
        if point.link_index >= self.link_count() {
            return Err(KinematicsError::InvalidLink {
                index: point.link_index,
                links: self.link_count(),
            });
        }
        Ok(self.forward_kinematics(q)?.jacobian(self, point))
    }

    /// Clamps every component into its joint range. Extra or missing
    /// components are left to the caller; the lengths must agree.
    pub fn clamp_joints(&self, q: &[f64]) -> Vec<f64> {
        debug_assert_eq!(q.len(), self.dof());
        q.iter()
            .zip(&self.joints)
            .map(|(&v, j)| v.clamp(j.lower_limit, j.upper_limit))
            .collect()
    }

    pub fn within_limits(&self, q: &[f64]) -> bool {
        q.len() == self.dof()
            && q
                .iter()
                .zip(&self.joints)
                .all(|(&v, j)| v >= j.lower_limit && v <= j.upper_limit)
    }

    /// Upper bound on the horizontal distance from the base axis to the
    /// control point: the sum of all link lengths.
    pub fn chain_length(&self) -> f64 {
        self.joints
            .iter()
            .map(|j| j.parent_offset.position.norm())
            .sum::<f64>()
            + self.control_point_offset.position.norm()
    }
}

/// Time-stamped configuration of an arm.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JointState {
    pub positions: Vec<f64>,
    pub velocities: Vec<f64>,
    /// Simulation clock, seconds.
    pub timestamp: f64,
}

impl JointState {
    pub fn at_rest(positions: Vec<f64>, timestamp: f64) -> Self {
        let velocities = vec![0.0; positions.len()];
        Self {
            positions,
            velocities,
            timestamp,
        }
    }

    pub fn home(model: &ArmModel) -> Self {
        Self::at_rest(model.home_configuration.clone(), 0.0)
    }
}


#[cfg(test)]
mod tests {
    use super::test_models::planar;
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn planar_straight_line() {
        let arm = planar(2);
        let fk = arm.forward_kinematics(&[0.0, 0.0]).unwrap();
        assert_eq!(fk.control_point.position, Vector3::new(2.0, 0.0, 0.0));
        assert_eq!(fk.links.len(), 3);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let arm = planar(2);
        assert_eq!(
            arm.forward_kinematics(&[0.0]).unwrap_err(),
            KinematicsError::DimensionMismatch {
                expected: 2,
                got: 1
            }
        );
        let err = arm
            .jacobian(
                &[0.0, 0.0],
                &LinkPoint {
                    link_index: 7,
                    local_offset: Vector3::zeros(),
                },
            )
            .unwrap_err();
        assert!(matches!(err, KinematicsError::InvalidLink { index: 7, .. }));
    }

    #[test]
    fn one_link_tip_jacobian() {
        let arm = planar(1);
        let jac = arm.jacobian(&[0.0], &arm.control_point()).unwrap();
        assert_eq!(jac.column(0).iter().copied().collect::<Vec<_>>(), vec![0.0, 1.0, 0.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn base_point_has_zero_jacobian() {
        let arm = planar(3);
        let base = LinkPoint {
            link_index: 0,
            local_offset: Vector3::new(0.3, 0.1, 0.0),
        };
        let jac = arm.jacobian(&[0.4, -0.2, 1.0], &base).unwrap();
        assert!(jac.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn joints_after_point_link_have_zero_columns() {
        let arm = planar(3);
        let p = LinkPoint {
            link_index: 1,
            local_offset: Vector3::new(0.5, 0.0, 0.0),
        };
        let jac = arm.jacobian(&[FRAC_PI_2, 0.3, 0.3], &p).unwrap();
        assert!(jac.column(0).norm() > 0.0);
        assert!(jac.column(1).iter().all(|&v| v == 0.0));
        assert!(jac.column(2).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn clamp_behaviour() {
        let arm = planar(3);
        assert_eq!(arm.clamp_joints(&[0.1, -0.2, 0.3]), vec![0.1, -0.2, 0.3]);
        assert_eq!(arm.clamp_joints(&[5.0, -0.2, -9.0]), vec![3.0, -0.2, -3.0]);
    }
}
