//! Loader for the compact TOML arm description (see `docs/arm-format.md`).

use std::path::Path;

use nalgebra::{UnitQuaternion, Vector3};
use serde::Deserialize;
use thiserror::Error;

use super::{ArmModel, CollisionSphere, JointSpec};
use crate::pose::{Pose, UNIT_NORM_TOLERANCE};

#[derive(Debug, Error)]
pub enum DescriptionError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid arm description: {0}")]
    Invalid(String),
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Document {
    name: String,
    home: Vec<f64>,
    #[serde(rename = "joint", default)]
    joints: Vec<JointEntry>,
    #[serde(rename = "sphere", default)]
    spheres: Vec<SphereEntry>,
    control_point: Frame,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct JointEntry {
    name: String,
    origin: Frame,
    axis: [f64; 3],
    limits: [f64; 2],
    max_velocity: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SphereEntry {
    link: usize,
    center: [f64; 3],
    radius: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Frame {
    #[serde(default)]
    xyz: [f64; 3],
    /// Fixed-axis roll, pitch, yaw in radians.
    #[serde(default)]
    rpy: [f64; 3],
}

impl Frame {
    fn to_pose(&self) -> Pose {
        Pose::new(
            Vector3::from(self.xyz),
            UnitQuaternion::from_euler_angles(self.rpy[0], self.rpy[1], self.rpy[2]),
        )
    }
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// Parses and validates an arm description document.
pub fn load_arm_description(text: &str) -> Result<ArmModel, DescriptionError> {
    let doc: Document = toml::from_str(text).map_err(|e| DescriptionError::Parse {
        line: e.span().map(|s| line_of(text, s.start)).unwrap_or(0),
        message: e.message().to_string(),
    })?;
    let invalid = |msg: String| Err(DescriptionError::Invalid(msg));

    if doc.joints.is_empty() {
        return invalid("at least one joint is required".into());
    }
    let mut joints = Vec::with_capacity(doc.joints.len());
    for entry in &doc.joints {
        let [lower, upper] = entry.limits;
        if !(lower.is_finite() && upper.is_finite()) {
            return invalid(format!("joint '{}': limits must be finite", entry.name));
        }
        if lower > upper {
            return invalid(format!(
                "joint '{}': lower_limit {lower} > upper_limit {upper}",
                entry.name
            ));
        }
        let axis = Vector3::from(entry.axis);
        if (axis.norm() - 1.0).abs() > UNIT_NORM_TOLERANCE {
            return invalid(format!(
                "joint '{}': axis norm {} is not 1",
                entry.name,
                axis.norm()
            ));
        }
        if !(entry.max_velocity > 0.0) {
            return invalid(format!("joint '{}': max_velocity must be > 0", entry.name));
        }
        joints.push(JointSpec {
            name: entry.name.clone(),
            parent_offset: entry.origin.to_pose(),
            axis,
            lower_limit: lower,
            upper_limit: upper,
            max_velocity: entry.max_velocity,
        });
    }

    let links = joints.len() + 1;
    let mut spheres = Vec::with_capacity(doc.spheres.len());
    for (i, s) in doc.spheres.iter().enumerate() {
        if s.link >= links {
            return invalid(format!(
                "sphere {i}: link {} out of range (model has {links} links)",
                s.link
            ));
        }
        if !(s.radius > 0.0) {
            return invalid(format!("sphere {i}: radius must be > 0"));
        }
        spheres.push(CollisionSphere {
            link_index: s.link,
            local_offset: Vector3::from(s.center),
            radius: s.radius,
        });
    }

    if doc.home.len() != joints.len() {
        return invalid(format!(
            "home has {} values for {} joints",
            doc.home.len(),
            joints.len()
        ));
    }
    for (j, &h) in joints.iter().zip(&doc.home) {
        if h < j.lower_limit || h > j.upper_limit {
            return invalid(format!("home value {h} outside limits of joint '{}'", j.name));
        }
    }

    Ok(ArmModel {
        name: doc.name,
        joints,
        spheres,
        control_point_offset: doc.control_point.to_pose(),
        home_configuration: doc.home,
    })
}

pub fn load_arm_file(path: impl AsRef<Path>) -> Result<ArmModel, DescriptionError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| DescriptionError::Io {
        path: path.display().to_string(),
        source,
    })?;
    load_arm_description(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    const PLANAR: &str = r#"
name = "planar"
home = [0.0, 0.0]

[[joint]]
name = "shoulder"
origin = { xyz = [0.0, 0.0, 0.0] }
axis = [0.0, 0.0, 1.0]
limits = [-3.0, 3.0]
max_velocity = 1.0

[[joint]]
name = "elbow"
origin = { xyz = [1.0, 0.0, 0.0] }
axis = [0.0, 0.0, 1.0]
limits = [-3.0, 3.0]
max_velocity = 1.0

[control_point]
xyz = [1.0, 0.0, 0.0]
"#;

    #[test]
    fn parses_planar_arm_in_order() {
        let arm = load_arm_description(PLANAR).unwrap();
        assert_eq!(arm.joint_names(), vec!["shoulder", "elbow"]);
        assert_eq!(arm.dof(), 2);
        assert!(arm.spheres.is_empty());
    }

    #[test]
    fn inverted_limits_rejected() {
        let text = PLANAR.replacen("limits = [-3.0, 3.0]", "limits = [1.0, -1.0]", 1);
        let err = load_arm_description(&text).unwrap_err();
        assert!(err.to_string().contains("lower_limit"), "{err}");
    }

    #[test]
    fn syntax_error_reports_line() {
        let text = PLANAR.replacen("axis = [0.0, 0.0, 1.0]", "axis = [0.0, 0.0, ", 1);
        match load_arm_description(&text).unwrap_err() {
            DescriptionError::Parse { line, .. } => assert!(line >= 9, "line {line}"),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn rejects_bad_axis_and_home() {
        let text = PLANAR.replacen("axis = [0.0, 0.0, 1.0]", "axis = [0.0, 0.0, 2.0]", 1);
        assert!(load_arm_description(&text).is_err());
        let text = PLANAR.replacen("home = [0.0, 0.0]", "home = [0.0, 4.0]", 1);
        assert!(load_arm_description(&text).is_err());
        let text = PLANAR.replacen("home = [0.0, 0.0]", "home = [0.0]", 1);
        assert!(load_arm_description(&text).is_err());
    }

    #[test]
    fn sphere_link_bounds_checked() {
        let text = format!("{PLANAR}\n[[sphere]]\nlink = 3\ncenter = [0.0, 0.0, 0.0]\nradius = 0.1\n");
        assert!(load_arm_description(&text).is_err());
        let text = format!("{PLANAR}\n[[sphere]]\nlink = 2\ncenter = [0.0, 0.0, 0.0]\nradius = 0.1\n");
        assert_eq!(load_arm_description(&text).unwrap().spheres.len(), 1);
    }
}
