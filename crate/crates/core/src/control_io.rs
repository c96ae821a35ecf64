//! Device-agnostic input pipeline: origin calibration, one-to-one pose
//! mapping with a workspace clamp, grasp mapping and motor-count conversion.
//!
//! Any controller that produces a pose fits here; trigger devices report a
//! grip scalar and gloves report thumb/index flexion, and both collapse to a
//! single aperture fraction (1 = fully open).

use std::path::Path;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pose::Pose;

#[derive(Debug, Error, PartialEq)]
pub enum ControlError {
    #[error("input stream is not calibrated")]
    Uncalibrated,
    #[error("angle {0} is not finite")]
    NonFiniteAngle(f64),
    #[error("motor resolution must be positive")]
    ZeroResolution,
    #[error("trajectory line {line}: {message}")]
    Trajectory { line: usize, message: String },
    #[error("timestamps must be non-decreasing (line {line})")]
    TimestampOrder { line: usize },
}

/// Flexion of the two mapped fingers; 0 is extended, 1 fully flexed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FingerFlexion {
    pub thumb: f64,
    pub index: f64,
}

/// Grasp input as reported by the device.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum GraspInput {
    /// Trigger value in `[0, 1]`; 1 is fully pressed.
    Trigger(f64),
    Fingers(FingerFlexion),
}

impl GraspInput {
    /// Aperture fraction in `[0, 1]`, 1 meaning open.
    pub fn aperture_fraction(&self) -> f64 {
        match *self {
            GraspInput::Trigger(g) => 1.0 - g.clamp(0.0, 1.0),
            GraspInput::Fingers(f) => map_fingers(&f),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RawPoseSample {
    pub device_pose: Pose,
    pub grasp: GraspInput,
    pub timestamp: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationState {
    /// Device pose captured at calibration time.
    pub origin: Pose,
    /// Twin-frame pose the origin maps to.
    pub robot_rest_target: Pose,
}

/// Axis-aligned box the mapped position is clamped into.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Workspace {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl Workspace {
    pub fn clamp(&self, p: &Vector3<f64>) -> Vector3<f64> {
        Vector3::from_fn(|i, _| p[i].clamp(self.min[i], self.max[i]))
    }

    pub fn contains(&self, p: &Vector3<f64>) -> bool {
        (0..3).all(|i| p[i] >= self.min[i] && p[i] <= self.max[i])
    }

    pub fn is_valid(&self) -> bool {
        (0..3).all(|i| self.min[i].is_finite() && self.max[i].is_finite() && self.min[i] <= self.max[i])
    }
}

/// Anchors the device stream so `sample` maps to `rest_target`.
pub fn calibrate(sample: &RawPoseSample, rest_target: Pose) -> CalibrationState {
    CalibrationState {
        origin: sample.device_pose,
        robot_rest_target: rest_target,
    }
}

/// Applies the device displacement relative to the calibration origin,
/// one-to-one, to the rest target; then clamps the position into the
/// workspace. Orientation is never clamped.
pub fn map_pose(sample: &RawPoseSample, cal: &CalibrationState, workspace: &Workspace) -> Pose {
    let relative = cal.origin.inverse().compose(&sample.device_pose);
    let mut target = cal.robot_rest_target.compose(&relative);
    target.position = workspace.clamp(&target.position);
    target
}

/// Convenience wrapper for streams whose calibration may be missing.
pub fn map_pose_checked(
    sample: &RawPoseSample,
    cal: Option<&CalibrationState>,
    workspace: &Workspace,
) -> Result<Pose, ControlError> {
    cal.map(|c| map_pose(sample, c, workspace))
        .ok_or(ControlError::Uncalibrated)
}

/// Two fingers to one grasp degree of freedom: `1 − (thumb + index) / 2`.
pub fn map_fingers(f: &FingerFlexion) -> f64 {
    let thumb = f.thumb.clamp(0.0, 1.0);
    let index = f.index.clamp(0.0, 1.0);
    1.0 - 0.5 * (thumb + index)
}

pub const MOTOR_RESOLUTION: u32 = 4096;

/// Linear degrees-to-counts map, `round(angle / 360 · resolution)` clamped to
/// `[0, resolution − 1]`.
pub fn degrees_to_motor_command(angle_deg: f64, resolution: u32) -> Result<u32, ControlError> {
    if resolution == 0 {
        return Err(ControlError::ZeroResolution);
    }
    if !angle_deg.is_finite() {
        return Err(ControlError::NonFiniteAngle(angle_deg));
    }
    let counts = (angle_deg / 360.0 * resolution as f64).round();
    Ok(counts.clamp(0.0, (resolution - 1) as f64) as u32)
}

pub fn motor_command_to_degrees(count: u32, resolution: u32) -> f64 {
    count as f64 * 360.0 / resolution as f64
}

/// Per-stream state: holds the calibration and enforces timestamp order.
#[derive(Debug, Clone)]
pub struct InputPipeline {
    rest_target: Pose,
    workspace: Workspace,
    calibration: Option<CalibrationState>,
    last_timestamp: Option<f64>,
}

/// Output of one processed sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MappedInput {
    pub target: Pose,
    pub aperture_fraction: f64,
    pub timestamp: f64,
}

impl InputPipeline {
    pub fn new(rest_target: Pose, workspace: Workspace) -> Self {
        Self {
            rest_target,
            workspace,
            calibration: None,
            last_timestamp: None,
        }
    }

    pub fn calibration(&self) -> Option<&CalibrationState> {
        self.calibration.as_ref()
    }

    pub fn recalibrate(&mut self, sample: &RawPoseSample) {
        self.calibration = Some(calibrate(sample, self.rest_target));
    }

    /// Maps a sample; calibrates on the first sample if the stream is new.
    /// Samples older than the last accepted one are dropped.
    pub fn process(&mut self, sample: &RawPoseSample) -> Option<MappedInput> {
        if self.last_timestamp.is_some_and(|t| sample.timestamp < t) {
            return None;
        }
        self.last_timestamp = Some(sample.timestamp);
        if self.calibration.is_none() {
            self.recalibrate(sample);
        }
        let cal = self.calibration.as_ref()?;
        Some(MappedInput {
            target: map_pose(sample, cal, &self.workspace),
            aperture_fraction: sample.grasp.aperture_fraction(),
            timestamp: sample.timestamp,
        })
    }
}

/// Parses a trajectory file: one record per line,
/// `t x y z qw qx qy qz grip` or `t x y z qw qx qy qz thumb index`.
/// Blank lines and `#` comments are ignored.
pub fn parse_trajectory(text: &str) -> Result<Vec<RawPoseSample>, ControlError> {
    let mut out = Vec::new();
    let mut last = f64::NEG_INFINITY;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let fields = body
            .split_whitespace()
            .map(|s| s.parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| ControlError::Trajectory {
                line,
                message: e.to_string(),
            })?;
        if fields.len() != 9 && fields.len() != 10 {
            return Err(ControlError::Trajectory {
                line,
                message: format!("expected 9 or 10 fields, found {}", fields.len()),
            });
        }
        if fields.iter().any(|v| !v.is_finite()) {
            return Err(ControlError::Trajectory {
                line,
                message: "non-finite value".into(),
            });
        }
        let t = fields[0];
        if t < last {
            return Err(ControlError::TimestampOrder { line });
        }
        last = t;
        let device_pose = Pose::from_wxyz(
            Vector3::new(fields[1], fields[2], fields[3]),
            [fields[4], fields[5], fields[6], fields[7]],
        )
        .ok_or_else(|| ControlError::Trajectory {
            line,
            message: "degenerate quaternion".into(),
        })?;
        let grasp = if fields.len() == 9 {
            GraspInput::Trigger(fields[8])
        } else {
            GraspInput::Fingers(FingerFlexion {
                thumb: fields[8],
                index: fields[9],
            })
        };
        out.push(RawPoseSample {
            device_pose,
            grasp,
            timestamp: t,
        });
    }
    Ok(out)
}

pub fn load_trajectory(path: impl AsRef<Path>) -> anyhow::Result<Vec<RawPoseSample>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| anyhow::anyhow!("cannot read trajectory {}: {e}", path.display()))?;
    Ok(parse_trajectory(&text)?)
}

/// Formats one trajectory record in the file's text format.
pub fn format_trajectory_record(sample: &RawPoseSample) -> String {
    let p = sample.device_pose.position;
    let q = sample.device_pose.wxyz();
    let tail = match sample.grasp {
        GraspInput::Trigger(g) => format!("{g}"),
        GraspInput::Fingers(f) => format!("{} {}", f.thumb, f.index),
    };
    format!(
        "{} {} {} {} {} {} {} {} {}",
        sample.timestamp, p.x, p.y, p.z, q[0], q[1], q[2], q[3], tail
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::UnitQuaternion;

    fn sample_at(pose: Pose) -> RawPoseSample {
        RawPoseSample {
            device_pose: pose,
            grasp: GraspInput::Trigger(0.0),
            timestamp: 0.0,
        }
    }

    fn big_box() -> Workspace {
        Workspace {
            min: [-10.0; 3],
            max: [10.0; 3],
        }
    }

    fn rest() -> Pose {
        Pose::new(
            Vector3::new(0.4, 0.0, 0.3),
            UnitQuaternion::from_euler_angles(std::f64::consts::PI, 0.0, 0.0),
        )
    }

    #[test]
    fn calibrated_sample_maps_to_rest_target() {
        let device = Pose::new(
            Vector3::new(1.0, 2.0, 1.5),
            UnitQuaternion::from_euler_angles(0.2, 0.1, -0.4),
        );
        let s = sample_at(device);
        let cal = calibrate(&s, rest());
        let out = map_pose(&s, &cal, &big_box());
        assert!((out.position - rest().position).norm() < 1e-12);
        assert!(out.orientation.angle_to(&rest().orientation) < 1e-9);
    }

    #[test]
    fn identity_calibration_is_identity_mapping() {
        let cal = calibrate(&sample_at(Pose::identity()), Pose::identity());
        let p = Pose::new(
            Vector3::new(0.1, -0.2, 0.3),
            UnitQuaternion::from_euler_angles(0.3, 0.0, 0.1),
        );
        let out = map_pose(&sample_at(p), &cal, &big_box());
        assert!((out.position - p.position).norm() < 1e-12);
        assert!(out.orientation.angle_to(&p.orientation) < 1e-9);
    }

    #[test]
    fn recalibration_replaces_origin() {
        let mut pipe = InputPipeline::new(rest(), big_box());
        let a = sample_at(Pose::from_translation(0.0, 0.0, 1.0));
        let b = sample_at(Pose::from_translation(0.5, 0.0, 1.0));
        pipe.recalibrate(&a);
        pipe.recalibrate(&b);
        let out = pipe.process(&a).unwrap();
        assert!((out.target.position - rest().position).norm() > 0.4);
        let out = pipe.process(&b).unwrap();
        assert!((out.target.position - rest().position).norm() < 1e-12);
    }

    #[test]
    fn displacement_applied_one_to_one() {
        let cal = calibrate(&sample_at(Pose::from_translation(1.0, 1.0, 1.0)), Pose::from_translation(0.3, 0.0, 0.2));
        let out = map_pose(&sample_at(Pose::from_translation(1.1, 1.0, 1.0)), &cal, &big_box());
        assert!((out.position - Vector3::new(0.4, 0.0, 0.2)).norm() < 1e-12);
    }

    #[test]
    fn mapped_position_is_clamped() {
        let ws = Workspace {
            min: [0.0, -0.2, 0.0],
            max: [0.5, 0.2, 0.4],
        };
        let cal = calibrate(&sample_at(Pose::identity()), Pose::from_translation(0.3, 0.0, 0.2));
        let out = map_pose(&sample_at(Pose::from_translation(1.0, -1.0, 0.1)), &cal, &ws);
        assert!((out.position - Vector3::new(0.5, -0.2, 0.3)).norm() < 1e-12);
        assert!(ws.contains(&out.position));
    }

    #[test]
    fn uncalibrated_stream_is_an_error() {
        let err = map_pose_checked(&sample_at(Pose::identity()), None, &big_box()).unwrap_err();
        assert_eq!(err, ControlError::Uncalibrated);
    }

    #[test]
    fn finger_mapping_examples() {
        let f = |thumb, index| map_fingers(&FingerFlexion { thumb, index });
        assert_eq!(f(0.0, 0.0), 1.0);
        assert_eq!(f(1.0, 1.0), 0.0);
        assert_eq!(f(1.0, 0.0), 0.5);
        assert_eq!(GraspInput::Trigger(1.0).aperture_fraction(), 0.0);
        assert_eq!(GraspInput::Trigger(0.25).aperture_fraction(), 0.75);
    }

    #[test]
    fn motor_command_examples() {
        assert_eq!(degrees_to_motor_command(0.0, 4096).unwrap(), 0);
        assert_eq!(degrees_to_motor_command(180.0, 4096).unwrap(), 2048);
        assert_eq!(degrees_to_motor_command(400.0, 4096).unwrap(), 4095);
        assert_eq!(degrees_to_motor_command(-5.0, 4096).unwrap(), 0);
        assert!(matches!(
            degrees_to_motor_command(f64::NAN, 4096),
            Err(ControlError::NonFiniteAngle(_))
        ));
        assert!(degrees_to_motor_command(1.0, 0).is_err());
    }

    #[test]
    fn trajectory_parse_and_errors() {
        let text = "# t x y z qw qx qy qz grip\n0 0 0 0 1 0 0 0 0\n\n0.5 0.1 0 0 1 0 0 0 1\n1.0 0.1 0 0 1 0 0 0 0.2 0.4\n";
        let recs = parse_trajectory(text).unwrap();
        assert_eq!(recs.len(), 3);
        assert_eq!(recs[1].grasp, GraspInput::Trigger(1.0));
        assert!(matches!(recs[2].grasp, GraspInput::Fingers(_)));
        let line = format_trajectory_record(&recs[1]);
        assert_eq!(parse_trajectory(&line).unwrap()[0], recs[1]);

        assert!(matches!(
            parse_trajectory("0 0 0 1 0 0 0 0").unwrap_err(),
            ControlError::Trajectory { line: 1, .. }
        ));
        assert!(matches!(
            parse_trajectory("1 0 0 0 1 0 0 0 0\n0 0 0 0 1 0 0 0 0").unwrap_err(),
            ControlError::TimestampOrder { line: 2 }
        ));
        assert!(parse_trajectory("0 0 0 0 0 0 0 0 0").is_err());
    }
}
