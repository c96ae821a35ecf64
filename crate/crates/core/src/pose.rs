//! Rigid transforms shared by every stage of the pipeline.

use nalgebra::{Quaternion, UnitQuaternion, Vector3};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Allowed deviation of a stored orientation from unit norm.
pub const UNIT_NORM_TOLERANCE: f64 = 1e-9;

/// Position (meters) plus unit-quaternion orientation.
///
/// Composition renormalizes the resulting quaternion so that long chains of
/// products (a session runs hundreds of thousands of ticks) do not drift.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub position: Vector3<f64>,
    pub orientation: UnitQuaternion<f64>,
}

impl Default for Pose {
    fn default() -> Self {
        Self::identity()
    }
}

impl Pose {
    pub fn identity() -> Self {
        Self {
            position: Vector3::zeros(),
            orientation: UnitQuaternion::identity(),
        }
    }

    pub fn new(position: Vector3<f64>, orientation: UnitQuaternion<f64>) -> Self {
        Self {
            position,
            orientation,
        }
    }

    pub fn from_translation(x: f64, y: f64, z: f64) -> Self {
        Self::new(Vector3::new(x, y, z), UnitQuaternion::identity())
    }

    /// Builds a pose from raw `(w, x, y, z)` components, normalizing them
    /// unless they are already unit to within 1e-12 (kept bit for bit, so
    /// poses survive a text round trip unchanged).
    ///
    /// Returns `None` for a zero or non-finite quaternion.
    pub fn from_wxyz(position: Vector3<f64>, wxyz: [f64; 4]) -> Option<Self> {
        let q = Quaternion::new(wxyz[0], wxyz[1], wxyz[2], wxyz[3]);
        let norm = q.norm();
        if !norm.is_finite() || norm == 0.0 || !position.iter().all(|v| v.is_finite()) {
            return None;
        }
        let orientation = if (norm - 1.0).abs() <= 1e-12 {
            UnitQuaternion::new_unchecked(q)
        } else {
            UnitQuaternion::new_normalize(q)
        };
        Some(Self::new(position, orientation))
    }

    /// Orientation as `[w, x, y, z]`.
    pub fn wxyz(&self) -> [f64; 4] {
        let q = self.orientation.quaternion();
        [q.w, q.i, q.j, q.k]
    }

    /// `self ∘ other`: applies `other` in the frame of `self`.
    pub fn compose(&self, other: &Pose) -> Pose {
        let position = self.position + self.orientation * other.position;
        let q = self.orientation.quaternion() * other.orientation.quaternion();
        Pose {
            position,
            orientation: UnitQuaternion::new_normalize(q),
        }
    }

    pub fn inverse(&self) -> Pose {
        let inv = self.orientation.inverse();
        Pose {
            position: -(inv * self.position),
            orientation: inv,
        }
    }

    pub fn transform_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.position + self.orientation * p
    }

    /// Rotation vector (axis times angle, world frame) taking `self`'s
    /// orientation to `target`'s, along the shortest arc.
    pub fn rotation_error_to(&self, target: &Pose) -> Vector3<f64> {
        let delta = target.orientation * self.orientation.inverse();
        let q = delta.quaternion();
        // Pick the hemisphere with w >= 0 so the log is the short way round.
        let (w, v) = if q.w < 0.0 {
            (-q.w, -q.imag())
        } else {
            (q.w, q.imag())
        };
        let s = v.norm();
        if s < 1e-12 {
            return 2.0 * v;
        }
        let angle = 2.0 * s.atan2(w);
        v * (angle / s)
    }

    pub fn quaternion_norm(&self) -> f64 {
        self.orientation.quaternion().norm()
    }

    pub fn is_finite(&self) -> bool {
        self.position.iter().all(|v| v.is_finite()) && self.wxyz().iter().all(|v| v.is_finite())
    }
}

#[derive(Serialize, Deserialize)]
struct PoseRepr {
    position: [f64; 3],
    orientation: [f64; 4],
}

impl Serialize for Pose {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        PoseRepr {
            position: [self.position.x, self.position.y, self.position.z],
            orientation: self.wxyz(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Pose {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let repr = PoseRepr::deserialize(deserializer)?;
        Pose::from_wxyz(Vector3::from(repr.position), repr.orientation)
            .ok_or_else(|| serde::de::Error::custom("pose has a degenerate quaternion"))
    }
}
