//! Scenario configuration: one TOML file naming the arm description and
//! holding the motion, task, latency and workspace settings.
//!
//! ```toml
//! seed = 7
//! [arm]
//! path = "../arms/baxter_like.toml"   # relative to this file
//! [motion]
//! attractor_gain = 30.0
//! [task]
//! zone_center = [0.58, 0.0]
//! [latency]
//! delay = 0.5
//! [workspace]
//! min = [0.1, -0.5, 0.0]
//! max = [0.9, 0.5, 0.5]
//! [[plane]]
//! normal = [0.0, 0.0, 1.0]
//! offset = 0.0
//! margin = 0.05
//! ```
//!
//! Every section except `[arm]` and `[workspace]` may be omitted and falls
//! back to its defaults.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use nalgebra::Vector3;
use serde::Deserialize;
use sha2::{Digest, Sha256};

use crate::bus::schema::{ArmChain, PlaneMsg, Rates, Scene};
use crate::bus::LatencyConfig;
use crate::control_io::Workspace;
use crate::kinematics::{load_arm_description, ArmModel};
use crate::motion::{MotionConfig, SafetyPlane};
use crate::pose::Pose;
use crate::twin::TaskConfig;

pub const PHYSICS_HZ: f64 = 120.0;
pub const INPUT_HZ: f64 = 60.0;
pub const PUBLISH_HZ: f64 = 30.0;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Document {
    #[serde(default)]
    seed: u64,
    arm: ArmSection,
    #[serde(default)]
    motion: MotionConfig,
    #[serde(default)]
    task: TaskConfig,
    #[serde(default)]
    latency: LatencyConfig,
    workspace: Workspace,
    #[serde(rename = "plane", default)]
    planes: Vec<PlaneMsg>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ArmSection {
    path: PathBuf,
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub seed: u64,
    pub arm: ArmModel,
    pub arm_path: PathBuf,
    pub motion: MotionConfig,
    pub task: TaskConfig,
    pub latency: LatencyConfig,
    pub workspace: Workspace,
    pub planes: Vec<SafetyPlane>,
    /// Hex SHA-256 of the scenario file followed by the arm file.
    pub config_hash: String,
}

impl Scenario {
    pub fn load(path: impl AsRef<Path>) -> anyhow::Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading scenario {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_str(&text, base).with_context(|| format!("scenario {}", path.display()))
    }

    /// Parses a scenario whose relative arm path resolves against `base`.
    pub fn from_str(text: &str, base: &Path) -> anyhow::Result<Self> {
        let doc: Document = toml::from_str(text).map_err(|e| anyhow!("{e}"))?;
        let arm_path = base.join(&doc.arm.path);
        let arm_text = std::fs::read_to_string(&arm_path)
            .with_context(|| format!("reading arm description {}", arm_path.display()))?;
        let arm = load_arm_description(&arm_text)
            .with_context(|| format!("arm description {}", arm_path.display()))?;
        doc.motion.validate()?;
        doc.task.validate()?;
        doc.latency.validate()?;
        if !doc.workspace.is_valid() {
            return Err(anyhow!("workspace min must not exceed max"));
        }
        let planes = doc
            .planes
            .iter()
            .map(|p| SafetyPlane::new(Vector3::from(p.normal), p.offset, p.margin))
            .collect::<Result<Vec<_>, _>>()?;
        let mut hasher = Sha256::new();
        hasher.update(text.as_bytes());
        hasher.update(arm_text.as_bytes());
        Ok(Self {
            seed: doc.seed,
            arm,
            arm_path,
            motion: doc.motion,
            task: doc.task,
            latency: doc.latency,
            workspace: doc.workspace,
            planes,
            config_hash: hex::encode(hasher.finalize()),
        })
    }

    /// Control-point pose at the home configuration; the calibration origin
    /// of every input stream maps here.
    pub fn rest_target(&self) -> Pose {
        self.arm
            .forward_kinematics(&self.arm.home_configuration)
            .expect("home has one value per joint")
            .control_point
    }

    /// Constants a client needs: arm chain, task layout, limits and rates.
    pub fn scene(&self) -> Scene {
        Scene {
            arm: ArmChain::from(&self.arm),
            task: self.task.clone(),
            workspace: self.workspace,
            planes: self
                .planes
                .iter()
                .map(|p| PlaneMsg {
                    normal: p.normal.into(),
                    offset: p.offset,
                    margin: p.margin,
                })
                .collect(),
            latency: self.latency,
            rates: Rates {
                physics_hz: PHYSICS_HZ,
                input_hz: INPUT_HZ,
                publish_hz: PUBLISH_HZ,
            },
            rest_target: (&self.rest_target()).into(),
        }
    }
}
