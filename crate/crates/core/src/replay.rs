//! Headless scripted replay: trajectory file in, event log and statistics
//! out.

use std::path::Path;

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::control_io::{parse_trajectory, RawPoseSample};
use crate::metrics::{compute_session_stats, format_event_log, session_csv, session_document};
use crate::metrics::{SessionLog, SessionStats};
use crate::scenario::Scenario;
use crate::session::Session;
use crate::twin::{Support, TaskEvent};

/// Simulated time kept running after the last sample has been delivered.
const SETTLE_TIME: f64 = 2.0;

/// Everything needed to reproduce a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: String,
    pub seed: u64,
    pub config_sha256: String,
    pub trajectory_sha256: String,
    pub arm: String,
    pub ticks: u64,
    pub simulated_seconds: f64,
}

#[derive(Debug, Clone)]
pub struct ReplayOutput {
    pub events: Vec<TaskEvent>,
    pub stats: SessionStats,
    pub manifest: Manifest,
}

impl ReplayOutput {
    pub fn event_log(&self) -> String {
        format_event_log(&self.events)
    }
}

/// Runs `samples` through the full pipeline at fixed ticks.
pub fn run_replay(
    scenario: &Scenario,
    samples: &[RawPoseSample],
    seed: u64,
) -> anyhow::Result<ReplayOutput> {
    run_replay_observed(scenario, samples, seed, |_| {})
}

/// Like [`run_replay`], calling `observe` after every tick.
pub fn run_replay_observed(
    scenario: &Scenario,
    samples: &[RawPoseSample],
    seed: u64,
    mut observe: impl FnMut(&Session),
) -> anyhow::Result<ReplayOutput> {
    let mut session = Session::new(scenario.clone(), seed)?;
    let lag = scenario.latency.delay + scenario.latency.jitter;
    let last = samples.last().map_or(0.0, |s| s.timestamp);
    let end = (last + lag + SETTLE_TIME).min(scenario.task.session_duration);
    let mut next = 0;
    let mut ticks = 0u64;
    while session.time() < end {
        while next < samples.len() && samples[next].timestamp <= session.time() + 1e-9 {
            session.submit_sample(&samples[next]);
            next += 1;
        }
        session.step()?;
        ticks += 1;
        check_invariants(&session).with_context(|| format!("at t = {:.4} s", session.time()))?;
        observe(&session);
    }
    let events = session.events().to_vec();
    let stats = compute_session_stats(&SessionLog {
        events: events.clone(),
        session_duration: session.time(),
    })?;
    Ok(ReplayOutput {
        events,
        stats,
        manifest: Manifest {
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed,
            config_sha256: scenario.config_hash.clone(),
            trajectory_sha256: String::new(),
            arm: scenario.arm.name.clone(),
            ticks,
            simulated_seconds: session.time(),
        },
    })
}

fn check_invariants(session: &Session) -> anyhow::Result<()> {
    let arm = &session.scenario().arm;
    if !arm.within_limits(&session.joints().positions) {
        bail!("joint positions left their limits");
    }
    let world = session.world();
    let grasped = world.cubes.iter().filter(|c| c.support == Support::Grasped).count();
    if grasped > 1 {
        bail!("{grasped} cubes grasped at once");
    }
    for c in &world.cubes {
        if c.pose.position.z < 0.5 * c.side - 1e-12 {
            bail!("cube {} below the table", c.id);
        }
    }
    Ok(())
}

/// Loads both inputs, replays, and writes `events.log`, `stats.toml`,
/// `stats.csv` and `manifest.toml` into `out_dir`. Nothing is written
/// unless the run completes.
pub fn replay_files(
    config: &Path,
    trajectory: &Path,
    out_dir: &Path,
    seed: Option<u64>,
) -> anyhow::Result<ReplayOutput> {
    let scenario = Scenario::load(config)?;
    let traj_text = std::fs::read_to_string(trajectory)
        .with_context(|| format!("reading trajectory {}", trajectory.display()))?;
    let samples = parse_trajectory(&traj_text)
        .with_context(|| format!("trajectory {}", trajectory.display()))?;
    let seed = seed.unwrap_or(scenario.seed);
    let mut out = run_replay(&scenario, &samples, seed)?;
    out.manifest.trajectory_sha256 = hex::encode(Sha256::digest(traj_text.as_bytes()));

    std::fs::create_dir_all(out_dir)
        .with_context(|| format!("creating {}", out_dir.display()))?;
    let files = [
        ("events.log", out.event_log()),
        ("stats.toml", session_document(&out.stats)),
        ("stats.csv", session_csv(&out.stats)),
        ("manifest.toml", toml::to_string(&out.manifest)?),
    ];
    for (name, body) in files {
        let path = out_dir.join(name);
        std::fs::write(&path, body).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(out)
}
