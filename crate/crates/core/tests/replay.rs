mod common;

use std::process::Command;

use twinlink::control_io::load_trajectory;
use twinlink::replay::{replay_files, run_replay, Manifest};
use twinlink::twin::EventKind;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_twinlink"))
}

#[test]
fn one_tower_replay_writes_a_reproducible_run() {
    let dir = tempfile::tempdir().unwrap();
    let config = common::data_dir().join("scenarios/default.toml");
    let traj = common::data_dir().join("trajectories/one_tower.traj");
    let out = dir.path().join("run");
    let result = replay_files(&config, &traj, &out, None).unwrap();

    let count = |k| result.events.iter().filter(|e| e.kind == k).count();
    assert_eq!(count(EventKind::Pick), 3);
    assert_eq!(count(EventKind::Place), 3);
    assert_eq!(count(EventKind::TowerComplete), 1);
    assert_eq!(result.stats.places + result.stats.drops, result.stats.picks);

    for name in ["events.log", "stats.toml", "stats.csv", "manifest.toml"] {
        assert!(out.join(name).is_file(), "{name} missing");
    }
    let manifest: Manifest =
        toml::from_str(&std::fs::read_to_string(out.join("manifest.toml")).unwrap()).unwrap();
    assert_eq!(manifest, result.manifest);
    assert_eq!(manifest.seed, 7);
    assert_eq!(manifest.trajectory_sha256.len(), 64);

    // The manifest's inputs and seed reproduce the log exactly.
    let scenario = common::scenario("default.toml");
    assert_eq!(manifest.config_sha256, scenario.config_hash);
    let again = run_replay(&scenario, &load_trajectory(&traj).unwrap(), manifest.seed).unwrap();
    assert_eq!(
        std::fs::read_to_string(out.join("events.log")).unwrap(),
        again.event_log()
    );
}

#[test]
fn missing_trajectory_fails_without_output() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("never");
    let output = bin()
        .args(["replay", "--config"])
        .arg(common::data_dir().join("scenarios/default.toml"))
        .arg("--trajectory")
        .arg(dir.path().join("nope.traj"))
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert!(!output.status.success());
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("nope.traj"), "stderr: {stderr}");
    assert!(!out.exists());
}

#[test]
fn bad_trajectory_line_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let traj = dir.path().join("bad.traj");
    std::fs::write(&traj, "0 0 0 0 1 0 0 0 0\n0.5 0 0 0 1 0 0 0\n").unwrap();
    let out = dir.path().join("out");
    let err = replay_files(
        &common::data_dir().join("scenarios/default.toml"),
        &traj,
        &out,
        None,
    )
    .unwrap_err();
    assert!(format!("{err:#}").contains("line 2"), "{err:#}");
    assert!(!out.exists());
}

#[test]
fn scenario_files_are_not_modified() {
    let config = common::data_dir().join("scenarios/fast.toml");
    let before = std::fs::read(&config).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let traj = dir.path().join("still.traj");
    std::fs::write(&traj, "0 0 0 0 1 0 0 0 0\n1 0 0 0 1 0 0 0 0\n").unwrap();
    let output = bin()
        .args(["replay", "--seed", "3", "--config"])
        .arg(&config)
        .arg("--trajectory")
        .arg(&traj)
        .arg("--out")
        .arg(dir.path().join("out"))
        .output()
        .unwrap();
    assert!(output.status.success());
    assert_eq!(std::fs::read(&config).unwrap(), before);
    let manifest = std::fs::read_to_string(dir.path().join("out/manifest.toml")).unwrap();
    assert!(manifest.contains("seed = 3"));
}

#[test]
fn bench_subcommand_reports_timings() {
    let output = bin().args(["bench", "--solver-instances", "50"]).output().unwrap();
    assert!(output.status.success());
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(stdout.starts_with("50 instances"), "{stdout}");
}
