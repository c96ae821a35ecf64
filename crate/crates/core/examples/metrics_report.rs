//! Cohort statistics. Reads event logs given on the command line (the
//! `events.log` written by `twinlink replay`); with no arguments it makes up
//! a cohort of synthetic sessions.
//!
//! cargo run --example metrics_report -- out/events.log other/events.log

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use twinlink::metrics::{
    aggregate_cohort, cohort_table, compute_session_stats, parse_event_log,
    tower_population_summary, SessionLog, SessionStats,
};
use twinlink::twin::{EventKind, TaskEvent};

/// One operator: picks until the clock runs out, dropping now and then.
fn synthetic_session(rng: &mut ChaCha8Rng) -> Vec<TaskEvent> {
    let skill = rng.random_range(0.6..0.95);
    let mut t = 0.0;
    let mut events = vec![];
    let mut stacked = 0;
    let mut push = |kind, cube_id, t| events.push(TaskEvent { kind, cube_id, timestamp: t });
    while t < 540.0 {
        let cube = if stacked < 3 { stacked } else { 0 };
        t += rng.random_range(8.0..20.0);
        push(EventKind::Pick, Some(cube), t);
        t += rng.random_range(5.0..12.0);
        if rng.random_bool(skill) {
            push(EventKind::Place, Some(cube), t);
            stacked += 1;
            if stacked == 3 {
                push(EventKind::TowerComplete, None, t);
                push(EventKind::Reset, None, t);
                stacked = 0;
            }
        } else {
            push(EventKind::Drop, Some(cube), t);
        }
    }
    events
}

fn main() -> anyhow::Result<()> {
    let paths: Vec<String> = std::env::args().skip(1).collect();
    let logs: Vec<Vec<TaskEvent>> = if paths.is_empty() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        (0..12).map(|_| synthetic_session(&mut rng)).collect()
    } else {
        paths
            .iter()
            .map(|p| Ok(parse_event_log(&std::fs::read_to_string(p)?)?))
            .collect::<anyhow::Result<_>>()?
    };
    let sessions: Vec<SessionStats> = logs
        .into_iter()
        .map(|events| compute_session_stats(&SessionLog { events, session_duration: 600.0 }))
        .collect::<Result<_, _>>()?;
    for (i, s) in sessions.iter().enumerate() {
        println!(
            "session {i:2}: {:2} picks, {:2} places, {:2} drops, {} towers",
            s.picks, s.places, s.drops, s.towers
        );
    }
    println!();
    print!("{}", cohort_table(&aggregate_cohort(&sessions)?));
    println!();
    for level in tower_population_summary(&sessions) {
        println!("{level:?}");
    }
    Ok(())
}
