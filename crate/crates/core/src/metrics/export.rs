//! Text exports: the line-oriented event log, session stats documents and
//! the cohort table.

use std::fmt::Write as _;

use super::{CohortStats, MetricsError, Rate, SessionStats};
use crate::twin::{EventKind, TaskEvent};

/// One event per line: `<timestamp> <kind> <cube_id or ->`.
///
/// Timestamps use Rust's shortest round-trip float formatting, so a parsed
/// log reproduces the original values bit for bit.
pub fn format_event_log(events: &[TaskEvent]) -> String {
    let mut out = String::new();
    for e in events {
        let cube = e.cube_id.map_or_else(|| "-".to_string(), |c| c.to_string());
        let _ = writeln!(out, "{} {} {}", e.timestamp, e.kind.as_str(), cube);
    }
    out
}

pub fn parse_event_log(text: &str) -> Result<Vec<TaskEvent>, MetricsError> {
    let mut events = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let err = |message: String| MetricsError::Parse {
            line: line_no,
            message,
        };
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let parts: Vec<&str> = trimmed.split_whitespace().collect();
        let [t, kind, cube] = parts[..] else {
            return Err(err(format!("expected 3 fields, found {}", parts.len())));
        };
        let timestamp = t.parse::<f64>().map_err(|e| err(e.to_string()))?;
        let kind = EventKind::parse(kind).ok_or_else(|| err(format!("unknown event kind '{kind}'")))?;
        let cube_id = match cube {
            "-" => None,
            c => Some(c.parse::<usize>().map_err(|e| err(e.to_string()))?),
        };
        events.push(TaskEvent {
            kind,
            cube_id,
            timestamp,
        });
    }
    Ok(events)
}

/// Session stats as a TOML document.
pub fn session_document(stats: &SessionStats) -> String {
    toml::to_string(stats).expect("session stats serialize")
}

/// Session stats as CSV: `metric,value`, undefined rates left empty.
pub fn session_csv(stats: &SessionStats) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["metric", "value"]).expect("in-memory csv");
    let counts = [
        ("picks", stats.picks),
        ("places", stats.places),
        ("drops", stats.drops),
        ("collapses", stats.collapses),
        ("towers", stats.towers),
        ("unresolved_picks", stats.unresolved_picks),
    ];
    for (name, v) in counts {
        w.write_record([name, &v.to_string()]).expect("in-memory csv");
    }
    for rate in Rate::ALL {
        let v = stats.rate(rate).map(|v| v.to_string()).unwrap_or_default();
        w.write_record([rate.label(), &v]).expect("in-memory csv");
    }
    for (k, t) in stats.tower_times.iter().enumerate() {
        w.write_record([format!("tower_time_{}", k + 1), t.to_string()])
            .expect("in-memory csv");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf8")
}

/// Human-readable cohort table: one row per rate, columns
/// `Min | Mean ± Std | Max`.
pub fn cohort_table(cohort: &CohortStats) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "| | Min | Mean ± Std | Max |");
    let _ = writeln!(out, "|---|---|---|---|");
    for row in &cohort.rows {
        match row.summary {
            Some(s) => {
                let _ = writeln!(
                    out,
                    "| {} | {:.2}% | {:.2}% ± {:.2}% | {:.2}% |",
                    row.rate.label(),
                    s.min,
                    s.mean,
                    s.std,
                    s.max
                );
            }
            None => {
                let _ = writeln!(out, "| {} | n/a | n/a | n/a |", row.rate.label());
            }
        }
    }
    out
}

/// Cohort statistics as CSV: `rate,min,mean,std,max,excluded`.
pub fn cohort_csv(cohort: &CohortStats) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["rate", "min", "mean", "std", "max", "excluded"])
        .expect("in-memory csv");
    for row in &cohort.rows {
        let cells = match row.summary {
            Some(s) => [s.min, s.mean, s.std, s.max].map(|v| v.to_string()),
            None => Default::default(),
        };
        let mut record = vec![row.rate.label().to_string()];
        record.extend(cells);
        record.push(row.excluded.to_string());
        w.write_record(&record).expect("in-memory csv");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf8")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::{aggregate_cohort, compute_session_stats, SessionLog};

    fn events() -> Vec<TaskEvent> {
        vec![
            TaskEvent {
                kind: EventKind::Reset,
                cube_id: None,
                timestamp: 0.0,
            },
            TaskEvent {
                kind: EventKind::Pick,
                cube_id: Some(2),
                timestamp: 1.0 / 3.0,
            },
            TaskEvent {
                kind: EventKind::Place,
                cube_id: Some(2),
                timestamp: 12.008333333333333,
            },
        ]
    }

    #[test]
    fn event_log_round_trips_bitwise() {
        let text = format_event_log(&events());
        assert!(text.starts_with("0 Reset -\n"));
        let back = parse_event_log(&text).unwrap();
        assert_eq!(back, events());
        assert_eq!(back[1].timestamp.to_bits(), (1.0f64 / 3.0).to_bits());
    }

    #[test]
    fn event_log_errors_carry_line() {
        assert_eq!(
            parse_event_log("0 Reset -\n1 Bogus 2\n").unwrap_err(),
            MetricsError::Parse {
                line: 2,
                message: "unknown event kind 'Bogus'".into()
            }
        );
        assert!(parse_event_log("1 Pick").is_err());
    }

    #[test]
    fn cohort_exports_have_table_shape() {
        let stats = compute_session_stats(&SessionLog {
            events: events(),
            session_duration: 600.0,
        })
        .unwrap();
        let cohort = aggregate_cohort(&[stats.clone()]).unwrap();
        let table = cohort_table(&cohort);
        assert_eq!(table.lines().count(), 2 + 4);
        assert!(table.contains("| Placing Rate | 100.00% | 100.00% ± 0.00% | 100.00% |"));
        let csv = cohort_csv(&cohort);
        assert_eq!(csv.lines().count(), 5);
        assert!(session_csv(&stats).contains("Placing Rate,100"));
        assert!(session_document(&stats).contains("picks = 1"));
    }
}
