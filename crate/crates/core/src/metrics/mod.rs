//! Session and cohort statistics computed from task event logs.
//!
//! Rates are percentages. Definitions:
//!
//! * placing rate = places / picks, dropping rate = drops / picks. Every
//!   resolved pick ends in exactly one of the two, so they are complementary.
//! * collapse rate = collapses / places.
//! * still-in-place rate = places never displaced afterwards / picks. A place
//!   counts as displaced when a `Collapse` of the same cube follows it before
//!   that cube is picked again or the task is reset.
//!
//! A pick that is still open when a `Reset` arrives or the log ends is not
//! counted; it is reported separately as unresolved.

mod export;

pub use export::{
    cohort_csv, cohort_table, format_event_log, parse_event_log, session_csv, session_document,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::twin::{EventKind, TaskEvent};

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("corrupt event log at event {index}: {reason}")]
    LogCorrupt { index: usize, reason: String },
    #[error("no session has defined rates")]
    NoUsableSessions,
    #[error("event log line {line}: {message}")]
    Parse { line: usize, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionLog {
    pub events: Vec<TaskEvent>,
    pub session_duration: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionStats {
    pub picks: usize,
    pub places: usize,
    pub drops: usize,
    pub collapses: usize,
    pub towers: usize,
    pub unresolved_picks: usize,
    pub placing_rate: Option<f64>,
    pub dropping_rate: Option<f64>,
    pub collapse_rate: Option<f64>,
    pub still_in_place_rate: Option<f64>,
    /// Seconds from the preceding reset (or session start) to each tower.
    pub tower_times: Vec<f64>,
}

impl SessionStats {
    pub fn rate(&self, rate: Rate) -> Option<f64> {
        match rate {
            Rate::Placing => self.placing_rate,
            Rate::Dropping => self.dropping_rate,
            Rate::Collapse => self.collapse_rate,
            Rate::StillInPlace => self.still_in_place_rate,
        }
    }
}

/// The four rates reported per session, in table order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Rate {
    Placing,
    Dropping,
    Collapse,
    StillInPlace,
}

impl Rate {
    pub const ALL: [Rate; 4] = [Rate::Placing, Rate::Dropping, Rate::Collapse, Rate::StillInPlace];

    pub fn label(&self) -> &'static str {
        match self {
            Rate::Placing => "Placing Rate",
            Rate::Dropping => "Dropping Rate",
            Rate::Collapse => "Collapse Rate",
            Rate::StillInPlace => "Still in Place Rate",
        }
    }
}

fn percent(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| 100.0 * num as f64 / den as f64)
}

pub fn compute_session_stats(log: &SessionLog) -> Result<SessionStats, MetricsError> {
    let corrupt = |index: usize, reason: &str| MetricsError::LogCorrupt {
        index,
        reason: reason.to_string(),
    };
    let mut picks = 0;
    let mut places = 0;
    let mut drops = 0;
    let mut collapses = 0;
    let mut unresolved = 0;
    let mut tower_times = Vec::new();
    let mut open_pick: Option<Option<usize>> = None;
    let mut epoch = 0.0;
    let mut last_t = f64::NEG_INFINITY;
    // Places not yet displaced, by cube id.
    let mut standing: Vec<Option<usize>> = Vec::new();
    let mut displaced_places = 0;

    for (i, e) in log.events.iter().enumerate() {
        if !(e.timestamp >= last_t) {
            return Err(corrupt(i, "timestamps decrease"));
        }
        last_t = e.timestamp;
        match e.kind {
            EventKind::Pick => {
                if open_pick.is_some() {
                    return Err(corrupt(i, "pick before the previous pick was resolved"));
                }
                open_pick = Some(e.cube_id);
                // Picking a cube up ends its previous placement's watch.
                standing.retain(|c| *c != e.cube_id);
            }
            EventKind::Place | EventKind::Drop => {
                if open_pick.take().is_none() {
                    return Err(corrupt(i, "outcome without a pick"));
                }
                picks += 1;
                if e.kind == EventKind::Place {
                    places += 1;
                    standing.push(e.cube_id);
                } else {
                    drops += 1;
                }
            }
            EventKind::Collapse => {
                collapses += 1;
                if let Some(pos) = standing.iter().position(|c| *c == e.cube_id) {
                    standing.remove(pos);
                    displaced_places += 1;
                }
            }
            EventKind::TowerComplete => tower_times.push(e.timestamp - epoch),
            EventKind::Reset => {
                if open_pick.take().is_some() {
                    unresolved += 1;
                }
                standing.clear();
                epoch = e.timestamp;
            }
        }
    }
    if open_pick.is_some() {
        unresolved += 1;
    }

    let placing_rate = percent(places, picks);
    Ok(SessionStats {
        picks,
        places,
        drops,
        collapses,
        towers: tower_times.len(),
        unresolved_picks: unresolved,
        placing_rate,
        // Complement of the placing rate so the pair sums to exactly 100.
        dropping_rate: placing_rate.map(|p| 100.0 - p),
        collapse_rate: if picks > 0 { percent(collapses, places) } else { None },
        still_in_place_rate: percent(places - displaced_places, picks),
        tower_times,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateSummary {
    pub min: f64,
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
    pub max: f64,
}

impl RateSummary {
    fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        Some(Self {
            min: values.iter().copied().fold(f64::INFINITY, f64::min),
            mean,
            std: var.sqrt(),
            max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateRow {
    pub rate: Rate,
    pub summary: Option<RateSummary>,
    /// Sessions left out because this rate was undefined for them.
    pub excluded: usize,
}

/// Table-shaped cohort statistics: one row per [`Rate`], columns min,
/// mean ± std, max.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortStats {
    pub sessions: usize,
    pub rows: Vec<RateRow>,
}

impl CohortStats {
    pub fn row(&self, rate: Rate) -> &RateRow {
        self.rows.iter().find(|r| r.rate == rate).expect("all rates present")
    }
}

pub fn aggregate_cohort(sessions: &[SessionStats]) -> Result<CohortStats, MetricsError> {
    if !sessions.iter().any(|s| s.placing_rate.is_some()) {
        return Err(MetricsError::NoUsableSessions);
    }
    let rows = Rate::ALL
        .iter()
        .map(|&rate| {
            let values: Vec<f64> = sessions.iter().filter_map(|s| s.rate(rate)).collect();
            RateRow {
                rate,
                summary: RateSummary::of(&values),
                excluded: sessions.len() - values.len(),
            }
        })
        .collect();
    Ok(CohortStats {
        sessions: sessions.len(),
        rows,
    })
}

/// Share of sessions reaching the k-th tower and how long that tower took.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TowerLevel {
    pub k: usize,
    pub sessions: usize,
    pub population_percent: f64,
    pub mean_time: f64,
    /// Population variance of the k-th tower time.
    pub time_variance: f64,
}

pub fn tower_population_summary(sessions: &[SessionStats]) -> Vec<TowerLevel> {
    let total = sessions.len();
    let deepest = sessions.iter().map(|s| s.tower_times.len()).max().unwrap_or(0);
    (1..=deepest)
        .map(|k| {
            let times: Vec<f64> = sessions
                .iter()
                .filter_map(|s| s.tower_times.get(k - 1).copied())
                .collect();
            let n = times.len() as f64;
            let mean = times.iter().sum::<f64>() / n;
            let var = times.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / n;
            TowerLevel {
                k,
                sessions: times.len(),
                population_percent: 100.0 * times.len() as f64 / total as f64,
                mean_time: mean,
                time_variance: var,
            }
        })
        .collect()
}
