//! Per-run summary: stable intervals, contact losses, outcome.

use serde::{Deserialize, Serialize};

use crate::harness::runlog::{RunLog, TickRecord};
use crate::stability::Confusion;

/// θ below this counts as converged, radians.
pub const CONVERGED_THETA: f64 = 0.05;

/// A stall is declared when θ moves less than this over the tail of the
/// final stable interval.
pub const STALL_BAND: f64 = 0.01;

/// Length of that tail, seconds.
pub const STALL_WINDOW: f64 = 0.5;

/// A maximal run of consecutive `y = 1` ticks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StableInterval {
    pub start_tick: usize,
    /// inclusive
    pub end_tick: usize,
    pub theta_start: f64,
    pub theta_end: f64,
    pub theta_min: f64,
    /// `-d ln θ / dt` fitted by least squares, 1/s; `None` for single ticks
    pub decay_rate: Option<f64>,
    /// ground-truth contact held on every tick
    pub contact_held: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Outcome {
    /// the classifier never reported stable contact
    NoStableContact,
    /// the final stable interval ends with θ at or below the threshold
    Converged,
    /// θ parked above the threshold; `saturated` tells whether the torque
    /// clamp was active over the stalled tail (no torque margin left)
    Stalled {
        saturated: bool,
    },
    NotConverged,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub scenario: String,
    pub config_hash: String,
    pub ticks: usize,
    pub first_stable_tick: Option<usize>,
    pub intervals: Vec<StableInterval>,
    /// last logged θ inside a stable interval
    pub final_theta: Option<f64>,
    /// ground-truth in-contact to no-contact transitions after first touch
    pub contact_losses: usize,
    pub slip_ticks: usize,
    /// classifier `y` against ground truth "in contact and not slipping"
    pub confusion: Confusion,
    pub outcome: Outcome,
}

fn ln_slope(rows: &[TickRecord]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter_map(|r| r.theta.filter(|t| *t > 0.0).map(|t| (r.time, t.ln())))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let tm = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let vm = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let num: f64 = pts.iter().map(|(t, v)| (t - tm) * (v - vm)).sum();
    let den: f64 = pts.iter().map(|(t, _)| (t - tm) * (t - tm)).sum();
    (den > 0.0).then(|| -num / den)
}

/// Splits the `y = 1` ticks into maximal intervals.
pub fn stable_intervals(rows: &[TickRecord]) -> Vec<StableInterval> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < rows.len() {
        if rows[i].y != 1 {
            i += 1;
            continue;
        }
        let start = i;
        while i < rows.len() && rows[i].y == 1 {
            i += 1;
        }
        let slice = &rows[start..i];
        let thetas: Vec<f64> = slice.iter().map(|r| r.theta.unwrap_or(f64::NAN)).collect();
        out.push(StableInterval {
            start_tick: rows[start].tick,
            end_tick: rows[i - 1].tick,
            theta_start: thetas[0],
            theta_end: thetas[thetas.len() - 1],
            theta_min: thetas.iter().copied().fold(f64::INFINITY, f64::min),
            decay_rate: ln_slope(slice),
            contact_held: slice.iter().all(|r| r.in_contact),
        });
    }
    out
}

/// Tick indices at which ground-truth contact was lost.
pub fn contact_loss_ticks(rows: &[TickRecord]) -> Vec<usize> {
    rows.windows(2)
        .filter(|w| w[0].in_contact && !w[1].in_contact)
        .map(|w| w[1].tick)
        .collect()
}

pub fn summarize(log: &RunLog) -> Summary {
    let rows = &log.rows;
    let intervals = stable_intervals(rows);
    let mut confusion = Confusion::default();
    for r in rows {
        confusion.record(r.y, u8::from(r.in_contact && !r.slip));
    }
    let outcome = classify_outcome(rows, &intervals, log.meta.control_rate);
    Summary {
        scenario: log.meta.scenario.clone(),
        config_hash: log.meta.config_hash.clone(),
        ticks: rows.len(),
        first_stable_tick: intervals.first().map(|i| i.start_tick),
        final_theta: intervals.last().map(|i| i.theta_end),
        contact_losses: contact_loss_ticks(rows).len(),
        slip_ticks: rows.iter().filter(|r| r.slip).count(),
        intervals,
        confusion,
        outcome,
    }
}

fn classify_outcome(rows: &[TickRecord], intervals: &[StableInterval], rate: f64) -> Outcome {
    let Some(last) = intervals.last() else {
        return Outcome::NoStableContact;
    };
    if last.theta_end <= CONVERGED_THETA {
        return Outcome::Converged;
    }
    let tail_len = (STALL_WINDOW * rate).round() as usize;
    let span = last.end_tick + 1 - last.start_tick;
    if span >= tail_len && tail_len > 0 {
        let start = rows
            .iter()
            .position(|r| r.tick == last.end_tick + 1 - tail_len)
            .unwrap_or(0);
        let tail = &rows[start..start + tail_len];
        let thetas: Vec<f64> = tail.iter().filter_map(|r| r.theta).collect();
        let hi = thetas.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lo = thetas.iter().copied().fold(f64::INFINITY, f64::min);
        if hi - lo < STALL_BAND {
            return Outcome::Stalled {
                saturated: tail.iter().any(|r| r.saturated),
            };
        }
    }
    Outcome::NotConverged
}
