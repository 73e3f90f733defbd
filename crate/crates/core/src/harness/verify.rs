//! Invariant checks over a finished run log.

use serde::Serialize;

use crate::harness::runlog::RunLog;
use crate::harness::summary::{contact_loss_ticks, summarize, Outcome, Summary};

/// Allowed rise of θ above its running minimum inside a stable interval.
pub const THETA_RISE_TOL: f64 = 0.02;

/// Slack on the friction-cone check, newtons.
pub const CONE_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VerifyReport {
    pub checks: Vec<Check>,
    pub summary: Summary,
    /// loss episodes followed by a stable interval in which θ decreased
    pub recovered_losses: usize,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

fn check(name: &'static str, failures: Vec<String>, ok_detail: String) -> Check {
    let passed = failures.is_empty();
    let detail = if passed {
        ok_detail
    } else {
        let more = if failures.len() > 3 {
            format!(" (+{} more)", failures.len() - 3)
        } else {
            String::new()
        };
        format!("{}{more}", failures[..failures.len().min(3)].join("; "))
    };
    Check { name, passed, detail }
}

/// Runs the invariant suite. Pure: reads nothing but `log`.
pub fn verify(log: &RunLog) -> VerifyReport {
    let rows = &log.rows;
    let summary = summarize(log);
    let mut checks = Vec::new();

    // θ non-increasing up to tolerance on every stable interval
    let mut fails = Vec::new();
    for iv in &summary.intervals {
        let mut running = f64::INFINITY;
        for r in rows.iter().filter(|r| r.tick >= iv.start_tick && r.tick <= iv.end_tick) {
            match r.theta {
                Some(t) if t <= running + THETA_RISE_TOL => running = running.min(t),
                Some(t) => fails.push(format!("tick {}: θ {t:.4} above running min {running:.4}", r.tick)),
                None => fails.push(format!("tick {}: stable tick without θ", r.tick)),
            }
        }
    }
    checks.push(check(
        "theta_decay",
        fails,
        format!("{} stable interval(s)", summary.intervals.len()),
    ));

    let mut fails = Vec::new();
    if let Some(mu) = log.meta.friction {
        for r in rows {
            if r.tangential_force > mu * r.normal_force + CONE_TOL {
                fails.push(format!(
                    "tick {}: |F_t| {:.6} > μ|F_n| {:.6}",
                    r.tick,
                    r.tangential_force,
                    mu * r.normal_force
                ));
            }
        }
    }
    checks.push(check("friction_cone", fails, "all ticks inside the cone".into()));

    let mut fails = Vec::new();
    for r in rows.iter().filter(|r| !r.in_contact) {
        if r.f_ext.iter().any(|v| *v != 0.0) || r.normal_force != 0.0 || r.tangential_force != 0.0 || r.slip {
            fails.push(format!("tick {}: nonzero contact force without contact", r.tick));
        }
    }
    checks.push(check("f_ext_zero_off_contact", fails, "ok".into()));

    let mut fails = Vec::new();
    for r in rows {
        for i in 0..r.tau_cmd.len() {
            if r.tau_cmd[i] != r.tau_motion[i] + r.tau_task[i] {
                fails.push(format!("tick {} joint {}: τ_cmd ≠ τ_motion + τ_task", r.tick, i + 1));
            }
        }
        if r.y == 0 && r.tau_task.iter().any(|t| *t != 0.0) {
            fails.push(format!("tick {}: task torque while y = 0", r.tick));
        }
    }
    checks.push(check("tau_decomposition", fails, "exact on every tick".into()));

    let mut fails = Vec::new();
    for r in rows {
        let clipped = r.tau_applied.iter().zip(&r.tau_cmd).any(|(a, c)| a != c);
        let within = r.tau_applied.iter().zip(&r.tau_cmd).all(|(a, c)| a.abs() <= c.abs());
        if clipped != r.saturated || !within {
            fails.push(format!("tick {}: clamp and saturation flag disagree", r.tick));
        }
    }
    checks.push(check("torque_clamp", fails, "ok".into()));

    let mut fails = Vec::new();
    for (k, r) in rows.iter().enumerate() {
        if r.tick != k || r.time != k as f64 / log.meta.control_rate {
            fails.push(format!("row {k}: tick {} at t = {}", r.tick, r.time));
        }
    }
    checks.push(check("tick_spacing", fails, format!("{} ticks", rows.len())));

    let mut fails = Vec::new();
    for r in rows {
        if r.slip && !r.in_contact {
            fails.push(format!("tick {}: slip without contact", r.tick));
        }
        if r.y == 1 && !r.active {
            fails.push(format!("tick {}: stable without an active estimate", r.tick));
        }
    }
    checks.push(check("state_consistency", fails, "ok".into()));

    let recovered_losses = count_recoveries(log, &summary);
    VerifyReport {
        checks,
        summary,
        recovered_losses,
    }
}

fn count_recoveries(log: &RunLog, summary: &Summary) -> usize {
    let rows = &log.rows;
    contact_loss_ticks(rows)
        .into_iter()
        .filter(|&lost| {
            let Some(regained) = rows.iter().find(|r| r.tick > lost && r.in_contact).map(|r| r.tick) else {
                return false;
            };
            summary
                .intervals
                .iter()
                .any(|iv| iv.start_tick >= regained && iv.theta_end < iv.theta_start)
        })
        .count()
}

/// Multi-line human-readable report.
pub fn render(report: &VerifyReport) -> String {
    let mut out = String::new();
    for c in &report.checks {
        out.push_str(&format!(
            "{:<24} {}  {}\n",
            c.name,
            if c.passed { "PASS" } else { "FAIL" },
            c.detail
        ));
    }
    let s = &report.summary;
    let outcome = match &s.outcome {
        Outcome::NoStableContact => "no stable contact".to_string(),
        Outcome::Converged => "converged".to_string(),
        Outcome::Stalled { saturated } => format!("stalled (torque clamp active: {saturated})"),
        Outcome::NotConverged => "not converged".to_string(),
    };
    out.push_str(&format!(
        "outcome: {outcome}; final θ {}; stable intervals {}; contact losses {} ({} recovered); slip ticks {}\n",
        s.final_theta.map_or("n/a".into(), |t| format!("{t:.4}")),
        s.intervals.len(),
        s.contact_losses,
        report.recovered_losses,
        s.slip_ticks
    ));
    out
}
