//! Front-end operations behind the command-line tool: run a scenario,
//! build classifier datasets, train and evaluate, verify a run log.

pub mod dataset;
pub mod runlog;
pub mod summary;
pub mod verify;

use std::path::{Path, PathBuf};

use crate::error::HarnessError;
use crate::sim::{run, ScenarioConfig};

pub use dataset::{generate_dataset, train_eval, DatasetReport, EvalReport, ScenarioSet};
pub use runlog::{RunLog, RunMetadata, TickRecord};
pub use summary::{summarize, Outcome, StableInterval, Summary};
pub use verify::{verify, VerifyReport};

/// Sidecar path for a run log: `run.csv` -> `run.summary.json`.
pub fn summary_path(log_path: &Path) -> PathBuf {
    log_path.with_extension("summary.json")
}

/// Loads, runs, and writes the log plus its summary sidecar.
pub fn cmd_run(scenario: &Path, out: &Path, seed: Option<u64>) -> Result<(RunLog, Summary), HarnessError> {
    let mut cfg = ScenarioConfig::load(scenario)?;
    if let Some(seed) = seed {
        cfg = cfg.with_seed(seed);
    }
    let log = run(&cfg)?;
    let summary = summarize(&log);
    log.save(out)?;
    let json = serde_json::to_string_pretty(&summary).expect("summary serializes");
    let sidecar = summary_path(out);
    std::fs::write(&sidecar, json + "\n").map_err(|e| HarnessError::io(&sidecar, e))?;
    Ok((log, summary))
}

/// One-line verdict for a finished run.
pub fn verdict(summary: &Summary) -> String {
    let outcome = match &summary.outcome {
        Outcome::NoStableContact => "no stable contact".to_string(),
        Outcome::Converged => "converged".to_string(),
        Outcome::Stalled { saturated } => format!("stalled (saturated: {saturated})"),
        Outcome::NotConverged => "not converged".to_string(),
    };
    format!(
        "{}: {} ticks, {outcome}, final θ {}, {} contact loss(es), {} slip tick(s)",
        summary.scenario,
        summary.ticks,
        summary.final_theta.map_or("n/a".into(), |t| format!("{t:.4} rad")),
        summary.contact_losses,
        summary.slip_ticks
    )
}
