//! `fingerforce`: run tactile force-direction scenarios, build classifier
//! datasets, train the stability model and verify run logs.
//!
//! Exit codes: 0 success, 1 usage, configuration or IO error or failed
//! verification, 2 numerical blowup during simulation.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};

use fingerforce::error::{HarnessError, SimError};
use fingerforce::harness::{self, generate_dataset, train_eval, verify, RunLog, ScenarioSet};
use fingerforce::sim::scenario::resolve;
use fingerforce::stability::{read_dataset, write_dataset, TrainConfig};
use fingerforce::tactile::TaxelLayout;

#[derive(Parser)]
#[command(name = "fingerforce", version, about = "Tactile force-direction control simulator")]
#[command(after_help = "Files that are not found relative to the working directory or the \
referencing file are searched in the colon-separated directories of FINGERFORCE_PATH.")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario, writing the run log CSV and a summary JSON sidecar.
    Run {
        scenario: PathBuf,
        #[arg(long, default_value = "run.csv")]
        out: PathBuf,
        /// Override the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Simulate a scenario set and write windowed features with labels.
    GenDataset {
        set: PathBuf,
        #[arg(long, default_value = "dataset.csv")]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Worker threads for independent runs.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// 80/20 split, train the stability model, report held-out metrics.
    TrainEval {
        dataset: PathBuf,
        /// Model file to write.
        #[arg(long, default_value = "model.toml")]
        out: PathBuf,
        /// Split seed.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Permute the labels first (chance-level control).
        #[arg(long)]
        shuffle_labels: bool,
    },
    /// Check the invariant suite on a run log.
    Verify { runlog: PathBuf },
    /// Write the reference 30-taxel fingertip layout.
    GenLayout {
        #[arg(long, default_value = "reference_30.toml")]
        out: PathBuf,
    },
}

enum Failure {
    Blowup(anyhow::Error),
    Other(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        let blowup = e.chain().any(|c| {
            matches!(c.downcast_ref::<SimError>(), Some(SimError::NumericalBlowup { .. }))
                || matches!(
                    c.downcast_ref::<HarnessError>(),
                    Some(HarnessError::Sim(SimError::NumericalBlowup { .. }))
                )
        });
        if blowup {
            Failure::Blowup(e)
        } else {
            Failure::Other(e)
        }
    }
}

fn locate(path: &Path) -> anyhow::Result<PathBuf> {
    if path.is_file() {
        return Ok(path.to_path_buf());
    }
    resolve(Path::new(""), path).map_err(anyhow::Error::from)
}

fn execute(cli: Cli) -> Result<bool, Failure> {
    match cli.command {
        Command::Run { scenario, out, seed } => {
            let scenario = locate(&scenario)?;
            let (_, summary) = harness::cmd_run(&scenario, &out, seed)
                .map_err(anyhow::Error::from)
                .map_err(Failure::from)?;
            println!("{}", harness::verdict(&summary));
            Ok(true)
        }
        Command::GenDataset { set, out, seed, jobs } => {
            let set_path = locate(&set)?;
            let (set, base) = ScenarioSet::load(&set_path).map_err(anyhow::Error::from)?;
            let (data, report) = generate_dataset(&set, &base, seed, jobs)
                .map_err(anyhow::Error::from)
                .map_err(Failure::from)?;
            let file = std::fs::File::create(&out).with_context(|| format!("cannot create {}", out.display()))?;
            write_dataset(std::io::BufWriter::new(file), &data).map_err(anyhow::Error::from)?;
            println!(
                "{}: {} runs, {} stable / {} unstable windows, wrote {} samples ({:.1}% stable) to {}",
                set.name,
                report.runs,
                report.stable_windows,
                report.unstable_windows,
                report.samples,
                100.0 * report.positive_fraction,
                out.display()
            );
            Ok(true)
        }
        Command::TrainEval {
            dataset,
            out,
            seed,
            shuffle_labels,
        } => {
            let data = read_dataset(&locate(&dataset)?).map_err(anyhow::Error::from)?;
            let (model, report) =
                train_eval(&data, seed, shuffle_labels, &TrainConfig::default()).map_err(anyhow::Error::from)?;
            model.save(&out).map_err(anyhow::Error::from)?;
            println!(
                "train {} / test {}: accuracy {:.4}, precision {:.4}, recall {:.4}{}; model written to {}",
                report.train_size,
                report.test_size,
                report.accuracy,
                report.precision,
                report.recall,
                if shuffle_labels { " (shuffled labels)" } else { "" },
                out.display()
            );
            Ok(true)
        }
        Command::Verify { runlog } => {
            let log = RunLog::load(&runlog).map_err(anyhow::Error::from)?;
            let report = verify::verify(&log);
            print!("{}", verify::render(&report));
            Ok(report.passed())
        }
        Command::GenLayout { out } => {
            let layout = TaxelLayout::reference();
            std::fs::write(&out, layout.to_toml_string()).with_context(|| format!("cannot write {}", out.display()))?;
            println!("wrote {} taxels to {}", layout.len(), out.display());
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    // usage errors exit 1: code 2 is reserved for numerical blowup
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match execute(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(Failure::Blowup(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Other(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
