//! Classifier datasets cut from simulated runs, and train/evaluate.

use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, SimError};
use crate::sim::{run_detailed, ScenarioConfig, StabilitySource};
use crate::stability::{evaluate, extract_features, train, Confusion, LogisticModel, Sample, TrainConfig};

/// A sweep of scenario variants. Every base scenario is run once per
/// friction coefficient and approach time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSet {
    pub name: String,
    /// scenario files, relative to the set file
    pub scenarios: Vec<PathBuf>,
    /// overrides the surface friction; empty keeps each scenario's own
    #[serde(default)]
    pub frictions: Vec<f64>,
    /// overrides the approach time; empty keeps each scenario's own
    #[serde(default)]
    pub approach_times: Vec<f64>,
    /// ticks between consecutive window ends
    #[serde(default = "one")]
    pub stride: usize,
    /// downsample the majority class to the minority size
    #[serde(default = "yes")]
    pub balance: bool,
}

fn one() -> usize {
    1
}

fn yes() -> bool {
    true
}

impl ScenarioSet {
    pub fn load(path: &Path) -> Result<(Self, PathBuf), HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        let set: Self = toml::from_str(&text).map_err(|e| HarnessError::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        if set.stride == 0 {
            return Err(HarnessError::Parse {
                path: path.to_path_buf(),
                message: "stride must be >= 1".into(),
            });
        }
        Ok((set, path.parent().unwrap_or(Path::new(".")).to_path_buf()))
    }

    /// Expands the sweep into concrete configs; run `k` gets seed `seed + k`.
    pub fn expand(&self, base: &Path, seed: u64) -> Result<Vec<ScenarioConfig>, HarnessError> {
        let mut out = Vec::new();
        for rel in &self.scenarios {
            let path = crate::sim::scenario::resolve(base, rel)?;
            let cfg = ScenarioConfig::load(&path)?;
            let frictions: Vec<Option<f64>> = if self.frictions.is_empty() {
                vec![None]
            } else {
                self.frictions.iter().copied().map(Some).collect()
            };
            let approaches: Vec<Option<f64>> = if self.approach_times.is_empty() {
                vec![None]
            } else {
                self.approach_times.iter().copied().map(Some).collect()
            };
            for mu in &frictions {
                for t in &approaches {
                    let mut c = cfg.clone();
                    if let (Some(mu), Some(s)) = (mu, c.file.surface.as_mut()) {
                        s.friction = *mu;
                    }
                    if let Some(t) = t {
                        c.file.approach_time = *t;
                    }
                    c.file.name = format!(
                        "{}/mu={}/approach={}",
                        c.file.name,
                        c.file.surface.as_ref().map_or(0.0, |s| s.friction),
                        c.file.approach_time
                    );
                    let k = out.len() as u64;
                    out.push(c.with_seed(seed.wrapping_add(k)));
                }
            }
        }
        Ok(out)
    }
}

/// Windowed samples of one run.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunSamples {
    pub stable: Vec<Sample>,
    pub unstable: Vec<Sample>,
}

/// Runs `cfg` and labels every window: 1 when every tick had contact and
/// no slip, 0 otherwise. Windows with no contact at all, or in which no
/// taxel ever responded, are skipped.
pub fn samples_from_run(cfg: &ScenarioConfig, stride: usize) -> Result<RunSamples, HarnessError> {
    let out = run_detailed(cfg)?;
    let w = cfg.features.window;
    let mut samples = RunSamples::default();
    if out.frames.len() < w {
        return Ok(samples);
    }
    let rows = &out.log.rows;
    for end in (w - 1..rows.len()).step_by(stride) {
        let span = &rows[end + 1 - w..=end];
        if !span.iter().any(|r| r.in_contact) {
            continue;
        }
        let features =
            extract_features(&out.frames[end + 1 - w..=end], &cfg.layout, &cfg.features).map_err(SimError::from)?;
        if features.0.iter().all(|v| *v == 0.0) {
            continue;
        }
        let stable = span.iter().all(|r| r.in_contact && !r.slip);
        let sample = Sample {
            features,
            label: u8::from(stable),
        };
        if stable {
            samples.stable.push(sample);
        } else {
            samples.unstable.push(sample);
        }
    }
    Ok(samples)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetReport {
    pub runs: usize,
    pub stable_windows: usize,
    pub unstable_windows: usize,
    /// after balancing
    pub samples: usize,
    pub positive_fraction: f64,
}

/// Generates a labeled dataset from every run of the set. Runs are fanned
/// out over `jobs` worker threads; results are merged in run order so the
/// output does not depend on `jobs`.
pub fn generate_dataset(
    set: &ScenarioSet,
    base: &Path,
    seed: u64,
    jobs: usize,
) -> Result<(Vec<Sample>, DatasetReport), HarnessError> {
    let mut configs = set.expand(base, seed)?;
    for c in configs.iter_mut() {
        // labels and gating both come from ground truth while collecting
        c.file.stability = StabilitySource::GroundTruth;
        c.model = None;
        c.refresh_hash();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| HarnessError::Workers(e.to_string()))?;
    let per_run: Vec<Result<RunSamples, HarnessError>> =
        pool.install(|| configs.par_iter().map(|c| samples_from_run(c, set.stride)).collect());

    let mut stable = Vec::new();
    let mut unstable = Vec::new();
    for r in per_run {
        let r = r?;
        stable.extend(r.stable);
        unstable.extend(r.unstable);
    }
    let (n_stable, n_unstable) = (stable.len(), unstable.len());
    if n_stable + n_unstable == 0 {
        return Err(HarnessError::EmptyDataset);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    if set.balance && n_stable > 0 && n_unstable > 0 {
        let keep = n_stable.min(n_unstable);
        stable.shuffle(&mut rng);
        unstable.shuffle(&mut rng);
        stable.truncate(keep);
        unstable.truncate(keep);
    }
    let mut data: Vec<Sample> = stable.into_iter().chain(unstable).collect();
    data.shuffle(&mut rng);
    let positives = data.iter().filter(|s| s.label == 1).count();
    let report = DatasetReport {
        runs: configs.len(),
        stable_windows: n_stable,
        unstable_windows: n_unstable,
        samples: data.len(),
        positive_fraction: positives as f64 / data.len() as f64,
    };
    Ok((data, report))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub train_size: usize,
    pub test_size: usize,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub confusion: Confusion,
    pub shuffled_labels: bool,
}

/// Seeded 80/20 split, training on the first part and scoring the rest.
/// With `shuffle_labels` the labels are permuted first, which should drive
/// accuracy to chance.
pub fn train_eval(
    data: &[Sample],
    split_seed: u64,
    shuffle_labels: bool,
    cfg: &TrainConfig,
) -> Result<(LogisticModel, EvalReport), HarnessError> {
    if data.is_empty() {
        return Err(HarnessError::EmptyDataset);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(split_seed);
    let mut data = data.to_vec();
    if shuffle_labels {
        let mut labels: Vec<u8> = data.iter().map(|s| s.label).collect();
        labels.shuffle(&mut rng);
        for (s, l) in data.iter_mut().zip(labels) {
            s.label = l;
        }
    }
    data.shuffle(&mut rng);
    let n_train = (data.len() as f64 * 0.8).round() as usize;
    let (train_set, test_set) = data.split_at(n_train.clamp(1, data.len().saturating_sub(1).max(1)));
    let model = train(train_set, cfg)?;
    let confusion = evaluate(&model, test_set)?;
    Ok((
        model,
        EvalReport {
            train_size: train_set.len(),
            test_size: test_set.len(),
            accuracy: confusion.accuracy(),
            precision: confusion.precision(),
            recall: confusion.recall(),
            confusion,
            shuffled_labels: shuffle_labels,
        },
    ))
}
