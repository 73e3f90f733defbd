//! Scenario files: everything a closed-loop run depends on.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::chain::JointChain;
use crate::controller::ControllerGains;
use crate::error::SimError;
use crate::sim::contact::RigidSurface;
use crate::stability::{FeatureConfig, LogisticModel};
use crate::tactile::{TaxelLayout, DEFAULT_ACTIVATION_THRESHOLD};

/// Colon-separated list of directories searched for referenced files that
/// are not found next to the scenario.
pub const SEARCH_PATH_VAR: &str = "FINGERFORCE_PATH";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorConfig {
    /// Gaussian spread of the load over neighbouring taxels, meters
    pub spread: f64,
    /// per-component noise, pseudo-force units
    pub noise: f64,
    /// pseudo-force units per newton
    pub gain: f64,
    #[serde(default = "default_threshold")]
    pub activation_threshold: f64,
}

fn default_threshold() -> f64 {
    DEFAULT_ACTIVATION_THRESHOLD
}

impl Default for SensorConfig {
    fn default() -> Self {
        Self {
            spread: 0.004,
            noise: 0.0,
            gain: 1.0,
            activation_threshold: DEFAULT_ACTIVATION_THRESHOLD,
        }
    }
}

/// Where the contact state `y` comes from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "kebab-case", deny_unknown_fields)]
pub enum StabilitySource {
    /// Logistic model file; y from the window of estimated features.
    Model { path: PathBuf },
    /// Simulator ground truth: y = 1 once the last window had contact and
    /// no slip. Used to generate training data.
    GroundTruth,
}

/// Scenario file as written on disk. Paths are relative to the file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub name: String,
    pub chain: PathBuf,
    pub layout: PathBuf,
    pub stability: StabilitySource,
    pub seed: u64,
    /// seconds
    pub duration: f64,
    /// Hz
    #[serde(default = "default_physics_rate")]
    pub physics_rate: f64,
    /// Hz
    #[serde(default = "default_control_rate")]
    pub control_rate: f64,
    /// seconds for q_ref to travel from q_start to q_close
    pub approach_time: f64,
    pub q_start: Vec<f64>,
    pub q_close: Vec<f64>,
    /// rad/s; exceeding it aborts the run
    #[serde(default = "default_speed_bound")]
    pub max_joint_speed: f64,
    /// absent: approach only, nothing to touch
    pub surface: Option<RigidSurface>,
    pub sensor: SensorConfig,
    pub gains: ControllerGains,
    #[serde(default)]
    pub features: Option<FeatureConfig>,
}

fn default_physics_rate() -> f64 {
    1500.0
}

fn default_control_rate() -> f64 {
    150.0
}

fn default_speed_bound() -> f64 {
    100.0
}

/// A validated scenario with its referenced files loaded.
#[derive(Clone, Debug)]
pub struct ScenarioConfig {
    pub file: ScenarioFile,
    pub source: PathBuf,
    pub chain: JointChain,
    pub layout: TaxelLayout,
    pub model: Option<LogisticModel>,
    pub features: FeatureConfig,
    /// sha256 over the parsed scenario (seed included) and every referenced
    /// file
    pub config_hash: String,
    files_digest: Vec<u8>,
    /// physics steps per control tick
    pub substeps: usize,
}

impl ScenarioConfig {
    pub fn load(path: &Path) -> Result<Self, SimError> {
        let text = std::fs::read_to_string(path).map_err(|source| SimError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let file: ScenarioFile = toml::from_str(&text).map_err(|e| SimError::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_parts(file, path, base)
    }

    /// Builds a config from an in-memory scenario, resolving paths against
    /// `base`.
    pub fn from_parts(mut file: ScenarioFile, source: &Path, base: &Path) -> Result<Self, SimError> {
        let chain_path = resolve(base, &file.chain)?;
        let layout_path = resolve(base, &file.layout)?;
        let chain = JointChain::load(&chain_path)?;
        let layout = TaxelLayout::load(&layout_path)?;

        let mut hasher = Sha256::new();
        for p in [&chain_path, &layout_path] {
            hasher.update(read_bytes(p)?);
        }
        let model = match &file.stability {
            StabilitySource::Model { path } => {
                let p = resolve(base, path)?;
                hasher.update(read_bytes(&p)?);
                Some(LogisticModel::load(&p)?)
            }
            StabilitySource::GroundTruth => None,
        };

        let dof = chain.dof();
        for (name, q) in [("q_start", &file.q_start), ("q_close", &file.q_close)] {
            if q.len() != dof {
                return Err(SimError::Config(format!(
                    "{name} has {} entries, chain has {dof} joints",
                    q.len()
                )));
            }
        }
        file.gains.validate(dof).map_err(SimError::Config)?;
        if let Some(s) = &file.surface {
            s.validate().map_err(SimError::Config)?;
        }
        if !(file.duration >= 0.0 && file.duration.is_finite()) {
            return Err(SimError::Config("duration must be >= 0".into()));
        }
        if !(file.approach_time > 0.0) {
            return Err(SimError::Config("approach_time must be > 0".into()));
        }
        if !(file.control_rate > 0.0 && file.physics_rate >= file.control_rate) {
            return Err(SimError::Config(
                "rates must be > 0 with physics_rate >= control_rate".into(),
            ));
        }
        let ratio = file.physics_rate / file.control_rate;
        if (ratio - ratio.round()).abs() > 1e-9 {
            return Err(SimError::Config(format!(
                "control rate {} does not divide physics rate {}",
                file.control_rate, file.physics_rate
            )));
        }
        if !(file.sensor.spread > 0.0 && file.sensor.noise >= 0.0 && file.sensor.gain > 0.0) {
            return Err(SimError::Config(
                "sensor spread and gain must be > 0, noise >= 0".into(),
            ));
        }
        if !(file.max_joint_speed > 0.0) {
            return Err(SimError::Config("max_joint_speed must be > 0".into()));
        }
        let features = file.features.clone().unwrap_or_else(|| FeatureConfig {
            activation_threshold: file.sensor.activation_threshold,
            ..FeatureConfig::default()
        });
        if let Some(m) = &model {
            if m.dim != crate::stability::FEATURE_DIM {
                return Err(SimError::Config(format!("model has {} features", m.dim)));
            }
        }

        let mut cfg = Self {
            file,
            source: source.to_path_buf(),
            chain,
            layout,
            model,
            features,
            config_hash: String::new(),
            files_digest: hasher.finalize().to_vec(),
            substeps: ratio.round() as usize,
        };
        cfg.refresh_hash();
        Ok(cfg)
    }

    /// Recomputes `config_hash`; call after editing `file` in place.
    pub fn refresh_hash(&mut self) {
        let mut hasher = Sha256::new();
        hasher.update(toml::to_string(&self.file).expect("scenario serializes"));
        hasher.update(&self.files_digest);
        self.config_hash = hex(&hasher.finalize());
    }

    /// Replaces the seed and refreshes the hash.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.file.seed = seed;
        self.refresh_hash();
        self
    }

    /// Number of control ticks in the run.
    pub fn ticks(&self) -> usize {
        (self.file.duration * self.file.control_rate).round() as usize
    }

    pub fn control_dt(&self) -> f64 {
        1.0 / self.file.control_rate
    }

    pub fn physics_dt(&self) -> f64 {
        1.0 / self.file.physics_rate
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn read_bytes(p: &Path) -> Result<Vec<u8>, SimError> {
    std::fs::read(p).map_err(|source| SimError::Io {
        path: p.to_path_buf(),
        source,
    })
}

/// Looks for `rel` next to the scenario, then in every directory of
/// `FINGERFORCE_PATH`.
pub fn resolve(base: &Path, rel: &Path) -> Result<PathBuf, SimError> {
    let direct = base.join(rel);
    if direct.is_file() {
        return Ok(direct);
    }
    if let Some(var) = std::env::var_os(SEARCH_PATH_VAR) {
        for dir in std::env::split_paths(&var) {
            let candidate = dir.join(rel);
            if candidate.is_file() {
                return Ok(candidate);
            }
        }
    }
    Err(SimError::MissingFile(direct))
}
