use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Rot3Error {
    #[error("force norm {norm:e} is too small to define a direction")]
    DegenerateForce { norm: f64 },
    #[error("matrix is not a rotation: {0}")]
    NotARotation(String),
    #[error("invalid axis-angle: {0}")]
    InvalidAxisAngle(String),
}

#[derive(Debug, Error)]
pub enum ChainError {
    #[error("expected {expected} joint values, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid chain: {0}")]
    Invalid(String),
    #[error("cannot read chain file {path}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("cannot parse chain file {path}: {message}")]
    Parse { path: PathBuf, message: String },
}

#[derive(Debug, Error)]
pub enum TactileError {
    #[error("frame has {got} readings but the layout has {expected} taxels")]
    LayoutMismatch { expected: usize, got: usize },
    #[error("no active contact")]
    NoContact,
    #[error("invalid taxel layout: {0}")]
    InvalidLayout(String),
    #[error("cannot read {path}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("cannot parse {path}: {message}")]
    Parse { path: PathBuf, message: String },
}

#[derive(Debug, Error)]
pub enum StabilityError {
    #[error("window has {got} frames, {need} required")]
    WindowTooShort { need: usize, got: usize },
    #[error("feature dimension mismatch: model expects {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("dataset contains a single class; both stable and unstable samples are required")]
    DegenerateDataset,
    #[error("dataset is empty")]
    EmptyDataset,
    #[error(transparent)]
    Tactile(#[from] TactileError),
    #[error("cannot read {path}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("cannot parse {path}: {message}")]
    Parse { path: PathBuf, message: String },
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error("numerical blowup at control tick {tick}: joint speed {speed:.3e} rad/s exceeds {bound} rad/s")]
    NumericalBlowup { tick: usize, speed: f64, bound: f64 },
    #[error("invalid scenario: {0}")]
    Config(String),
    #[error("cannot read scenario {path}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("cannot parse scenario {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("referenced file not found: {0}")]
    MissingFile(PathBuf),
    #[error(transparent)]
    Chain(#[from] ChainError),
    #[error(transparent)]
    Tactile(#[from] TactileError),
    #[error(transparent)]
    Stability(#[from] StabilityError),
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("malformed run log: {0}")]
    MalformedLog(String),
    #[error("no windows qualified for the dataset")]
    EmptyDataset,
    #[error("cannot access {path}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("worker pool: {0}")]
    Workers(String),
    #[error("cannot parse {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Stability(#[from] StabilityError),
}

impl HarnessError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        HarnessError::Io {
            path: path.into(),
            source,
        }
    }
}
