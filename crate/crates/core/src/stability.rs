//! Contact stability classification from a window of tactile frames.
//!
//! A logistic model maps seven hand-crafted window features to the
//! probability `p` that the contact is stable; the contact state is
//! `y = 1` iff `p >= 0.5`.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::StabilityError;
use crate::rot3::Vec3;
use crate::tactile::{estimate_contact, TactileFrame, TaxelLayout, DEFAULT_ACTIVATION_THRESHOLD};

/// Tag stored in model and dataset files; bump when the features change.
pub const FEATURE_SET_VERSION: &str = "tactile-window-v1";

pub const FEATURE_DIM: usize = 7;

pub const FEATURE_NAMES: [&str; FEATURE_DIM] = [
    "mean_activation",
    "tangential_normal_ratio",
    "tangential_rate",
    "normal_rate",
    "active_fraction",
    "center_drift_speed",
    "activation_variance",
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureConfig {
    /// frames per window (15 = 0.1 s at 150 Hz)
    pub window: usize,
    /// mean activation for a frame to count as in contact
    pub activation_threshold: f64,
    /// reading norm for a single taxel to count as active
    pub taxel_threshold: f64,
    /// floor on the normal component in the tangential/normal ratio
    pub ratio_floor: f64,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            window: 15,
            activation_threshold: DEFAULT_ACTIVATION_THRESHOLD,
            taxel_threshold: 0.01,
            ratio_floor: 1e-3,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FeatureVector(pub Vec<f64>);

impl FeatureVector {
    pub fn zeros() -> Self {
        Self(vec![0.0; FEATURE_DIM])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Least-squares slope of `values` against `times`. Samples are taken
/// relative to the first one so a constant series gives exactly zero.
fn slope(times: &[f64], values: &[f64]) -> f64 {
    if times.len() < 2 {
        return 0.0;
    }
    let n = times.len() as f64;
    let t_mean = times.iter().sum::<f64>() / n;
    let (mut num, mut den) = (0.0, 0.0);
    for (t, v) in times.iter().zip(values) {
        let dt = t - t_mean;
        num += dt * (v - values[0]);
        den += dt * dt;
    }
    if den > 0.0 {
        num / den
    } else {
        0.0
    }
}

fn variance(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let n = values.len() as f64;
    let shifted: Vec<f64> = values.iter().map(|v| v - values[0]).collect();
    let mean = shifted.iter().sum::<f64>() / n;
    shifted.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n
}

/// Features of the last `cfg.window` frames:
///
/// 1. mean activation over the window
/// 2. mean `|f_t| / max(f_n, floor)` over in-contact frames
/// 3. slope of `|f_t|` (per second)
/// 4. slope of `f_n` (per second)
/// 5. mean fraction of active taxels
/// 6. speed of the contact center in {E} (m/s, slope over in-contact frames)
/// 7. variance of the activation
///
/// A window in which no taxel ever crosses `taxel_threshold` maps to the zero
/// vector.
pub fn extract_features(
    window: &[TactileFrame],
    layout: &TaxelLayout,
    cfg: &FeatureConfig,
) -> Result<FeatureVector, StabilityError> {
    if window.len() < cfg.window || cfg.window == 0 {
        return Err(StabilityError::WindowTooShort {
            need: cfg.window.max(1),
            got: window.len(),
        });
    }
    let frames = &window[window.len() - cfg.window..];
    let n_tx = layout.len() as f64;

    let mut times = Vec::with_capacity(frames.len());
    let mut activation = Vec::with_capacity(frames.len());
    let mut tangential = Vec::with_capacity(frames.len());
    let mut normal = Vec::with_capacity(frames.len());
    let mut fractions = Vec::with_capacity(frames.len());
    let mut ratios = Vec::new();
    let mut contact_times = Vec::new();
    let mut centers: Vec<Vec3> = Vec::new();
    let mut any_taxel = false;

    for frame in frames {
        let est = estimate_contact(layout, frame, cfg.activation_threshold)?;
        let active_taxels = frame
            .readings
            .iter()
            .filter(|f| f.norm() >= cfg.taxel_threshold)
            .count();
        any_taxel |= active_taxels > 0;
        times.push(frame.timestamp);
        activation.push(est.mean_activation);
        fractions.push(active_taxels as f64 / n_tx);
        let f = est.force;
        let ft = (f.x * f.x + f.y * f.y).sqrt();
        tangential.push(ft);
        normal.push(f.z);
        if est.active {
            ratios.push(ft / f.z.max(cfg.ratio_floor));
            contact_times.push(frame.timestamp);
            centers.push(est.position);
        }
    }
    if !any_taxel {
        return Ok(FeatureVector::zeros());
    }

    let n = frames.len() as f64;
    let mean = |v: &[f64]| {
        if v.is_empty() {
            0.0
        } else {
            v.iter().sum::<f64>() / v.len() as f64
        }
    };
    let drift = {
        let axis = |i: usize| centers.iter().map(|c| c[i]).collect::<Vec<_>>();
        Vec3::new(
            slope(&contact_times, &axis(0)),
            slope(&contact_times, &axis(1)),
            slope(&contact_times, &axis(2)),
        )
        .norm()
    };
    Ok(FeatureVector(vec![
        activation.iter().sum::<f64>() / n,
        mean(&ratios),
        slope(&times, &tangential),
        slope(&times, &normal),
        fractions.iter().sum::<f64>() / n,
        drift,
        variance(&activation),
    ]))
}

/// Probability of stable contact and the thresholded state.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ContactState {
    pub p: f64,
    /// 1 = stable, 0 = unstable (slip or contact loss)
    pub y: u8,
}

impl ContactState {
    pub fn from_probability(p: f64) -> Self {
        Self {
            p,
            y: u8::from(p >= 0.5),
        }
    }

    pub fn unstable() -> Self {
        Self { p: 0.0, y: 0 }
    }

    pub fn stable(&self) -> bool {
        self.y == 1
    }
}

/// Logistic regression over standardized features.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogisticModel {
    pub version: String,
    pub dim: usize,
    pub weights: Vec<f64>,
    pub bias: f64,
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl LogisticModel {
    pub fn new(weights: Vec<f64>, bias: f64, mean: Vec<f64>, scale: Vec<f64>) -> Result<Self, StabilityError> {
        let model = Self {
            version: FEATURE_SET_VERSION.into(),
            dim: weights.len(),
            weights,
            bias,
            mean,
            scale,
        };
        model.validate()?;
        Ok(model)
    }

    fn validate(&self) -> Result<(), StabilityError> {
        for len in [self.weights.len(), self.mean.len(), self.scale.len()] {
            if len != self.dim {
                return Err(StabilityError::DimensionMismatch {
                    expected: self.dim,
                    got: len,
                });
            }
        }
        if self.scale.iter().any(|s| !(*s > 0.0)) {
            return Err(StabilityError::Parse {
                path: "<model>".into(),
                message: "standardization scales must be > 0".into(),
            });
        }
        Ok(())
    }

    fn logit(&self, x: &[f64]) -> f64 {
        self.weights
            .iter()
            .zip(x)
            .zip(self.mean.iter().zip(&self.scale))
            .map(|((w, v), (m, s))| w * (v - m) / s)
            .sum::<f64>()
            + self.bias
    }

    pub fn predict(&self, x: &FeatureVector) -> Result<ContactState, StabilityError> {
        predict(self, x)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("model serializes")
    }

    pub fn save(&self, path: &Path) -> Result<(), StabilityError> {
        std::fs::write(path, self.to_toml_string()).map_err(|source| StabilityError::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Self, StabilityError> {
        let text = std::fs::read_to_string(path).map_err(|source| StabilityError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let model: Self = toml::from_str(&text).map_err(|e| StabilityError::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        if model.version != FEATURE_SET_VERSION {
            return Err(StabilityError::Parse {
                path: path.to_path_buf(),
                message: format!(
                    "model built for feature set '{}', this build uses '{FEATURE_SET_VERSION}'",
                    model.version
                ),
            });
        }
        model.validate()?;
        Ok(model)
    }
}

/// Sigmoid kept strictly inside (0, 1).
pub fn sigmoid(z: f64) -> f64 {
    let p = if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    };
    p.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0)
}

pub fn predict(model: &LogisticModel, x: &FeatureVector) -> Result<ContactState, StabilityError> {
    if x.0.len() != model.dim {
        return Err(StabilityError::DimensionMismatch {
            expected: model.dim,
            got: x.0.len(),
        });
    }
    Ok(ContactState::from_probability(sigmoid(model.logit(&x.0))))
}

#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub features: FeatureVector,
    /// 1 = stable
    pub label: u8,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub l2: f64,
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            l2: 1e-3,
            epochs: 3000,
            learning_rate: 0.5,
            seed: 0,
        }
    }
}

/// Mean L2-regularized cross-entropy of `model` on `data`.
pub fn loss(model: &LogisticModel, data: &[Sample], l2: f64) -> f64 {
    let n = data.len() as f64;
    let ce: f64 = data
        .iter()
        .map(|s| {
            let z = model.logit(&s.features.0);
            // log(1 + e^z) - y z, evaluated stably
            let softplus = if z > 0.0 {
                z + (-z).exp().ln_1p()
            } else {
                z.exp().ln_1p()
            };
            softplus - f64::from(s.label) * z
        })
        .sum();
    ce / n + 0.5 * l2 * model.weights.iter().map(|w| w * w).sum::<f64>()
}

/// Full-batch gradient descent on the standardized features.
pub fn train(data: &[Sample], cfg: &TrainConfig) -> Result<LogisticModel, StabilityError> {
    if data.is_empty() {
        return Err(StabilityError::EmptyDataset);
    }
    let dim = data[0].features.0.len();
    if let Some(bad) = data.iter().find(|s| s.features.0.len() != dim) {
        return Err(StabilityError::DimensionMismatch {
            expected: dim,
            got: bad.features.0.len(),
        });
    }
    let positives = data.iter().filter(|s| s.label == 1).count();
    if positives == 0 || positives == data.len() {
        return Err(StabilityError::DegenerateDataset);
    }

    let n = data.len() as f64;
    let mut mean = vec![0.0; dim];
    for s in data {
        for (m, v) in mean.iter_mut().zip(&s.features.0) {
            *m += v / n;
        }
    }
    let mut scale = vec![0.0; dim];
    for s in data {
        for ((acc, v), m) in scale.iter_mut().zip(&s.features.0).zip(&mean) {
            *acc += (v - m) * (v - m) / n;
        }
    }
    for s in scale.iter_mut() {
        *s = if *s > 1e-24 { s.sqrt() } else { 1.0 };
    }
    let xs: Vec<Vec<f64>> = data
        .iter()
        .map(|s| {
            s.features
                .0
                .iter()
                .zip(mean.iter().zip(&scale))
                .map(|(v, (m, sc))| (v - m) / sc)
                .collect()
        })
        .collect();
    let ys: Vec<f64> = data.iter().map(|s| f64::from(s.label)).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut w: Vec<f64> = (0..dim).map(|_| rng.random_range(-0.01..0.01)).collect();
    let mut b = 0.0;
    let mut grad_w = vec![0.0; dim];
    for _ in 0..cfg.epochs {
        grad_w.iter_mut().for_each(|g| *g = 0.0);
        let mut grad_b = 0.0;
        for (x, y) in xs.iter().zip(&ys) {
            let z = w.iter().zip(x).map(|(wi, xi)| wi * xi).sum::<f64>() + b;
            let err = sigmoid(z) - y;
            for (g, xi) in grad_w.iter_mut().zip(x) {
                *g += err * xi;
            }
            grad_b += err;
        }
        for (wi, g) in w.iter_mut().zip(&grad_w) {
            *wi -= cfg.learning_rate * (g / n + cfg.l2 * *wi);
        }
        b -= cfg.learning_rate * grad_b / n;
    }
    LogisticModel::new(w, b, mean, scale)
}

/// Accuracy, precision and recall with "stable" as the positive class.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Confusion {
    pub true_positive: usize,
    pub false_positive: usize,
    pub true_negative: usize,
    pub false_negative: usize,
}

impl Confusion {
    pub fn record(&mut self, predicted: u8, actual: u8) {
        match (predicted, actual) {
            (1, 1) => self.true_positive += 1,
            (1, _) => self.false_positive += 1,
            (_, 1) => self.false_negative += 1,
            _ => self.true_negative += 1,
        }
    }

    pub fn total(&self) -> usize {
        self.true_positive + self.false_positive + self.true_negative + self.false_negative
    }

    pub fn accuracy(&self) -> f64 {
        (self.true_positive + self.true_negative) as f64 / self.total().max(1) as f64
    }

    pub fn precision(&self) -> f64 {
        let d = self.true_positive + self.false_positive;
        if d == 0 {
            0.0
        } else {
            self.true_positive as f64 / d as f64
        }
    }

    pub fn recall(&self) -> f64 {
        let d = self.true_positive + self.false_negative;
        if d == 0 {
            0.0
        } else {
            self.true_positive as f64 / d as f64
        }
    }
}

pub fn evaluate(model: &LogisticModel, data: &[Sample]) -> Result<Confusion, StabilityError> {
    let mut c = Confusion::default();
    for s in data {
        c.record(predict(model, &s.features)?.y, s.label);
    }
    Ok(c)
}

/// Dataset CSV: one row per window, the seven named features then `label`.
pub fn write_dataset<W: std::io::Write>(out: W, data: &[Sample]) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<&str> = FEATURE_NAMES.to_vec();
    header.push("label");
    w.write_record(&header)?;
    for s in data {
        let mut row: Vec<String> = s.features.0.iter().map(|v| v.to_string()).collect();
        row.push(s.label.to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_dataset(path: &Path) -> Result<Vec<Sample>, StabilityError> {
    let parse_err = |message: String| StabilityError::Parse {
        path: path.to_path_buf(),
        message,
    };
    let mut r = csv::Reader::from_path(path).map_err(|e| parse_err(e.to_string()))?;
    let header = r.headers().map_err(|e| parse_err(e.to_string()))?.clone();
    if header.len() != FEATURE_DIM + 1 || header.get(FEATURE_DIM) != Some("label") {
        return Err(parse_err(format!(
            "expected {FEATURE_DIM} feature columns followed by 'label'"
        )));
    }
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| parse_err(e.to_string()))?;
        let vals: Vec<f64> = rec
            .iter()
            .take(FEATURE_DIM)
            .map(str::parse)
            .collect::<Result<_, _>>()
            .map_err(|e| parse_err(format!("line {}: {e}", i + 2)))?;
        let label: u8 = rec[FEATURE_DIM]
            .parse()
            .map_err(|e| parse_err(format!("line {}: {e}", i + 2)))?;
        if label > 1 {
            return Err(parse_err(format!("line {}: label must be 0 or 1", i + 2)));
        }
        out.push(Sample {
            features: FeatureVector(vals),
            label,
        });
    }
    Ok(out)
}
