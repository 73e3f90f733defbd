//! Fingertip taxels: layout, simulated readout, contact pose and pseudo-force.
//!
//! A taxel reading is a tri-axial displacement in the taxel's own frame
//! ("pseudo-force"); it is uncalibrated, so nothing here converts to newtons.
//! Positive `z` is compression along the outward skin normal.

use std::f64::consts::{FRAC_PI_2, PI};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::TactileError;
use crate::rot3::{rpy_to_matrix, RotationMatrix, Vec3};

/// Default mean-activation threshold for declaring contact, pseudo-force units.
pub const DEFAULT_ACTIVATION_THRESHOLD: f64 = 0.02;

#[derive(Clone, Debug, PartialEq)]
pub struct Taxel {
    /// Origin in {E}, meters.
    pub position: Vec3,
    /// Roll, pitch, yaw of the taxel frame in {E}, radians.
    pub rpy: [f64; 3],
    rotation: RotationMatrix,
}

impl Taxel {
    pub fn new(position: Vec3, rpy: [f64; 3]) -> Self {
        Self {
            position,
            rpy,
            rotation: rpy_to_matrix(rpy[0], rpy[1], rpy[2]),
        }
    }

    /// `[x, y, z, roll, pitch, yaw]`
    pub fn pose_vector(&self) -> [f64; 6] {
        let p = self.position;
        [p.x, p.y, p.z, self.rpy[0], self.rpy[1], self.rpy[2]]
    }

    /// Taxel-to-{E} rotation.
    pub fn rotation(&self) -> &RotationMatrix {
        &self.rotation
    }

    pub fn normal(&self) -> Vec3 {
        self.rotation.matrix().column(2).into_owned()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TaxelLayout {
    name: String,
    fingertip_radius: f64,
    taxels: Vec<Taxel>,
}

impl TaxelLayout {
    /// Validates that every taxel normal points away from the fingertip
    /// center (the {E} origin).
    pub fn new(name: impl Into<String>, fingertip_radius: f64, taxels: Vec<Taxel>) -> Result<Self, TactileError> {
        if taxels.is_empty() {
            return Err(TactileError::InvalidLayout("no taxels".into()));
        }
        if !(fingertip_radius > 0.0) {
            return Err(TactileError::InvalidLayout("fingertip radius must be > 0".into()));
        }
        for (k, t) in taxels.iter().enumerate() {
            if !t.pose_vector().iter().all(|v| v.is_finite()) {
                return Err(TactileError::InvalidLayout(format!("taxel {k} is not finite")));
            }
            if t.normal().dot(&t.position) <= 0.0 {
                return Err(TactileError::InvalidLayout(format!(
                    "taxel {k} normal does not point outward"
                )));
            }
        }
        Ok(Self {
            name: name.into(),
            fingertip_radius,
            taxels,
        })
    }

    /// A `rows x cols` patch on the spherical fingertip cap. Rows sweep the
    /// pitch from the pad (+z of {E}) toward the tip (+x); columns sweep
    /// sideways. Each taxel's z axis is the outward sphere normal.
    pub fn spherical_grid(
        name: impl Into<String>,
        radius: f64,
        pitch_range: (f64, f64),
        lateral_range: (f64, f64),
        rows: usize,
        cols: usize,
    ) -> Result<Self, TactileError> {
        let lerp = |(a, b): (f64, f64), i: usize, n: usize| {
            if n == 1 {
                0.5 * (a + b)
            } else {
                a + (b - a) * i as f64 / (n - 1) as f64
            }
        };
        let mut taxels = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            let pitch = lerp(pitch_range, i, rows);
            for j in 0..cols {
                let lateral = lerp(lateral_range, j, cols);
                let n = Vec3::new(pitch.sin() * lateral.cos(), lateral.sin(), pitch.cos() * lateral.cos());
                // z axis of Rz(0) Ry(pitch) Rx(roll) is
                // (sin p cos r, -sin r, cos p cos r)
                taxels.push(Taxel::new(n * radius, [-lateral, pitch, 0.0]));
            }
        }
        Self::new(name, radius, taxels)
    }

    /// The 30-taxel reference fingertip: 6 rows x 5 columns on a 12 mm cap.
    pub fn reference() -> Self {
        Self::spherical_grid("reference-30", 0.012, (-0.25, 1.25), (-0.6, 0.6), 6, 5)
            .expect("reference layout is valid")
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn len(&self) -> usize {
        self.taxels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taxels.is_empty()
    }

    pub fn taxels(&self) -> &[Taxel] {
        &self.taxels
    }

    pub fn fingertip_radius(&self) -> f64 {
        self.fingertip_radius
    }

    pub fn to_file(&self) -> LayoutFile {
        LayoutFile {
            name: self.name.clone(),
            n_tx: self.len(),
            fingertip_radius: self.fingertip_radius,
            rpy_convention: RPY_CONVENTION.into(),
            taxels: self.taxels.iter().map(Taxel::pose_vector).collect(),
        }
    }

    pub fn to_toml_string(&self) -> String {
        let mut out = String::new();
        out.push_str("# Taxel layout. Each row is [x, y, z, roll, pitch, yaw]:\n");
        out.push_str("# position of the taxel origin in the fingertip frame {E} (meters) and the\n");
        out.push_str("# taxel frame orientation in {E} (radians), R = Rz(yaw) * Ry(pitch) * Rx(roll).\n");
        out.push_str("# The taxel z axis is the outward skin normal.\n");
        out.push_str(&toml::to_string(&self.to_file()).expect("layout serializes"));
        out
    }

    pub fn from_toml_str(text: &str, origin: &Path) -> Result<Self, TactileError> {
        let file: LayoutFile = toml::from_str(text).map_err(|e| TactileError::Parse {
            path: origin.to_path_buf(),
            message: e.to_string(),
        })?;
        file.into_layout()
    }

    pub fn load(path: &Path) -> Result<Self, TactileError> {
        let text = std::fs::read_to_string(path).map_err(|source| TactileError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml_str(&text, path)
    }

    fn check_frame(&self, frame: &TactileFrame) -> Result<(), TactileError> {
        if frame.readings.len() != self.len() {
            return Err(TactileError::LayoutMismatch {
                expected: self.len(),
                got: frame.readings.len(),
            });
        }
        Ok(())
    }
}

pub const RPY_CONVENTION: &str = "extrinsic-xyz";

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayoutFile {
    pub name: String,
    pub n_tx: usize,
    /// meters
    pub fingertip_radius: f64,
    pub rpy_convention: String,
    pub taxels: Vec<[f64; 6]>,
}

impl LayoutFile {
    pub fn into_layout(self) -> Result<TaxelLayout, TactileError> {
        if self.taxels.len() != self.n_tx {
            return Err(TactileError::InvalidLayout(format!(
                "declared n_tx = {} but {} taxels listed",
                self.n_tx,
                self.taxels.len()
            )));
        }
        if self.rpy_convention != RPY_CONVENTION {
            return Err(TactileError::InvalidLayout(format!(
                "unsupported rpy convention '{}'",
                self.rpy_convention
            )));
        }
        let taxels = self
            .taxels
            .iter()
            .map(|u| Taxel::new(Vec3::new(u[0], u[1], u[2]), [u[3], u[4], u[5]]))
            .collect();
        TaxelLayout::new(self.name, self.fingertip_radius, taxels)
    }
}

/// One sample of every taxel.
#[derive(Clone, Debug, PartialEq)]
pub struct TactileFrame {
    /// seconds
    pub timestamp: f64,
    pub readings: Vec<Vec3>,
}

impl TactileFrame {
    pub fn zeros(timestamp: f64, n: usize) -> Self {
        Self {
            timestamp,
            readings: vec![Vec3::zeros(); n],
        }
    }
}

/// Estimated contact pose in {E} and total pseudo-force in {C}.
#[derive(Clone, Debug, PartialEq)]
pub struct ContactEstimate {
    /// meters, {E}
    pub position: Vec3,
    /// roll, pitch, yaw of {C} in {E}
    pub rpy: [f64; 3],
    /// pseudo-force expressed in {C}; zero when inactive
    pub force: Vec3,
    /// mean taxel activation `sum ||f_k|| / n_tx`
    pub mean_activation: f64,
    pub active: bool,
}

impl ContactEstimate {
    pub fn inactive(mean_activation: f64) -> Self {
        Self {
            position: Vec3::zeros(),
            rpy: [0.0; 3],
            force: Vec3::zeros(),
            mean_activation,
            active: false,
        }
    }

    /// {C}-to-{E} rotation.
    pub fn rotation(&self) -> RotationMatrix {
        rpy_to_matrix(self.rpy[0], self.rpy[1], self.rpy[2])
    }
}

/// Contact pose as the activation-weighted mean of the taxel poses,
/// `sum_k ||f_k|| u_k / sum_k ||f_k||`.
///
/// The orientation part averages RPY components, which is only meaningful
/// while the active taxels' orientations differ by small angles (true on one
/// fingertip patch). The returned estimate carries no force; see
/// [`estimate_contact`].
pub fn contact_pose(
    layout: &TaxelLayout,
    frame: &TactileFrame,
    activation_threshold: f64,
) -> Result<ContactEstimate, TactileError> {
    layout.check_frame(frame)?;
    let weights: Vec<f64> = frame.readings.iter().map(|f| f.norm()).collect();
    let total: f64 = weights.iter().sum();
    let mean_activation = total / layout.len() as f64;
    if !(mean_activation >= activation_threshold) || total == 0.0 {
        return Ok(ContactEstimate::inactive(mean_activation));
    }
    // normalizing each weight first keeps a lone active taxel's pose exact
    let mut u = [0.0f64; 6];
    for (taxel, w) in layout.taxels.iter().zip(&weights) {
        if *w == 0.0 {
            continue;
        }
        for (acc, v) in u.iter_mut().zip(taxel.pose_vector()) {
            *acc += (w / total) * v;
        }
    }
    Ok(ContactEstimate {
        position: Vec3::new(u[0], u[1], u[2]),
        rpy: [
            u[3].clamp(-PI, PI),
            u[4].clamp(-FRAC_PI_2, FRAC_PI_2),
            u[5].clamp(-PI, PI),
        ],
        force: Vec3::zeros(),
        mean_activation,
        active: true,
    })
}

/// Total pseudo-force projected into the contact frame,
/// `R(phi_c)^T sum_k R(phi_k) f_k`.
pub fn contact_pseudo_force(
    layout: &TaxelLayout,
    frame: &TactileFrame,
    pose: &ContactEstimate,
) -> Result<Vec3, TactileError> {
    layout.check_frame(frame)?;
    if !pose.active {
        return Err(TactileError::NoContact);
    }
    let total: Vec3 = layout
        .taxels
        .iter()
        .zip(&frame.readings)
        .map(|(t, f)| t.rotation * *f)
        .sum();
    Ok(pose.rotation().transpose() * total)
}

/// Contact pose plus pseudo-force in one pass.
pub fn estimate_contact(
    layout: &TaxelLayout,
    frame: &TactileFrame,
    activation_threshold: f64,
) -> Result<ContactEstimate, TactileError> {
    let mut est = contact_pose(layout, frame, activation_threshold)?;
    if est.active {
        est.force = contact_pseudo_force(layout, frame, &est)?;
    }
    Ok(est)
}

/// Gaussian-spread sensor model with a seeded noise source.
///
/// Taxel `k` reads `G_k R_k^T F s + noise` where
/// `G_k = exp(-|p_k - c|^2 / (2 spread^2))`, `s = 1 / sum G_k` and `F` is the
/// force on the skin expressed in {E}.
#[derive(Clone, Debug)]
pub struct TaxelSimulator {
    /// meters
    pub spread: f64,
    /// standard deviation per reading component, pseudo-force units
    pub noise: f64,
    rng: ChaCha8Rng,
}

impl TaxelSimulator {
    pub fn new(spread: f64, noise: f64, seed: u64) -> Self {
        Self {
            spread,
            noise,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn sample(
        &mut self,
        layout: &TaxelLayout,
        timestamp: f64,
        contact_point: &Vec3,
        surface_force: &Vec3,
    ) -> TactileFrame {
        let two_var = 2.0 * self.spread * self.spread;
        let mut weights: Vec<f64> = layout
            .taxels
            .iter()
            .map(|t| (-(t.position - contact_point).norm_squared() / two_var).exp())
            .collect();
        let sum: f64 = weights.iter().sum();
        if sum > 0.0 && sum.is_finite() {
            weights.iter_mut().for_each(|w| *w /= sum);
        } else {
            // every kernel underflowed: the nearest taxel takes the load
            let nearest = layout
                .taxels
                .iter()
                .enumerate()
                .map(|(k, t)| (k, (t.position - contact_point).norm_squared()))
                .fold((0, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a })
                .0;
            weights.iter_mut().for_each(|w| *w = 0.0);
            weights[nearest] = 1.0;
        }
        let normal = (self.noise > 0.0).then(|| Normal::new(0.0, self.noise).expect("noise >= 0"));
        let readings = layout
            .taxels
            .iter()
            .zip(&weights)
            .map(|(t, w)| {
                let mut f = t.rotation.transpose() * *surface_force * *w;
                if let Some(dist) = &normal {
                    for c in f.iter_mut() {
                        *c += dist.sample(&mut self.rng);
                    }
                }
                f
            })
            .collect();
        TactileFrame { timestamp, readings }
    }
}

/// One-shot sensor sample with its own freshly seeded generator.
pub fn simulate_taxels(
    layout: &TaxelLayout,
    timestamp: f64,
    contact_point: &Vec3,
    surface_force: &Vec3,
    spread: f64,
    noise: f64,
    seed: u64,
) -> TactileFrame {
    TaxelSimulator::new(spread, noise, seed).sample(layout, timestamp, contact_point, surface_force)
}

/// Writes frames as CSV: `timestamp` followed by `f{k}_x, f{k}_y, f{k}_z` for
/// every taxel `k` (1-based).
pub fn write_tactile_log<W: std::io::Write>(out: W, frames: &[TactileFrame], n_tx: usize) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["timestamp".to_string()];
    for k in 1..=n_tx {
        for axis in ["x", "y", "z"] {
            header.push(format!("f{k}_{axis}"));
        }
    }
    w.write_record(&header)?;
    for frame in frames {
        let mut row = Vec::with_capacity(1 + 3 * n_tx);
        row.push(frame.timestamp.to_string());
        for f in &frame.readings {
            row.extend(f.iter().map(|v| v.to_string()));
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_tactile_log<R: std::io::Read>(input: R) -> Result<Vec<TactileFrame>, String> {
    let mut r = csv::Reader::from_reader(input);
    let width = r.headers().map_err(|e| e.to_string())?.len();
    if width < 4 || (width - 1) % 3 != 0 {
        return Err(format!("unexpected column count {width}"));
    }
    let mut frames = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| e.to_string())?;
        let vals: Vec<f64> = rec
            .iter()
            .map(|s| s.parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| format!("row {}: {e}", i + 1))?;
        let readings = vals[1..].chunks(3).map(|c| Vec3::new(c[0], c[1], c[2])).collect();
        frames.push(TactileFrame {
            timestamp: vals[0],
            readings,
        });
    }
    Ok(frames)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn reference_layout_shape() {
        let layout = TaxelLayout::reference();
        assert_eq!(layout.len(), 30);
        for t in layout.taxels() {
            assert!((t.position.norm() - 0.012).abs() < 1e-15);
            assert!(t.normal().dot(&t.position.normalize()) > 1.0 - 1e-12);
        }
    }

    #[test]
    fn single_active_taxel_returns_its_pose() {
        let layout = TaxelLayout::reference();
        let mut frame = TactileFrame::zeros(0.0, 30);
        frame.readings[17] = Vec3::new(0.3, -0.2, 0.9);
        let est = contact_pose(&layout, &frame, 0.02).unwrap();
        assert!(est.active);
        let u = layout.taxels()[17].pose_vector();
        assert_eq!(est.position, Vec3::new(u[0], u[1], u[2]));
        assert_eq!(est.rpy, [u[3], u[4], u[5]]);
    }

    #[test]
    fn equal_pair_gives_midpoint() {
        let layout = TaxelLayout::reference();
        let mut frame = TactileFrame::zeros(0.0, 30);
        frame.readings[3] = Vec3::new(0.0, 0.0, 2.0);
        frame.readings[12] = Vec3::new(2.0, 0.0, 0.0);
        let est = contact_pose(&layout, &frame, 0.02).unwrap();
        let mid = (layout.taxels()[3].position + layout.taxels()[12].position) / 2.0;
        assert!((est.position - mid).norm() < 1e-15);
    }

    #[test]
    fn random_activation_matches_direct_sum() {
        let layout = TaxelLayout::reference();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..50 {
            let readings: Vec<Vec3> = (0..30)
                .map(|_| {
                    Vec3::new(
                        rng.random_range(-1.0..1.0),
                        rng.random_range(-1.0..1.0),
                        rng.random_range(0.0..1.0),
                    )
                })
                .collect();
            let frame = TactileFrame {
                timestamp: 0.0,
                readings,
            };
            let est = contact_pose(&layout, &frame, 0.0).unwrap();
            let mut num = [0.0; 6];
            let mut den = 0.0;
            for k in 0..30 {
                let d =
                    (frame.readings[k].x.powi(2) + frame.readings[k].y.powi(2) + frame.readings[k].z.powi(2)).sqrt();
                den += d;
                let u = layout.taxels()[k].pose_vector();
                for i in 0..6 {
                    num[i] += d * u[i];
                }
            }
            for i in 0..3 {
                assert!((est.position[i] - num[i] / den).abs() < 1e-12);
                assert!((est.rpy[i] - num[i + 3] / den).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn below_threshold_is_inactive() {
        let layout = TaxelLayout::reference();
        let mut frame = TactileFrame::zeros(0.0, 30);
        frame.readings[0] = Vec3::new(0.0, 0.0, 0.3);
        let est = contact_pose(&layout, &frame, 0.02).unwrap();
        assert!(!est.active);
        assert!((est.mean_activation - 0.01).abs() < 1e-15);
        assert!(matches!(
            contact_pseudo_force(&layout, &frame, &est),
            Err(TactileError::NoContact)
        ));
        assert!(matches!(
            contact_pose(&layout, &TactileFrame::zeros(0.0, 29), 0.02),
            Err(TactileError::LayoutMismatch { expected: 30, got: 29 })
        ));
    }

    #[test]
    fn pseudo_force_self_projection_and_cancellation() {
        let layout = TaxelLayout::reference();
        let mut frame = TactileFrame::zeros(0.0, 30);
        frame.readings[8] = Vec3::new(0.0, 0.0, 1.0);
        let est = estimate_contact(&layout, &frame, 0.02).unwrap();
        assert!((est.force - Vec3::new(0.0, 0.0, 1.0)).norm() < 1e-15);

        // two taxels sharing a frame with opposite tangential readings
        let t = layout.taxels()[8].clone();
        let twin = TaxelLayout::new("twin", 0.012, vec![t.clone(), t]).unwrap();
        let frame = TactileFrame {
            timestamp: 0.0,
            readings: vec![Vec3::new(1.0, 0.0, 0.0), Vec3::new(-1.0, 0.0, 0.0)],
        };
        let est = estimate_contact(&twin, &frame, 0.02).unwrap();
        assert_eq!(est.force, Vec3::zeros());
    }

    #[test]
    fn pseudo_force_matches_rotate_sum_rotate_oracle() {
        let layout = TaxelLayout::reference();
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for _ in 0..20 {
            let readings: Vec<Vec3> = (0..30)
                .map(|_| {
                    Vec3::new(
                        rng.random_range(-1.0..1.0),
                        rng.random_range(-1.0..1.0),
                        rng.random_range(0.0..1.0),
                    )
                })
                .collect();
            let frame = TactileFrame {
                timestamp: 0.0,
                readings,
            };
            let est = estimate_contact(&layout, &frame, 0.0).unwrap();
            let mut sum = nalgebra::Vector3::zeros();
            for (t, f) in layout.taxels().iter().zip(&frame.readings) {
                let u = t.pose_vector();
                let r = nalgebra::Rotation3::from_euler_angles(u[3], u[4], u[5]);
                sum += r * f;
            }
            let rc = nalgebra::Rotation3::from_euler_angles(est.rpy[0], est.rpy[1], est.rpy[2]);
            let oracle = rc.inverse() * sum;
            assert!((est.force - oracle).norm() < 1e-12);
        }
    }

    #[test]
    fn simulate_zero_force_no_noise_is_silent() {
        let layout = TaxelLayout::reference();
        let frame = simulate_taxels(
            &layout,
            0.0,
            &layout.taxels()[4].position,
            &Vec3::zeros(),
            0.004,
            0.0,
            1,
        );
        assert!(frame.readings.iter().all(|f| *f == Vec3::zeros()));
    }

    #[test]
    fn simulate_delta_limit_hits_one_taxel() {
        let layout = TaxelLayout::reference();
        let j = 21;
        let p = layout.taxels()[j].position;
        let force = layout.taxels()[j].normal() * 3.0;
        let frame = simulate_taxels(&layout, 0.0, &p, &force, 1e-9, 0.0, 1);
        for (k, f) in frame.readings.iter().enumerate() {
            assert_eq!(*f == Vec3::zeros(), k != j);
        }
        let est = estimate_contact(&layout, &frame, 0.02).unwrap();
        let u = layout.taxels()[j].pose_vector();
        assert_eq!(est.position, Vec3::new(u[0], u[1], u[2]));
        assert!((est.force - Vec3::new(0.0, 0.0, 3.0)).norm() < 1e-12);
    }

    #[test]
    fn simulate_preserves_total_force_in_e_frame() {
        // sum_k R_k f_k = F exactly when the spread weights sum to one
        let layout = TaxelLayout::reference();
        let force = Vec3::new(0.4, -0.3, 2.0);
        let frame = simulate_taxels(&layout, 0.0, &layout.taxels()[12].position, &force, 0.004, 0.0, 1);
        let total: Vec3 = layout
            .taxels()
            .iter()
            .zip(&frame.readings)
            .map(|(t, f)| *t.rotation() * *f)
            .sum();
        assert!((total - force).norm() < 1e-12);
    }

    #[test]
    fn simulate_is_deterministic_per_seed() {
        let layout = TaxelLayout::reference();
        let p = layout.taxels()[7].position;
        let f = Vec3::new(0.1, 0.2, 1.0);
        let a = simulate_taxels(&layout, 0.5, &p, &f, 0.004, 0.01, 42);
        let b = simulate_taxels(&layout, 0.5, &p, &f, 0.004, 0.01, 42);
        let c = simulate_taxels(&layout, 0.5, &p, &f, 0.004, 0.01, 43);
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn layout_file_round_trip_and_count_check() {
        let layout = TaxelLayout::reference();
        let text = layout.to_toml_string();
        let back = TaxelLayout::from_toml_str(&text, Path::new("mem")).unwrap();
        assert_eq!(back.len(), 30);
        for (a, b) in back.taxels().iter().zip(layout.taxels()) {
            for (x, y) in a.pose_vector().iter().zip(b.pose_vector()) {
                assert!((x - y).abs() < 1e-15);
            }
        }
        let bad = text.replace("n_tx = 30", "n_tx = 29");
        let err = TaxelLayout::from_toml_str(&bad, Path::new("mem")).unwrap_err();
        assert!(err.to_string().contains("n_tx"));
    }

    #[test]
    fn inward_normal_is_rejected() {
        let t = Taxel::new(Vec3::new(0.0, 0.0, -0.012), [0.0; 3]);
        assert!(TaxelLayout::new("bad", 0.012, vec![t]).is_err());
    }

    #[test]
    fn tactile_log_round_trip() {
        let layout = TaxelLayout::reference();
        let frames: Vec<TactileFrame> = (0..3)
            .map(|i| {
                simulate_taxels(
                    &layout,
                    i as f64 / 150.0,
                    &layout.taxels()[i].position,
                    &Vec3::new(0.0, 0.1, 1.0),
                    0.004,
                    0.01,
                    i as u64,
                )
            })
            .collect();
        let mut buf = Vec::new();
        write_tactile_log(&mut buf, &frames, 30).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(text.lines().next().unwrap().split(',').count(), 91);
        let back = read_tactile_log(buf.as_slice()).unwrap();
        assert_eq!(back, frames);
    }
}
