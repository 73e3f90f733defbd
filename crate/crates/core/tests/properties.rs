//! Property tests of the invariants the control loop relies on.

use std::f64::consts::PI;

use proptest::prelude::*;

use fingerforce::chain::Pose6;
use fingerforce::controller::orientation_error;
use fingerforce::rot3::{axis_angle_of, rodrigues_between, AxisAngle, Vec3};
use fingerforce::sim::{contact_force, contact_query, RigidSurface};
use fingerforce::stability::{predict, train, FeatureVector, Sample, TrainConfig};
use fingerforce::tactile::{contact_pose, simulate_taxels, TactileFrame, TaxelLayout};

fn vec3(range: f64) -> impl Strategy<Value = Vec3> {
    prop::array::uniform3(-range..range).prop_map(Vec3::from)
}

fn nonzero(range: f64) -> impl Strategy<Value = Vec3> {
    vec3(range).prop_filter("norm too small", move |v| v.norm() > 1e-3 * range)
}

fn angle_between(a: &Vec3, b: &Vec3) -> f64 {
    a.cross(b).norm().atan2(a.dot(b))
}

proptest! {
    #[test]
    fn rodrigues_maps_direction_onto_target(f in nonzero(10.0), f_d in nonzero(10.0)) {
        let r = rodrigues_between(&f, &f_d).unwrap();
        prop_assert!((r.rotate(&f.normalize()) - f_d.normalize()).norm() < 1e-9);
        let m = r.matrix();
        prop_assert!((m * m.transpose() - nalgebra::Matrix3::identity()).amax() < 1e-12);
        prop_assert!((m.determinant() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rodrigues_handles_near_antiparallel(f in nonzero(1.0), tilt in 0.0..1e-3f64, side in nonzero(1.0)) {
        let axis = f.cross(&side);
        prop_assume!(axis.norm() > 1e-6);
        let f_d = AxisAngle::new(tilt, axis).unwrap().to_rotation().rotate(&-f);
        let r = rodrigues_between(&f, &f_d).unwrap();
        prop_assert!((r.rotate(&f.normalize()) - f_d.normalize()).norm() < 1e-9);
    }

    #[test]
    fn axis_angle_round_trip(angle in 1e-6..PI - 1e-6, axis in nonzero(1.0)) {
        let back = axis_angle_of(&AxisAngle::new(angle, axis).unwrap().to_rotation());
        prop_assert!((back.angle() - angle).abs() < 1e-9);
        prop_assert!((back.vector() - axis.normalize() * angle).norm() < 1e-8);
    }

    #[test]
    fn orientation_error_angle_is_the_angle_between(f in nonzero(5.0), f_d in nonzero(5.0)) {
        let o = orientation_error(&f, &f_d).unwrap();
        prop_assert!((o.angle() - angle_between(&f, &f_d)).abs() < 1e-9);
        prop_assert!(o.angle() >= 0.0 && o.angle() <= PI);
    }

    #[test]
    fn friction_stays_inside_the_cone(
        mu in 0.0..1.5f64,
        height in -0.011..0.0099f64,
        v in vec3(0.5),
        stretch in vec3(0.01),
        damping in 0.0..50.0f64,
    ) {
        let mut surface = RigidSurface::plane(Vec3::zeros(), Vec3::z(), 2000.0, damping, mu);
        surface.tangential_damping = 25.0;
        let tip = Pose6::new(Vec3::new(0.0, 0.0, height), fingerforce::rot3::RotationMatrix::identity());
        let geom = contact_query(&surface, &tip, 0.01).unwrap();
        let f = contact_force(&surface, &geom, &v, &stretch);
        prop_assert!(f.normal_magnitude >= 0.0);
        prop_assert!(f.tangential_magnitude <= mu * f.normal_magnitude * (1.0 + 1e-12) + 1e-15);
        // the finger pushes into the body and never pulls on it
        prop_assert!((f.f_ext.dot(&geom.normal) + f.normal_magnitude).abs() < 1e-9);
        prop_assert!(f.stretch.dot(&geom.normal).abs() < 1e-15);
    }

    #[test]
    fn taxel_simulation_is_deterministic(seed in any::<u64>(), pitch in -0.25..1.25f64, load in 0.5..5.0f64) {
        let layout = TaxelLayout::reference();
        let p = Vec3::new(pitch.sin(), 0.0, pitch.cos()) * layout.fingertip_radius();
        let a = simulate_taxels(&layout, 0.0, &p, &(p.normalize() * load), 0.004, 0.01, seed);
        let b = simulate_taxels(&layout, 0.0, &p, &(p.normalize() * load), 0.004, 0.01, seed);
        prop_assert_eq!(a, b);
    }

    #[test]
    fn contact_pose_ignores_overall_scale(
        readings in prop::collection::vec(vec3(1.0), 30),
        scale in 0.1..10.0f64,
    ) {
        let layout = TaxelLayout::reference();
        let frame = TactileFrame { timestamp: 0.0, readings: readings.clone() };
        let scaled = TactileFrame { timestamp: 0.0, readings: readings.iter().map(|r| r * scale).collect() };
        let a = contact_pose(&layout, &frame, 0.0).unwrap();
        let b = contact_pose(&layout, &scaled, 0.0).unwrap();
        prop_assert!((a.position - b.position).norm() < 1e-12);
        for k in 0..3 {
            prop_assert!((a.rpy[k] - b.rpy[k]).abs() < 1e-9);
        }
    }
}

fn samples(raw: &[(Vec<f64>, bool)]) -> Vec<Sample> {
    raw.iter()
        .map(|(x, y)| Sample {
            features: FeatureVector(x.clone()),
            label: u8::from(*y),
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    /// Standardizing inside the model makes predictions indifferent to a
    /// positive per-feature affine change of units.
    #[test]
    fn training_is_invariant_to_feature_units(
        raw in prop::collection::vec((prop::collection::vec(-3.0..3.0f64, 7), any::<bool>()), 20..40),
        scale in prop::collection::vec(1e-3..1e3f64, 7),
        shift in prop::collection::vec(-100.0..100.0f64, 7),
    ) {
        let data = samples(&raw);
        let positives = data.iter().filter(|s| s.label == 1).count();
        prop_assume!(positives > 0 && positives < data.len());
        let moved: Vec<Sample> = data
            .iter()
            .map(|s| Sample {
                features: FeatureVector(
                    s.features.0.iter().zip(scale.iter().zip(&shift)).map(|(v, (a, b))| a * v + b).collect(),
                ),
                label: s.label,
            })
            .collect();
        let cfg = TrainConfig { epochs: 300, ..TrainConfig::default() };
        let m1 = train(&data, &cfg).unwrap();
        let m2 = train(&moved, &cfg).unwrap();
        for (a, b) in data.iter().zip(&moved) {
            let (p1, p2) = (predict(&m1, &a.features).unwrap().p, predict(&m2, &b.features).unwrap().p);
            prop_assert!((p1 - p2).abs() < 1e-6, "{} vs {}", p1, p2);
        }
    }
}
