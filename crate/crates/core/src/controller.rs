//! Switching control law.
//!
//! While the contact is unstable (`y = 0`) a PD law with inertia and gravity
//! compensation drives the joints toward a reference. Once the contact is
//! stable (`y = 1`) the PD term is gated off and a task torque rotates the
//! fingertip about the contact so that the measured force direction turns
//! toward the desired one.

use nalgebra::{DMatrix, DVector, Matrix3xX};
use serde::{Deserialize, Serialize};

use crate::chain::JointChain;
use crate::error::{ChainError, Rot3Error};
use crate::rot3::{axis_angle_of, rodrigues_between_eps, AxisAngle, RotationMatrix, Vec3, DEFAULT_FORCE_EPS};
use crate::stability::ContactState;
use crate::tactile::ContactEstimate;

/// Gains of both control modes. Diagonal matrices are stored as their
/// diagonals.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControllerGains {
    /// 1/s^2, one per joint
    pub kp: Vec<f64>,
    /// 1/s, one per joint
    pub kd: Vec<f64>,
    /// N m per radian
    pub k_theta: [f64; 3],
    /// force per unit of commanded normal hold
    pub k_s: [f64; 3],
    /// desired force direction in {W}; normalized on validation
    pub f_d: [f64; 3],
    /// force norm below which the direction is undefined
    #[serde(default = "default_force_eps")]
    pub force_eps: f64,
    /// Jacobian block the normal-hold term goes through
    #[serde(default)]
    pub hold: HoldMap,
}

/// How the `K_s` normal-hold term reaches the joints.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HoldMap {
    /// `J_w^T`, exactly as the control law is written: a moment about the
    /// contact normal
    #[default]
    Angular,
    /// `J_v^T`: a push along the contact normal at the fingertip
    Linear,
}

fn default_force_eps() -> f64 {
    DEFAULT_FORCE_EPS
}

impl ControllerGains {
    /// Uniform gains for `dof` joints.
    pub fn uniform(dof: usize, kp: f64, kd: f64, k_theta: f64, k_s: f64, f_d: Vec3) -> Self {
        Self {
            kp: vec![kp; dof],
            kd: vec![kd; dof],
            k_theta: [k_theta; 3],
            k_s: [k_s; 3],
            f_d: f_d.into(),
            force_eps: DEFAULT_FORCE_EPS,
            hold: HoldMap::Angular,
        }
    }

    /// Checks sign and shape invariants and normalizes `f_d` in place.
    pub fn validate(&mut self, dof: usize) -> Result<(), String> {
        if self.kp.len() != dof || self.kd.len() != dof {
            return Err(format!(
                "kp and kd need {dof} entries, got {} and {}",
                self.kp.len(),
                self.kd.len()
            ));
        }
        let all = self.kp.iter().chain(&self.kd).chain(&self.k_theta).chain(&self.k_s);
        if all.clone().any(|g| !(*g >= 0.0) || !g.is_finite()) {
            return Err("gains must be finite and >= 0".into());
        }
        let f_d = Vec3::from(self.f_d);
        let n = f_d.norm();
        if !(n > 0.0) || !n.is_finite() {
            return Err("f_d must be a nonzero finite vector".into());
        }
        self.f_d = (f_d / n).into();
        if !(self.force_eps > 0.0) {
            return Err("force_eps must be > 0".into());
        }
        Ok(())
    }

    pub fn desired_direction(&self) -> Vec3 {
        Vec3::from(self.f_d)
    }

    pub fn scale_k_theta(&mut self, factor: f64) {
        self.k_theta.iter_mut().for_each(|k| *k *= factor);
    }
}

/// One control tick's output.
#[derive(Clone, Debug, PartialEq)]
pub struct ControlCommand {
    pub tau_motion: DVector<f64>,
    pub tau_task: DVector<f64>,
    /// exact sum of the two terms, before the torque clamp
    pub tau_cmd: DVector<f64>,
    /// `tau_cmd` after the per-joint clamp; this is what the plant receives
    pub tau_applied: DVector<f64>,
    pub saturated: bool,
    /// `None` when no usable force was measured this tick
    pub theta: Option<f64>,
    pub r: Vec3,
    /// contact state actually used for gating this tick
    pub y: u8,
    /// measured force in {W}
    pub world_force: Vec3,
    /// orientation error expressed in {C} (diagnostic only)
    pub delta_phi_contact: Vec3,
}

/// Axis-angle of the rotation carrying `f_w` onto `f_d`.
pub fn orientation_error(f_w: &Vec3, f_d: &Vec3) -> Result<AxisAngle, Rot3Error> {
    orientation_error_eps(f_w, f_d, DEFAULT_FORCE_EPS)
}

pub fn orientation_error_eps(f_w: &Vec3, f_d: &Vec3, eps: f64) -> Result<AxisAngle, Rot3Error> {
    Ok(axis_angle_of(&rodrigues_between_eps(f_w, f_d, eps)?))
}

/// `y [J_w^T K_theta theta r + J_h^T K_s (R_WE R_EC) n]`, where `J_h` is
/// `J_w` or `J_v` as selected by [`HoldMap`].
#[allow(clippy::too_many_arguments)]
pub fn task_torque(
    j_omega: &Matrix3xX<f64>,
    j_hold: &Matrix3xX<f64>,
    theta: f64,
    r: &Vec3,
    gains: &ControllerGains,
    r_we: &RotationMatrix,
    r_ec: &RotationMatrix,
    n: &Vec3,
    y: u8,
) -> DVector<f64> {
    if y == 0 {
        return DVector::zeros(j_omega.ncols());
    }
    let k_theta = Vec3::from(gains.k_theta);
    let k_s = Vec3::from(gains.k_s);
    let turn = k_theta.component_mul(&(r * theta));
    let hold = k_s.component_mul(&(*r_we * (*r_ec * *n)));
    j_omega.transpose() * turn + j_hold.transpose() * hold
}

/// `(1 - y) M (K_p e + K_d edot) + g`.
pub fn motion_torque(
    m: &DMatrix<f64>,
    gains: &ControllerGains,
    e: &DVector<f64>,
    edot: &DVector<f64>,
    g_q: &DVector<f64>,
    y: u8,
) -> DVector<f64> {
    if y == 1 {
        return g_q.clone();
    }
    let kp = DVector::from_column_slice(&gains.kp);
    let kd = DVector::from_column_slice(&gains.kd);
    m * (kp.component_mul(e) + kd.component_mul(edot)) + g_q
}

/// Outward normal of the contact frame, expressed in {C}.
pub const CONTACT_NORMAL: Vec3 = Vec3::new(0.0, 0.0, 1.0);

/// Full control tick: force in {W}, orientation error, both torque terms,
/// their sum and the torque clamp.
///
/// `y` is taken from `state` but forced to 0 when the estimate is inactive
/// or the measured force is too small to define a direction.
pub fn control_step(
    chain: &JointChain,
    q: &[f64],
    qdot: &[f64],
    q_ref: &[f64],
    contact: &ContactEstimate,
    state: &ContactState,
    gains: &ControllerGains,
) -> Result<ControlCommand, ChainError> {
    let dof = chain.dof();
    for len in [qdot.len(), q_ref.len()] {
        if len != dof {
            return Err(ChainError::DimensionMismatch {
                expected: dof,
                got: len,
            });
        }
    }
    let kin = chain.kinematics(q)?;
    let r_we = kin.end_effector.orientation;
    let r_ec = contact.rotation();
    let jac = kin.end_effector_jacobian();

    let mut world_force = Vec3::zeros();
    let mut err = None;
    if contact.active {
        world_force = r_we * (r_ec * contact.force);
        err = orientation_error_eps(&world_force, &gains.desired_direction(), gains.force_eps).ok();
    }
    let y = match err {
        Some(_) => state.y,
        None => 0,
    };
    let (theta, r) = match &err {
        Some(o) => (o.angle(), o.axis()),
        None => (0.0, Vec3::zeros()),
    };

    let m = chain.mass_matrix(q)?;
    let g_q = chain.gravity_vector(q)?;
    let e = DVector::from_column_slice(q_ref) - DVector::from_column_slice(q);
    let edot = -DVector::from_column_slice(qdot);
    let tau_motion = motion_torque(&m, gains, &e, &edot, &g_q, y);
    let j_hold = match gains.hold {
        HoldMap::Angular => &jac.angular,
        HoldMap::Linear => &jac.linear,
    };
    let tau_task = task_torque(&jac.angular, j_hold, theta, &r, gains, &r_we, &r_ec, &CONTACT_NORMAL, y);
    let tau_cmd = &tau_motion + &tau_task;

    let limits = chain.torque_limits();
    let mut saturated = false;
    let tau_applied = tau_cmd.zip_map(&limits, |t, lim| {
        if t.abs() > lim {
            saturated = true;
            t.clamp(-lim, lim)
        } else {
            t
        }
    });
    let delta_phi_contact = (r_we * r_ec).transpose() * (r * theta);

    Ok(ControlCommand {
        tau_motion,
        tau_task,
        tau_cmd,
        tau_applied,
        saturated,
        theta: err.map(|o| o.angle()),
        r,
        y,
        world_force,
        delta_phi_contact,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::test_chains::finger;
    use crate::rot3::rpy_to_matrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn gains(k_s: f64) -> ControllerGains {
        ControllerGains::uniform(4, 40.0, 4.0, 0.15, k_s, Vec3::new(0.0, 0.0, -1.0))
    }

    fn active_contact(force: Vec3) -> ContactEstimate {
        ContactEstimate {
            position: Vec3::new(0.0, 0.0, 0.012),
            rpy: [0.0, 0.0, 0.0],
            force,
            mean_activation: 0.1,
            active: true,
        }
    }

    #[test]
    fn orientation_error_examples() {
        let o = orientation_error(&Vec3::new(0.0, 0.0, 2.0), &Vec3::new(0.0, 0.0, 1.0)).unwrap();
        assert_eq!(o.angle(), 0.0);
        let o = orientation_error(&Vec3::x(), &Vec3::y()).unwrap();
        assert!((o.angle() - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
        assert!((o.axis() - Vec3::z()).norm() < 1e-12);
        assert!(matches!(
            orientation_error(&Vec3::zeros(), &Vec3::x()),
            Err(Rot3Error::DegenerateForce { .. })
        ));
    }

    #[test]
    fn orientation_error_matches_dot_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..500 {
            let a = Vec3::from_fn(|_, _| rng.random_range(-1.0..1.0));
            let b = Vec3::from_fn(|_, _| rng.random_range(-1.0..1.0));
            let oracle = (a.dot(&b) / (a.norm() * b.norm())).clamp(-1.0, 1.0).acos();
            let got = orientation_error(&a, &b).unwrap().angle();
            assert!((got - oracle).abs() < 1e-9, "{got} vs {oracle}");
        }
    }

    #[test]
    fn task_torque_gating_and_hand_product() {
        let j = Matrix3xX::from_row_slice(&[
            1.0, 2.0, 0.0, -1.0, //
            0.5, 0.0, 3.0, 1.0, //
            -2.0, 1.0, 0.25, 4.0,
        ]);
        let id = RotationMatrix::identity();
        let mut g = gains(0.3);
        assert_eq!(
            task_torque(&j, &j, 0.7, &Vec3::x(), &g, &id, &id, &CONTACT_NORMAL, 0),
            DVector::zeros(4)
        );
        g.k_s = [0.0; 3];
        assert_eq!(
            task_torque(&j, &j, 0.0, &Vec3::x(), &g, &id, &id, &CONTACT_NORMAL, 1),
            DVector::zeros(4)
        );
        g.k_theta = [2.0; 3];
        let tau = task_torque(&j, &j, 0.5, &Vec3::z(), &g, &id, &id, &CONTACT_NORMAL, 1);
        // J^T (0,0,1) is the third row of J
        let expected = DVector::from_vec(vec![-2.0, 1.0, 0.25, 4.0]);
        assert!((tau - expected).amax() < 1e-15);
    }

    #[test]
    fn motion_torque_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = DMatrix::from_fn(4, 4, |_, _| rng.random_range(-1.0..1.0));
        let m = &a * a.transpose() + DMatrix::identity(4, 4);
        let g_q = DVector::from_fn(4, |_, _| rng.random_range(-1.0..1.0));
        let e = DVector::from_fn(4, |_, _| rng.random_range(-1.0..1.0));
        let edot = DVector::from_fn(4, |_, _| rng.random_range(-1.0..1.0));
        let gn = gains(0.0);
        assert_eq!(motion_torque(&m, &gn, &e, &edot, &g_q, 1), g_q);
        let zero = DVector::zeros(4);
        assert_eq!(motion_torque(&m, &gn, &zero, &zero, &g_q, 0), g_q);
        let got = motion_torque(&m, &gn, &e, &edot, &g_q, 0);
        let mut oracle = g_q.clone();
        for i in 0..4 {
            for k in 0..4 {
                oracle[i] += m[(i, k)] * (40.0 * e[k] + 4.0 * edot[k]);
            }
        }
        assert!((got - oracle).amax() < 1e-12);
    }

    #[test]
    fn no_contact_at_reference_is_gravity_hold() {
        let chain = finger();
        let q = [0.1, 0.3, 0.4, 0.2];
        let cmd = control_step(
            &chain,
            &q,
            &[0.0; 4],
            &q,
            &ContactEstimate::inactive(0.0),
            &ContactState::from_probability(0.9),
            &gains(0.05),
        )
        .unwrap();
        let g_q = chain.gravity_vector(&q).unwrap();
        assert!((&cmd.tau_cmd - &g_q).amax() < 1e-12);
        assert_eq!(cmd.y, 0);
        assert_eq!(cmd.theta, None);
    }

    #[test]
    fn aligned_force_in_stable_contact_is_gravity_hold() {
        let chain = finger();
        let q = [0.0, 0.5, 0.6, 0.3];
        let contact = active_contact(Vec3::new(0.1, -0.2, 1.5));
        let r_we = chain.forward_kinematics(&q).unwrap().orientation;
        let f_w = r_we * (contact.rotation() * contact.force);
        let mut g = gains(0.0);
        g.f_d = f_w.into();
        g.validate(4).unwrap();
        let cmd = control_step(
            &chain,
            &q,
            &[0.3; 4],
            &[0.0; 4],
            &contact,
            &ContactState::from_probability(0.8),
            &g,
        )
        .unwrap();
        assert_eq!(cmd.y, 1);
        assert!(cmd.theta.unwrap() < 1e-7);
        let g_q = chain.gravity_vector(&q).unwrap();
        assert!((&cmd.tau_cmd - &g_q).amax() < 1e-8);
    }

    #[test]
    fn degenerate_force_falls_back_to_motion_control() {
        let chain = finger();
        let q = [0.0, 0.5, 0.6, 0.3];
        let cmd = control_step(
            &chain,
            &q,
            &[0.0; 4],
            &[0.1, 0.6, 0.6, 0.3],
            &active_contact(Vec3::zeros()),
            &ContactState::from_probability(0.99),
            &gains(0.05),
        )
        .unwrap();
        assert_eq!(cmd.y, 0);
        assert_eq!(cmd.tau_task, DVector::zeros(4));
        assert!(cmd.tau_motion != chain.gravity_vector(&q).unwrap());
    }

    #[test]
    fn composition_and_direction_only_dependence() {
        let chain = finger();
        let q = [0.05, 0.4, 0.7, 0.5];
        let q_ref = [0.0, 0.6, 0.8, 0.6];
        let qdot = [0.01, -0.02, 0.03, 0.0];
        let mut contact = active_contact(Vec3::new(0.4, 0.3, 1.0));
        contact.rpy = [0.1, -0.2, 0.05];
        for hold in [HoldMap::Angular, HoldMap::Linear] {
            let mut g = gains(0.05);
            g.hold = hold;
            for y in [0u8, 1] {
                let state = ContactState {
                    p: if y == 1 { 0.9 } else { 0.1 },
                    y,
                };
                let cmd = control_step(&chain, &q, &qdot, &q_ref, &contact, &state, &g).unwrap();

                let kin = chain.kinematics(&q).unwrap();
                let jac = kin.end_effector_jacobian();
                let r_we = kin.end_effector.orientation;
                let r_ec = rpy_to_matrix(0.1, -0.2, 0.05);
                let f_w = r_we * (r_ec * contact.force);
                let o = orientation_error(&f_w, &g.desired_direction()).unwrap();
                let j_hold = if hold == HoldMap::Linear {
                    &jac.linear
                } else {
                    &jac.angular
                };
                let tau_task = task_torque(
                    &jac.angular,
                    j_hold,
                    o.angle(),
                    &o.axis(),
                    &g,
                    &r_we,
                    &r_ec,
                    &CONTACT_NORMAL,
                    y,
                );
                let e = DVector::from_column_slice(&q_ref) - DVector::from_column_slice(&q);
                let edot = -DVector::from_column_slice(&qdot);
                let tau_motion = motion_torque(
                    &chain.mass_matrix(&q).unwrap(),
                    &g,
                    &e,
                    &edot,
                    &chain.gravity_vector(&q).unwrap(),
                    y,
                );
                assert_eq!(cmd.tau_task, tau_task);
                assert_eq!(cmd.tau_motion, tau_motion);
                assert_eq!(cmd.tau_cmd, &tau_motion + &tau_task);

                let mut scaled = contact.clone();
                scaled.force *= 3.0;
                let cmd3 = control_step(&chain, &q, &qdot, &q_ref, &scaled, &state, &g).unwrap();
                assert!((&cmd3.tau_task - &cmd.tau_task).amax() < 1e-12);
            }
        }
    }

    #[test]
    fn linear_hold_pushes_along_the_contact_normal() {
        let j = Matrix3xX::from_row_slice(&[
            1.0, 2.0, 0.0, //
            0.0, 1.0, 3.0, //
            -1.0, 0.5, 2.0,
        ]);
        let zero = Matrix3xX::zeros(3);
        let mut g = ControllerGains::uniform(3, 0.0, 0.0, 0.0, 0.25, Vec3::z());
        g.hold = HoldMap::Linear;
        // {C} normal mapped to world -y
        let r_ec = rpy_to_matrix(std::f64::consts::FRAC_PI_2, 0.0, 0.0);
        let id = RotationMatrix::identity();
        let tau = task_torque(&zero, &j, 0.3, &Vec3::x(), &g, &id, &r_ec, &CONTACT_NORMAL, 1);
        // 0.25 * J^T (0,-1,0) = -0.25 * second row
        let expected = DVector::from_vec(vec![0.0, -0.25, -0.75]);
        assert!((tau - expected).amax() < 1e-15);
    }

    #[test]
    fn clamp_flags_saturation() {
        let chain = finger();
        let q = [0.0, 0.0, 0.0, 0.0];
        let cmd = control_step(
            &chain,
            &q,
            &[0.0; 4],
            &[5.0, 5.0, 5.0, 5.0],
            &ContactEstimate::inactive(0.0),
            &ContactState::unstable(),
            &ControllerGains::uniform(4, 1e6, 0.0, 0.0, 0.0, Vec3::z()),
        )
        .unwrap();
        assert!(cmd.saturated);
        let lim = chain.torque_limits();
        for i in 0..4 {
            assert!(cmd.tau_applied[i].abs() <= lim[i]);
        }
        assert!(cmd.tau_cmd.amax() > lim.amax());
    }

    #[test]
    fn gains_validation() {
        let mut g = gains(0.05);
        g.f_d = [0.0, 3.0, 4.0];
        g.validate(4).unwrap();
        assert!((Vec3::from(g.f_d) - Vec3::new(0.0, 0.6, 0.8)).norm() < 1e-15);
        assert!(g.validate(3).is_err());
        g.kp[0] = -1.0;
        assert!(g.validate(4).is_err());
    }
}
