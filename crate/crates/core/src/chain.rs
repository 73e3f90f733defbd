//! Serial-chain finger kinematics and dynamics.
//!
//! Frames are composed as `T_i = T_{i-1} * origin_i * Rot(axis_i, q_i)`; link
//! `i` rides on the frame after joint `i`, and the end-effector frame {E} is
//! the last link frame composed with the fixed `tip` transform.

use std::path::Path;

use nalgebra::{DMatrix, DVector, Dyn, Matrix3, Matrix3xX, OMatrix, U3};
use serde::{Deserialize, Serialize};

use crate::error::ChainError;
use crate::rot3::{rotation_about, rpy_to_matrix, RotationMatrix, Vec3};

/// Step used for the numeric mass-matrix derivatives behind the Coriolis term.
const CHRISTOFFEL_STEP: f64 = 1e-6;

/// Rigid transform: position plus orientation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Pose6 {
    pub position: Vec3,
    pub orientation: RotationMatrix,
}

impl Pose6 {
    pub fn identity() -> Self {
        Self {
            position: Vec3::zeros(),
            orientation: RotationMatrix::identity(),
        }
    }

    pub fn new(position: Vec3, orientation: RotationMatrix) -> Self {
        Self { position, orientation }
    }

    pub fn from_xyz_rpy(xyz: [f64; 3], rpy: [f64; 3]) -> Self {
        Self {
            position: Vec3::from(xyz),
            orientation: rpy_to_matrix(rpy[0], rpy[1], rpy[2]),
        }
    }

    /// `self * other`: `other` expressed in the frame of `self`.
    pub fn compose(&self, other: &Pose6) -> Pose6 {
        Pose6 {
            position: self.position + self.orientation * other.position,
            orientation: self.orientation * other.orientation,
        }
    }

    pub fn transform_point(&self, p: &Vec3) -> Vec3 {
        self.position + self.orientation * *p
    }

    pub fn inverse_transform_point(&self, p: &Vec3) -> Vec3 {
        self.orientation.transpose() * (p - self.position)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Joint {
    pub name: String,
    /// Fixed transform from the parent frame to the joint frame.
    pub origin: Pose6,
    /// Unit rotation axis in the joint frame.
    pub axis: Vec3,
    /// Position limits, radians.
    pub limits: (f64, f64),
    /// Torque limit, N·m.
    pub torque_limit: f64,
    /// Viscous joint friction, N·m·s/rad.
    pub damping: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Link {
    /// kg
    pub mass: f64,
    /// Center of mass in the link frame, meters.
    pub com: Vec3,
    /// Rotational inertia about the center of mass, link frame, kg·m².
    pub inertia: Matrix3<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct JointChain {
    name: String,
    base: Pose6,
    tip: Pose6,
    joints: Vec<Joint>,
    links: Vec<Link>,
    gravity: Vec3,
}

/// Joint configuration and velocity.
#[derive(Clone, Debug, PartialEq)]
pub struct JointState {
    pub q: DVector<f64>,
    pub qdot: DVector<f64>,
}

impl JointState {
    pub fn at_rest(q: DVector<f64>) -> Self {
        let n = q.len();
        Self {
            q,
            qdot: DVector::zeros(n),
        }
    }
}

/// Geometric Jacobian split into its linear and angular blocks.
#[derive(Clone, Debug, PartialEq)]
pub struct Jacobian {
    pub linear: Matrix3xX<f64>,
    pub angular: Matrix3xX<f64>,
}

/// World-frame joint origins, axes and link frames for one configuration.
#[derive(Clone, Debug)]
pub struct Kinematics {
    pub joint_origins: Vec<Vec3>,
    pub joint_axes: Vec<Vec3>,
    pub link_frames: Vec<Pose6>,
    pub end_effector: Pose6,
}

impl Kinematics {
    /// Jacobian of a world point rigidly attached to `link`.
    pub fn point_jacobian(&self, link: usize, point: &Vec3) -> Jacobian {
        let m = self.joint_axes.len();
        let mut linear = Matrix3xX::zeros(m);
        let mut angular = Matrix3xX::zeros(m);
        for i in 0..=link.min(m - 1) {
            let z = self.joint_axes[i];
            linear.set_column(i, &z.cross(&(point - self.joint_origins[i])));
            angular.set_column(i, &z);
        }
        Jacobian { linear, angular }
    }

    pub fn end_effector_jacobian(&self) -> Jacobian {
        self.point_jacobian(self.joint_axes.len() - 1, &self.end_effector.position)
    }
}

impl JointChain {
    pub fn new(
        name: impl Into<String>,
        base: Pose6,
        tip: Pose6,
        joints: Vec<Joint>,
        links: Vec<Link>,
        gravity: Vec3,
    ) -> Result<Self, ChainError> {
        let chain = Self {
            name: name.into(),
            base,
            tip,
            joints,
            links,
            gravity,
        };
        chain.validate()?;
        Ok(chain)
    }

    fn validate(&self) -> Result<(), ChainError> {
        let invalid = |msg: String| Err(ChainError::Invalid(msg));
        if self.joints.is_empty() {
            return invalid("chain has no joints".into());
        }
        if self.joints.len() != self.links.len() {
            return invalid(format!("{} joints but {} links", self.joints.len(), self.links.len()));
        }
        for j in &self.joints {
            if (j.axis.norm() - 1.0).abs() > 1e-6 {
                return invalid(format!("joint '{}' axis is not unit-norm", j.name));
            }
            if !(j.limits.0 < j.limits.1) {
                return invalid(format!("joint '{}' has empty limits", j.name));
            }
            if !(j.torque_limit > 0.0) {
                return invalid(format!("joint '{}' torque limit must be > 0", j.name));
            }
            if !(j.damping >= 0.0) {
                return invalid(format!("joint '{}' damping must be >= 0", j.name));
            }
        }
        for (i, l) in self.links.iter().enumerate() {
            if !(l.mass > 0.0) {
                return invalid(format!("link {i} mass must be > 0"));
            }
            let sym = (l.inertia - l.inertia.transpose()).amax();
            if sym > 1e-12 || l.inertia.cholesky().is_none() {
                return invalid(format!("link {i} inertia is not symmetric positive-definite"));
            }
        }
        Ok(())
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dof(&self) -> usize {
        self.joints.len()
    }

    pub fn joints(&self) -> &[Joint] {
        &self.joints
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn base(&self) -> &Pose6 {
        &self.base
    }

    pub fn tip(&self) -> &Pose6 {
        &self.tip
    }

    pub fn gravity(&self) -> Vec3 {
        self.gravity
    }

    pub fn torque_limits(&self) -> DVector<f64> {
        DVector::from_iterator(self.dof(), self.joints.iter().map(|j| j.torque_limit))
    }

    pub fn damping(&self) -> DVector<f64> {
        DVector::from_iterator(self.dof(), self.joints.iter().map(|j| j.damping))
    }

    fn check_dim(&self, q: &[f64]) -> Result<(), ChainError> {
        if q.len() != self.dof() {
            return Err(ChainError::DimensionMismatch {
                expected: self.dof(),
                got: q.len(),
            });
        }
        Ok(())
    }

    pub fn kinematics(&self, q: &[f64]) -> Result<Kinematics, ChainError> {
        self.check_dim(q)?;
        let m = self.dof();
        let mut joint_origins = Vec::with_capacity(m);
        let mut joint_axes = Vec::with_capacity(m);
        let mut link_frames = Vec::with_capacity(m);
        let mut frame = self.base;
        for (joint, &qi) in self.joints.iter().zip(q) {
            let at_joint = frame.compose(&joint.origin);
            joint_origins.push(at_joint.position);
            joint_axes.push(at_joint.orientation * joint.axis);
            frame = Pose6 {
                position: at_joint.position,
                orientation: at_joint.orientation * rotation_about(&joint.axis, qi),
            };
            link_frames.push(frame);
        }
        let end_effector = frame.compose(&self.tip);
        Ok(Kinematics {
            joint_origins,
            joint_axes,
            link_frames,
            end_effector,
        })
    }

    /// Pose of {E} in {W}.
    pub fn forward_kinematics(&self, q: &[f64]) -> Result<Pose6, ChainError> {
        Ok(self.kinematics(q)?.end_effector)
    }

    /// `(J_v, J_w)` of the {E} origin.
    pub fn jacobian(&self, q: &[f64]) -> Result<Jacobian, ChainError> {
        Ok(self.kinematics(q)?.end_effector_jacobian())
    }

    /// `M(q) = sum_l (J_vl^T m_l J_vl + J_wl^T I_l(q) J_wl)` over link
    /// center-of-mass Jacobians.
    pub fn mass_matrix(&self, q: &[f64]) -> Result<DMatrix<f64>, ChainError> {
        let kin = self.kinematics(q)?;
        Ok(self.mass_matrix_from(&kin))
    }

    fn mass_matrix_from(&self, kin: &Kinematics) -> DMatrix<f64> {
        let m = self.dof();
        let mut mass = DMatrix::zeros(m, m);
        for (l, link) in self.links.iter().enumerate() {
            let frame = &kin.link_frames[l];
            let com = frame.transform_point(&link.com);
            let jac = kin.point_jacobian(l, &com);
            let rot = frame.orientation.matrix();
            let inertia_w = rot * link.inertia * rot.transpose();
            let jv: OMatrix<f64, U3, Dyn> = jac.linear;
            let jw = jac.angular;
            mass += jv.transpose() * jv * link.mass + jw.transpose() * inertia_w * jw;
        }
        // exact symmetry; the two triangles differ only by rounding
        (&mass + mass.transpose()) * 0.5
    }

    /// Generalized gravity load `g(q) = -sum_l J_vl(com)^T m_l g_W`; applying
    /// `tau = g(q)` holds the chain still.
    pub fn gravity_vector(&self, q: &[f64]) -> Result<DVector<f64>, ChainError> {
        let kin = self.kinematics(q)?;
        let mut g = DVector::zeros(self.dof());
        for (l, link) in self.links.iter().enumerate() {
            let com = kin.link_frames[l].transform_point(&link.com);
            let jv = kin.point_jacobian(l, &com).linear;
            g -= jv.transpose() * (self.gravity * link.mass);
        }
        Ok(g)
    }

    pub fn potential_energy(&self, q: &[f64]) -> Result<f64, ChainError> {
        let kin = self.kinematics(q)?;
        Ok(self
            .links
            .iter()
            .enumerate()
            .map(|(l, link)| {
                let com = kin.link_frames[l].transform_point(&link.com);
                -link.mass * self.gravity.dot(&com)
            })
            .sum())
    }

    pub fn kinetic_energy(&self, q: &[f64], qdot: &[f64]) -> Result<f64, ChainError> {
        self.check_dim(qdot)?;
        let mass = self.mass_matrix(q)?;
        let v = DVector::from_column_slice(qdot);
        Ok(0.5 * v.dot(&(mass * &v)))
    }

    /// `C(q, qdot) qdot` from Christoffel symbols of numerically
    /// differentiated `M(q)`.
    pub fn coriolis_torque(&self, q: &[f64], qdot: &[f64]) -> Result<DVector<f64>, ChainError> {
        self.check_dim(q)?;
        self.check_dim(qdot)?;
        let m = self.dof();
        let mut dm = Vec::with_capacity(m);
        let mut qp = q.to_vec();
        for k in 0..m {
            qp[k] = q[k] + CHRISTOFFEL_STEP;
            let plus = self.mass_matrix(&qp)?;
            qp[k] = q[k] - CHRISTOFFEL_STEP;
            let minus = self.mass_matrix(&qp)?;
            qp[k] = q[k];
            dm.push((plus - minus) / (2.0 * CHRISTOFFEL_STEP));
        }
        let v = DVector::from_column_slice(qdot);
        // c_i = sum_jk (dM_ij/dq_k - 1/2 dM_jk/dq_i) v_j v_k
        let mut c = DVector::zeros(m);
        let mut mdot = DMatrix::zeros(m, m);
        for (k, d) in dm.iter().enumerate() {
            mdot += d * v[k];
        }
        let first = &mdot * &v;
        for i in 0..m {
            c[i] = first[i] - 0.5 * v.dot(&(&dm[i] * &v));
        }
        Ok(c)
    }

    /// `(lower, upper)` per joint, radians.
    pub fn joint_limits(&self) -> Vec<(f64, f64)> {
        self.joints.iter().map(|j| j.limits).collect()
    }

    /// Clamps `q` into the joint limits, returning which joints were clamped.
    pub fn clamp_to_limits(&self, q: &mut [f64]) -> Vec<bool> {
        q.iter_mut()
            .zip(&self.joints)
            .map(|(qi, j)| {
                let c = qi.clamp(j.limits.0, j.limits.1);
                let hit = c != *qi;
                *qi = c;
                hit
            })
            .collect()
    }

    pub fn from_toml_str(text: &str, origin: &Path) -> Result<Self, ChainError> {
        let file: ChainFile = toml::from_str(text).map_err(|e| ChainError::Parse {
            path: origin.to_path_buf(),
            message: e.to_string(),
        })?;
        file.into_chain()
    }

    pub fn load(path: &Path) -> Result<Self, ChainError> {
        let text = std::fs::read_to_string(path).map_err(|source| ChainError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml_str(&text, path)
    }
}

/// `tau_task = J_w^T F_task`.
pub fn quasi_static_torque(j_omega: &Matrix3xX<f64>, f_task: &Vec3) -> DVector<f64> {
    j_omega.transpose() * f_task
}

/// The torque a world-frame force at `point` on `link` induces on the joints,
/// `J_c^T F`.
pub fn contact_torque(kin: &Kinematics, link: usize, point: &Vec3, force: &Vec3) -> DVector<f64> {
    kin.point_jacobian(link, point).linear.transpose() * force
}

/// Angular velocity implied by a small rotation `R_next R_prev^T` over `dt`.
pub fn angular_velocity_between(prev: &RotationMatrix, next: &RotationMatrix, dt: f64) -> Vec3 {
    let delta = next.matrix() * prev.matrix().transpose();
    let s = (delta - delta.transpose()) * 0.5;
    Vec3::new(s[(2, 1)], s[(0, 2)], s[(1, 0)]) / dt
}

// ---------------------------------------------------------------------------
// Chain description file

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameSpec {
    /// meters
    #[serde(default)]
    pub xyz: [f64; 3],
    /// radians, extrinsic roll-pitch-yaw
    #[serde(default)]
    pub rpy: [f64; 3],
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkSpec {
    pub mass: f64,
    pub com: [f64; 3],
    /// `[ixx, iyy, izz, ixy, ixz, iyz]` about the center of mass, kg·m².
    pub inertia: [f64; 6],
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JointSpec {
    pub name: String,
    pub origin_xyz: [f64; 3],
    #[serde(default)]
    pub origin_rpy: [f64; 3],
    pub axis: [f64; 3],
    pub lower: f64,
    pub upper: f64,
    pub torque_limit: f64,
    #[serde(default)]
    pub damping: f64,
    pub link: LinkSpec,
}

fn default_gravity() -> [f64; 3] {
    [0.0, 0.0, -9.81]
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainFile {
    pub name: String,
    #[serde(default = "default_gravity")]
    pub gravity: [f64; 3],
    #[serde(default)]
    pub base: FrameSpec,
    #[serde(default)]
    pub tip: FrameSpec,
    pub joint: Vec<JointSpec>,
}

impl ChainFile {
    pub fn into_chain(self) -> Result<JointChain, ChainError> {
        let mut joints = Vec::with_capacity(self.joint.len());
        let mut links = Vec::with_capacity(self.joint.len());
        for spec in self.joint {
            let i = spec.link.inertia;
            #[rustfmt::skip]
            let inertia = Matrix3::new(
                i[0], i[3], i[4],
                i[3], i[1], i[5],
                i[4], i[5], i[2],
            );
            joints.push(Joint {
                name: spec.name,
                origin: Pose6::from_xyz_rpy(spec.origin_xyz, spec.origin_rpy),
                axis: Vec3::from(spec.axis),
                limits: (spec.lower, spec.upper),
                torque_limit: spec.torque_limit,
                damping: spec.damping,
            });
            links.push(Link {
                mass: spec.link.mass,
                com: Vec3::from(spec.link.com),
                inertia,
            });
        }
        JointChain::new(
            self.name,
            Pose6::from_xyz_rpy(self.base.xyz, self.base.rpy),
            Pose6::from_xyz_rpy(self.tip.xyz, self.tip.rpy),
            joints,
            links,
            Vec3::from(self.gravity),
        )
    }
}


#[cfg(test)]
mod tests {
    use super::test_chains::*;
    use super::*;
    use nalgebra::Matrix4;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn homogeneous(p: &Pose6) -> Matrix4<f64> {
        let mut h = Matrix4::identity();
        h.fixed_view_mut::<3, 3>(0, 0).copy_from(p.orientation.matrix());
        h.fixed_view_mut::<3, 1>(0, 3).copy_from(&p.position);
        h
    }

    /// Independent forward kinematics: 4x4 homogeneous products with the
    /// joint rotation built from an axis-angle exponential via nalgebra.
    fn fk_oracle(chain: &JointChain, q: &[f64]) -> Matrix4<f64> {
        let mut h = homogeneous(chain.base());
        for (j, qi) in chain.joints().iter().zip(q) {
            let rot = nalgebra::Rotation3::from_axis_angle(&nalgebra::Unit::new_normalize(j.axis), *qi);
            let mut r = Matrix4::identity();
            r.fixed_view_mut::<3, 3>(0, 0).copy_from(rot.matrix());
            h = h * homogeneous(&j.origin) * r;
        }
        h * homogeneous(chain.tip())
    }

    fn random_q(rng: &mut ChaCha8Rng, m: usize) -> Vec<f64> {
        (0..m).map(|_| rng.random_range(-1.5..1.5)).collect()
    }

    #[test]
    fn straight_chain_offsets_sum() {
        let joints = (0..4)
            .map(|k| revolute(&format!("j{k}"), [0.0, 0.0, 0.05], Vec3::y()))
            .collect();
        let links = (0..4)
            .map(|_| Link {
                com: Vec3::new(0.0, 0.0, 0.025),
                ..rod(0.05, 0.05)
            })
            .collect();
        let chain = JointChain::new(
            "straight",
            Pose6::identity(),
            Pose6::identity(),
            joints,
            links,
            Vec3::new(0.0, 0.0, -9.81),
        )
        .unwrap();
        let pose = chain.forward_kinematics(&[0.0; 4]).unwrap();
        assert!((pose.position - Vec3::new(0.0, 0.0, 0.2)).norm() < 1e-15);
        assert_eq!(pose.orientation, RotationMatrix::identity());
        // links stacked along gravity: no moment arm
        let g = chain.gravity_vector(&[0.0; 4]).unwrap();
        assert!(g.amax() < 1e-15);
    }

    fn single_joint(mass: f64, length: f64) -> JointChain {
        JointChain::new(
            "single",
            Pose6::identity(),
            Pose6::from_xyz_rpy([length, 0.0, 0.0], [0.0; 3]),
            vec![revolute("j", [0.0; 3], Vec3::z())],
            vec![Link {
                mass,
                com: Vec3::new(length, 0.0, 0.0),
                inertia: Matrix3::from_diagonal_element(1e-6),
            }],
            Vec3::new(0.0, -9.81, 0.0),
        )
        .unwrap()
    }

    #[test]
    fn single_joint_planar_rotation() {
        let chain = single_joint(0.1, 0.1);
        let pose = chain.forward_kinematics(&[std::f64::consts::FRAC_PI_2]).unwrap();
        assert!((pose.position - Vec3::new(0.0, 0.1, 0.0)).norm() < 1e-15);

        let jac = chain.jacobian(&[0.0]).unwrap();
        assert!((jac.linear.column(0) - Vec3::new(0.0, 0.1, 0.0)).norm() < 1e-15);
        assert_eq!(jac.angular.column(0).into_owned(), Vec3::z());
    }

    #[test]
    fn pendulum_mass_and_gravity() {
        // point mass 0.1 kg at 0.1 m, horizontal, gravity along -y
        let chain = single_joint(0.1, 0.1);
        let m = chain.mass_matrix(&[0.0]).unwrap();
        assert!((m[(0, 0)] - (0.1 * 0.01 + 1e-6)).abs() < 1e-15);
        let g = chain.gravity_vector(&[0.0]).unwrap();
        assert!((g[0].abs() - 0.1 * 9.81 * 0.1).abs() < 1e-12);
        assert!((g[0] - 0.0981).abs() < 1e-12);
    }

    #[test]
    fn dimension_mismatch() {
        let chain = finger();
        assert!(matches!(
            chain.forward_kinematics(&[0.0; 3]),
            Err(ChainError::DimensionMismatch { expected: 4, got: 3 })
        ));
        assert!(chain.mass_matrix(&[0.0; 5]).is_err());
        assert!(chain.gravity_vector(&[]).is_err());
    }

    #[test]
    fn fk_matches_homogeneous_oracle() {
        let chain = finger();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let q = random_q(&mut rng, 4);
            let pose = chain.forward_kinematics(&q).unwrap();
            let h = fk_oracle(&chain, &q);
            assert!((homogeneous(&pose) - h).amax() < 1e-12);
        }
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let chain = finger();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let h = 1e-6;
        for _ in 0..50 {
            let q = random_q(&mut rng, 4);
            let jac = chain.jacobian(&q).unwrap();
            let base = chain.forward_kinematics(&q).unwrap();
            for i in 0..4 {
                let mut qp = q.clone();
                let mut qm = q.clone();
                qp[i] += h;
                qm[i] -= h;
                let pp = chain.forward_kinematics(&qp).unwrap();
                let pm = chain.forward_kinematics(&qm).unwrap();
                let dv = (pp.position - pm.position) / (2.0 * h);
                assert!((dv - jac.linear.column(i)).norm() < 1e-5);
                let w = angular_velocity_between(&pm.orientation, &pp.orientation, 2.0 * h);
                assert!((w - jac.angular.column(i)).norm() < 1e-5);
            }
            let _ = base;
        }
    }

    #[test]
    fn mass_matrix_symmetric_positive_definite() {
        let chain = finger();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let q = random_q(&mut rng, 4);
            let m = chain.mass_matrix(&q).unwrap();
            assert!((&m - m.transpose()).amax() < 1e-12);
            let eig = m.symmetric_eigenvalues();
            assert!(eig.min() > 0.0);
        }
    }

    #[test]
    fn gravity_is_potential_gradient() {
        let chain = finger();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let h = 1e-6;
        for _ in 0..50 {
            let q = random_q(&mut rng, 4);
            let g = chain.gravity_vector(&q).unwrap();
            for i in 0..4 {
                let mut qp = q.clone();
                let mut qm = q.clone();
                qp[i] += h;
                qm[i] -= h;
                let d = (chain.potential_energy(&qp).unwrap() - chain.potential_energy(&qm).unwrap()) / (2.0 * h);
                assert!((d - g[i]).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn coriolis_is_zero_at_rest_and_passive() {
        let chain = finger();
        let q = [0.1, 0.4, 0.6, 0.3];
        let c = chain.coriolis_torque(&q, &[0.0; 4]).unwrap();
        assert_eq!(c.amax(), 0.0);
        // qdot^T (Mdot - 2C) qdot = 0  <=>  qdot^T C qdot = 1/2 qdot^T Mdot qdot
        let v = [0.5, -1.0, 2.0, 0.7];
        let c = chain.coriolis_torque(&q, &v).unwrap();
        let h = 1e-6;
        let qp: Vec<f64> = q.iter().zip(&v).map(|(a, b)| a + b * h).collect();
        let qm: Vec<f64> = q.iter().zip(&v).map(|(a, b)| a - b * h).collect();
        let mdot = (chain.mass_matrix(&qp).unwrap() - chain.mass_matrix(&qm).unwrap()) / (2.0 * h);
        let vv = DVector::from_column_slice(&v);
        let lhs = vv.dot(&c);
        let rhs = 0.5 * vv.dot(&(mdot * &vv));
        assert!((lhs - rhs).abs() < 1e-8, "{lhs} vs {rhs}");
    }

    #[test]
    fn quasi_static_torque_cases() {
        let z = Matrix3xX::from_column_slice(&[0.0, 0.0, 1.0]);
        assert_eq!(quasi_static_torque(&z, &Vec3::zeros())[0], 0.0);
        assert_eq!(quasi_static_torque(&z, &Vec3::new(0.0, 0.0, 2.0))[0], 2.0);

        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let j = Matrix3xX::from_fn(4, |_, _| rng.random_range(-1.0..1.0));
        let f = Vec3::new(0.3, -0.7, 1.1);
        let tau = quasi_static_torque(&j, &f);
        for c in 0..4 {
            let oracle = j[(0, c)] * f.x + j[(1, c)] * f.y + j[(2, c)] * f.z;
            assert!((tau[c] - oracle).abs() < 1e-15);
        }
    }

    #[test]
    fn limits_clamp_and_remain_well_defined() {
        let chain = finger();
        let mut q = vec![20.0, -20.0, 0.0, 10.0];
        let hit = chain.clamp_to_limits(&mut q);
        assert_eq!(hit, vec![true, true, false, false]);
        assert_eq!(q, vec![10.0, -10.0, 0.0, 10.0]);
        let jac = chain.jacobian(&q).unwrap();
        assert!(jac.linear.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn loader_rejects_bad_files() {
        let good = r#"
name = "one"
[[joint]]
name = "j"
origin_xyz = [0.0, 0.0, 0.0]
axis = [0.0, 0.0, 1.0]
lower = -1.0
upper = 1.0
torque_limit = 0.7
[joint.link]
mass = 0.05
com = [0.01, 0.0, 0.0]
inertia = [1e-6, 1e-6, 1e-6, 0.0, 0.0, 0.0]
"#;
        let path = Path::new("mem.toml");
        let chain = JointChain::from_toml_str(good, path).unwrap();
        assert_eq!(chain.dof(), 1);

        let no_inertia = good.replace("inertia = [1e-6, 1e-6, 1e-6, 0.0, 0.0, 0.0]\n", "");
        let err = JointChain::from_toml_str(&no_inertia, path).unwrap_err();
        assert!(err.to_string().contains("inertia"), "{err}");

        let bad_axis = good.replace("axis = [0.0, 0.0, 1.0]", "axis = [0.0, 0.0, 2.0]");
        let err = JointChain::from_toml_str(&bad_axis, path).unwrap_err();
        assert!(err.to_string().contains("unit-norm"), "{err}");

        let bad_mass = good.replace("mass = 0.05", "mass = 0.0");
        assert!(JointChain::from_toml_str(&bad_mass, path).is_err());
    }
}
