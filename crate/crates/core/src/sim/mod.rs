//! Closed-loop world: finger dynamics, penalty contact with a fixed body,
//! the tactile sensor model and the control loop.
//!
//! Physics runs at a fixed step (1500 Hz by default); the controller runs
//! every `substeps` physics steps with a zero-order hold on the torque.

pub mod contact;
pub mod scenario;

use nalgebra::{DMatrix, DVector};

use crate::chain::{contact_torque, JointChain, JointState};
use crate::controller::control_step;
use crate::error::SimError;
use crate::harness::runlog::{RunLog, RunMetadata, TickRecord};
use crate::rot3::Vec3;
use crate::stability::{extract_features, predict, ContactState};
use crate::tactile::{estimate_contact, TactileFrame, TaxelSimulator};

pub use contact::{contact_force, contact_query, ContactForce, ContactGeometry, RigidSurface, Shape};
pub use scenario::{ScenarioConfig, ScenarioFile, SensorConfig, StabilitySource};

/// Ground truth about the fingertip contact.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ContactTruth {
    pub in_contact: bool,
    /// {W}; NaN without contact
    pub point: Vec3,
    /// force the finger exerts on the body, {W}
    pub f_ext: Vec3,
    pub normal_force: f64,
    pub tangential_force: f64,
    pub slipping: bool,
}

impl ContactTruth {
    pub fn none() -> Self {
        Self {
            in_contact: false,
            point: Vec3::repeat(f64::NAN),
            f_ext: Vec3::zeros(),
            normal_force: 0.0,
            tangential_force: 0.0,
            slipping: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimState {
    pub joints: JointState,
    /// seconds
    pub time: f64,
    pub contact: ContactTruth,
}

/// The finger, the body it may touch, and the friction memory between steps.
#[derive(Clone, Debug)]
pub struct World {
    pub chain: JointChain,
    pub surface: Option<RigidSurface>,
    /// fingertip sphere radius, meters
    pub radius: f64,
    /// rad/s
    pub max_joint_speed: f64,
    pub state: SimState,
    stretch: Vec3,
    /// sliding distance since the last `take_slide`, meters
    slid: f64,
    /// a frictionless contact carried tangential load since the last `take_slide`
    slipped_free: bool,
}

impl World {
    pub fn new(chain: JointChain, surface: Option<RigidSurface>, radius: f64, q0: &[f64]) -> Self {
        let joints = JointState::at_rest(DVector::from_column_slice(q0));
        let mut world = Self {
            chain,
            surface,
            radius,
            max_joint_speed: f64::INFINITY,
            state: SimState {
                joints,
                time: 0.0,
                contact: ContactTruth::none(),
            },
            stretch: Vec3::zeros(),
            slid: 0.0,
            slipped_free: false,
        };
        world.state.contact = world.observe();
        world
    }

    fn evaluate(&self, q: &[f64], qdot: &DVector<f64>, dt: f64) -> Option<(ContactGeometry, ContactForce)> {
        let surface = self.surface.as_ref()?;
        let kin = self.chain.kinematics(q).ok()?;
        let geom = contact_query(surface, &kin.end_effector, self.radius)?;
        let v = kin.point_jacobian(self.chain.dof() - 1, &geom.point).linear * qdot;
        let stretch = self.stretch + v * dt;
        Some((geom, contact_force(surface, &geom, &v, &stretch)))
    }

    /// Contact ground truth at the current state, without advancing the
    /// friction memory.
    pub fn observe(&self) -> ContactTruth {
        let q = self.state.joints.q.as_slice();
        match self.evaluate(q, &self.state.joints.qdot, 0.0) {
            Some((geom, f)) => ContactTruth {
                in_contact: true,
                point: geom.point,
                f_ext: f.f_ext,
                normal_force: f.normal_magnitude,
                tangential_force: f.tangential_magnitude,
                slipping: f.slipping,
            },
            None => ContactTruth::none(),
        }
    }

    /// Sliding distance since the previous call, meters; infinite when a
    /// frictionless contact carried tangential load.
    pub fn take_slide(&mut self) -> f64 {
        let slid = std::mem::take(&mut self.slid);
        if std::mem::take(&mut self.slipped_free) {
            f64::INFINITY
        } else {
            slid
        }
    }

    /// One semi-implicit Euler step of
    /// `M qdd = tau - C qdot - g - D qdot - J^T F_ext`.
    ///
    /// Joints that hit a limit are clamped and their velocity zeroed.
    pub fn step(&mut self, tau: &DVector<f64>, dt: f64) -> Result<(), SimError> {
        let chain = &self.chain;
        let q = self.state.joints.q.clone();
        let qdot = self.state.joints.qdot.clone();
        let kin = chain.kinematics(q.as_slice())?;
        let m = chain.mass_matrix(q.as_slice())?;
        let g = chain.gravity_vector(q.as_slice())?;
        let c = chain.coriolis_torque(q.as_slice(), qdot.as_slice())?;
        let d = chain.damping();
        let damping = d.component_mul(&qdot);

        let mut rhs = tau - c - g - damping;
        let contact = self.evaluate(q.as_slice(), &qdot, dt);
        if let Some((geom, f)) = &contact {
            rhs += contact_torque(&kin, chain.dof() - 1, &geom.point, &(-f.f_ext));
        }
        // joint damping taken implicitly: stiff for the light distal links
        let mut m = m;
        for i in 0..chain.dof() {
            m[(i, i)] += d[i] * dt;
        }
        let qdd = solve_with_stops(&m, &rhs, q.as_slice(), &qdot, &chain.joint_limits(), dt)?;

        let mut qdot_next = qdot + qdd * dt;
        let mut q_next = q + &qdot_next * dt;
        let hit = chain.clamp_to_limits(q_next.as_mut_slice());
        for (v, h) in qdot_next.iter_mut().zip(hit) {
            if h {
                *v = 0.0;
            }
        }
        let speed = qdot_next.norm();
        if !speed.is_finite() || speed > self.max_joint_speed {
            return Err(SimError::NumericalBlowup {
                tick: 0,
                speed,
                bound: self.max_joint_speed,
            });
        }
        match contact {
            Some((_, f)) => {
                self.stretch = f.stretch;
                self.slid += f.slide_speed * dt;
                self.slipped_free |= f.slipping && self.surface.as_ref().is_some_and(|s| s.friction == 0.0);
            }
            None => self.stretch = Vec3::zeros(),
        }
        self.state.joints.q = q_next;
        self.state.joints.qdot = qdot_next;
        self.state.time += dt;
        self.state.contact = self.observe();
        Ok(())
    }

    /// Kinetic plus potential energy, joules.
    pub fn mechanical_energy(&self) -> Result<f64, SimError> {
        let q = self.state.joints.q.as_slice();
        Ok(self.chain.kinetic_energy(q, self.state.joints.qdot.as_slice())? + self.chain.potential_energy(q)?)
    }
}

/// Solves `m qdd = rhs`, holding joints that rest on a limit and are pushed
/// further out. A held joint is brought to rest within the step and the
/// remaining joints are solved with its acceleration as a known input, so a
/// stop never feeds a reaction into its neighbours.
fn solve_with_stops(
    m: &DMatrix<f64>,
    rhs: &DVector<f64>,
    q: &[f64],
    qdot: &DVector<f64>,
    limits: &[(f64, f64)],
    dt: f64,
) -> Result<DVector<f64>, SimError> {
    let n = rhs.len();
    let singular = || SimError::Config("mass matrix is not positive definite".into());
    let mut held = vec![false; n];
    let mut qdd = m.clone().cholesky().ok_or_else(singular)?.solve(rhs);
    for _ in 0..n {
        let mut changed = false;
        for i in 0..n {
            let (lo, hi) = limits[i];
            let v = qdot[i] + qdd[i] * dt;
            let outward = (q[i] <= lo && v < 0.0) || (q[i] >= hi && v > 0.0);
            if !held[i] && outward {
                held[i] = true;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        let free: Vec<usize> = (0..n).filter(|i| !held[*i]).collect();
        let mut full = DVector::zeros(n);
        for i in 0..n {
            if held[i] {
                full[i] = -qdot[i] / dt;
            }
        }
        if !free.is_empty() {
            let m_ff = m.select_rows(&free).select_columns(&free);
            let r_f = (rhs - m * &full).select_rows(&free);
            let x = m_ff.cholesky().ok_or_else(singular)?.solve(&r_f);
            for (k, &i) in free.iter().enumerate() {
                full[i] = x[k];
            }
        }
        qdd = full;
    }
    Ok(qdd)
}

/// Everything a run produces; `frames` holds the simulated tactile frames
/// so datasets can be cut from the same run.
#[derive(Clone, Debug)]
pub struct RunOutput {
    pub log: RunLog,
    pub frames: Vec<TactileFrame>,
    /// per-tick sliding distance at the contact, meters
    pub slides: Vec<f64>,
}

pub fn run(config: &ScenarioConfig) -> Result<RunLog, SimError> {
    Ok(run_detailed(config)?.log)
}

pub fn run_detailed(config: &ScenarioConfig) -> Result<RunOutput, SimError> {
    let file = &config.file;
    let dof = config.chain.dof();
    let mut world = World::new(
        config.chain.clone(),
        file.surface.clone(),
        config.layout.fingertip_radius(),
        &file.q_start,
    );
    world.max_joint_speed = file.max_joint_speed;
    let mut sensor = TaxelSimulator::new(file.sensor.spread, file.sensor.noise, file.seed);
    let window = config.features.window;

    let meta = RunMetadata {
        scenario: file.name.clone(),
        config_hash: config.config_hash.clone(),
        seed: file.seed,
        control_rate: file.control_rate,
        physics_rate: file.physics_rate,
        friction: file.surface.as_ref().map(|s| s.friction),
        dof,
        version: env!("CARGO_PKG_VERSION").to_string(),
    };
    let ticks = config.ticks();
    let mut rows = Vec::with_capacity(ticks);
    let mut frames: Vec<TactileFrame> = Vec::with_capacity(ticks);
    // per-tick ground truth "contact and no slip", for ground-truth gating
    let mut settled: Vec<bool> = Vec::with_capacity(ticks);
    let mut slides: Vec<f64> = Vec::with_capacity(ticks);

    let q_start = DVector::from_column_slice(&file.q_start);
    let q_close = DVector::from_column_slice(&file.q_close);
    let progress_step = config.control_dt() / file.approach_time;
    let mut progress = 0.0f64;
    let dt = config.physics_dt();

    for tick in 0..ticks {
        let time = tick as f64 / file.control_rate;
        let truth = world.state.contact;
        let slid = world.take_slide();
        let slip = truth.in_contact && slid > contact::SLIP_SPEED * config.control_dt();
        slides.push(if truth.in_contact { slid } else { 0.0 });
        let q = world.state.joints.q.clone();
        let qdot = world.state.joints.qdot.clone();

        let ee = config.chain.forward_kinematics(q.as_slice())?;
        let (point_e, force_e) = if truth.in_contact {
            (
                ee.inverse_transform_point(&truth.point),
                ee.orientation.transpose() * truth.f_ext * file.sensor.gain,
            )
        } else {
            (Vec3::zeros(), Vec3::zeros())
        };
        let frame = sensor.sample(&config.layout, time, &point_e, &force_e);
        let estimate = estimate_contact(&config.layout, &frame, file.sensor.activation_threshold)?;
        frames.push(frame);
        settled.push(truth.in_contact && !slip);

        let state = match &config.model {
            _ if frames.len() < window => ContactState::unstable(),
            Some(model) => {
                let x = extract_features(&frames[frames.len() - window..], &config.layout, &config.features)?;
                predict(model, &x)?
            }
            None => {
                let ok = settled[settled.len() - window..].iter().all(|s| *s);
                ContactState::from_probability(if ok { 1.0 } else { 0.0 })
            }
        };

        let q_ref = &q_start + (&q_close - &q_start) * progress;
        let cmd = control_step(
            &config.chain,
            q.as_slice(),
            qdot.as_slice(),
            q_ref.as_slice(),
            &estimate,
            &state,
            &file.gains,
        )?;
        if cmd.y == 0 {
            progress = (progress + progress_step).min(1.0);
        }

        rows.push(TickRecord {
            tick,
            time,
            f: estimate.force,
            theta: cmd.theta,
            p: state.p,
            y: cmd.y,
            q: q.iter().copied().collect(),
            tau_motion: cmd.tau_motion.iter().copied().collect(),
            tau_task: cmd.tau_task.iter().copied().collect(),
            tau_cmd: cmd.tau_cmd.iter().copied().collect(),
            tau_applied: cmd.tau_applied.iter().copied().collect(),
            saturated: cmd.saturated,
            active: estimate.active,
            in_contact: truth.in_contact,
            normal_force: truth.normal_force,
            tangential_force: truth.tangential_force,
            slip,
            f_ext: truth.f_ext,
            contact_point: if truth.in_contact {
                point_e
            } else {
                Vec3::repeat(f64::NAN)
            },
        });

        for _ in 0..config.substeps {
            world.step(&cmd.tau_applied, dt).map_err(|e| match e {
                SimError::NumericalBlowup { speed, bound, .. } => SimError::NumericalBlowup { tick, speed, bound },
                other => other,
            })?;
        }
    }
    Ok(RunOutput {
        log: RunLog { meta, rows },
        frames,
        slides,
    })
}
