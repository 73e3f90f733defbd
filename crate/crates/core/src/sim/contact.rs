//! Penalty contact between the spherical fingertip and a fixed rigid body.

use serde::{Deserialize, Serialize};

use crate::chain::Pose6;
use crate::rot3::Vec3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum Shape {
    /// Half-space below `point` along the outward unit `normal`.
    Plane {
        point: [f64; 3],
        normal: [f64; 3],
    },
    Sphere {
        center: [f64; 3],
        radius: f64,
    },
}

/// A fixed body in {W}. Units: meters, N/m, N s/m.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RigidSurface {
    pub shape: Shape,
    /// normal stiffness k_c
    pub stiffness: f64,
    /// normal damping b_c, acts only while compressing
    pub damping: f64,
    /// Coulomb coefficient
    pub friction: f64,
    /// tangential stick spring, N/m
    #[serde(default = "default_tangential_stiffness")]
    pub tangential_stiffness: f64,
    /// tangential viscous term k_t, N s/m
    #[serde(default = "default_tangential_damping")]
    pub tangential_damping: f64,
}

fn default_tangential_stiffness() -> f64 {
    2000.0
}

fn default_tangential_damping() -> f64 {
    5.0
}

impl RigidSurface {
    pub fn plane(point: Vec3, normal: Vec3, stiffness: f64, damping: f64, friction: f64) -> Self {
        Self {
            shape: Shape::Plane {
                point: point.into(),
                normal: normal.normalize().into(),
            },
            stiffness,
            damping,
            friction,
            tangential_stiffness: default_tangential_stiffness(),
            tangential_damping: default_tangential_damping(),
        }
    }

    pub fn sphere(center: Vec3, radius: f64, stiffness: f64, damping: f64, friction: f64) -> Self {
        Self {
            shape: Shape::Sphere {
                center: center.into(),
                radius,
            },
            stiffness,
            damping,
            friction,
            tangential_stiffness: default_tangential_stiffness(),
            tangential_damping: default_tangential_damping(),
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        let pos = |v: f64| v.is_finite() && v >= 0.0;
        if !(self.stiffness > 0.0 && self.stiffness.is_finite()) {
            return Err("surface stiffness must be > 0".into());
        }
        if !pos(self.damping) || !pos(self.friction) || !pos(self.tangential_damping) {
            return Err("surface damping and friction must be >= 0".into());
        }
        if !(self.tangential_stiffness > 0.0) {
            return Err("tangential stiffness must be > 0".into());
        }
        match &self.shape {
            Shape::Plane { normal, .. } => {
                if (Vec3::from(*normal).norm() - 1.0).abs() > 1e-9 {
                    return Err("plane normal must be unit length".into());
                }
            }
            Shape::Sphere { radius, .. } => {
                if !(*radius > 0.0) {
                    return Err("sphere radius must be > 0".into());
                }
            }
        }
        Ok(())
    }
}

/// Sliding speed below which a force on the cone edge counts as sticking,
/// m/s. Without it a finger resting exactly on the cone, or creeping along
/// it far below what the taxels can resolve, is flagged as slipping.
pub const SLIP_SPEED: f64 = 1e-4;

/// Penetration of the fingertip sphere into the surface.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ContactGeometry {
    /// meters, > 0
    pub depth: f64,
    /// deepest point of the fingertip sphere, {W}
    pub point: Vec3,
    /// outward surface normal, {W}
    pub normal: Vec3,
}

/// Fingertip modeled as a sphere of `radius` centered on the {E} origin.
pub fn contact_query(surface: &RigidSurface, fingertip: &Pose6, radius: f64) -> Option<ContactGeometry> {
    let c = fingertip.position;
    let (depth, normal) = match &surface.shape {
        Shape::Plane { point, normal } => {
            let n = Vec3::from(*normal);
            (radius - (c - Vec3::from(*point)).dot(&n), n)
        }
        Shape::Sphere { center, radius: body } => {
            let d = c - Vec3::from(*center);
            let dist = d.norm();
            if dist == 0.0 {
                return None;
            }
            (body + radius - dist, d / dist)
        }
    };
    (depth > 0.0).then(|| ContactGeometry {
        depth,
        point: c - normal * radius,
        normal,
    })
}

/// Force on the fingertip and slip flag for one contact evaluation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ContactForce {
    /// force the finger exerts on the body, {W}; the fingertip feels `-f_ext`
    pub f_ext: Vec3,
    pub normal_magnitude: f64,
    pub tangential_magnitude: f64,
    pub slipping: bool,
    /// tangential speed of the contact point while on the cone edge, else 0
    pub slide_speed: f64,
    /// tangential spring stretch after this evaluation, {W}
    pub stretch: Vec3,
}

/// Spring-damper normal force and capped tangential friction.
///
/// Normal: `k_c depth + b_c max(-v_n, 0)`, never adhesive. Tangential: a
/// stick spring of stretch `s` in parallel with the viscous term,
/// `-(k_s s + k_t v_t)`, capped at `mu F_n`. Exceeding the cap pulls the
/// spring back onto the cone; it flags slip once the point also slides
/// faster than [`SLIP_SPEED`]. With `s = 0` this reduces to the
/// purely viscous `min(k_t |v_t|, mu F_n)`.
pub fn contact_force(
    surface: &RigidSurface,
    geometry: &ContactGeometry,
    point_velocity: &Vec3,
    stretch: &Vec3,
) -> ContactForce {
    let n = geometry.normal;
    let v_n = point_velocity.dot(&n);
    let v_t = point_velocity - n * v_n;
    let f_n = (surface.stiffness * geometry.depth + surface.damping * (-v_n).max(0.0)).max(0.0);
    let s = stretch - n * stretch.dot(&n);

    let trial = s * surface.tangential_stiffness + v_t * surface.tangential_damping;
    let cap = surface.friction * f_n;
    let trial_mag = trial.norm();
    let (f_t, slide_speed, stretch) = if trial_mag > cap {
        let dir = trial / trial_mag;
        // keep the spring on the cone edge so sticking resumes smoothly
        let s_cone = (cap - surface.tangential_damping * v_t.dot(&dir)).max(0.0) / surface.tangential_stiffness;
        (dir * cap, v_t.norm(), dir * s_cone.min(s.norm()))
    } else {
        (trial, 0.0, s)
    };
    let slipping = slide_speed > SLIP_SPEED || cap == 0.0 && trial_mag > 0.0;
    let on_finger = n * f_n - f_t;
    ContactForce {
        f_ext: -on_finger,
        normal_magnitude: f_n,
        tangential_magnitude: f_t.norm(),
        slipping,
        slide_speed,
        stretch,
    }
}
