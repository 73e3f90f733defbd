//! Tactile contact-force direction control for a torque-controlled finger.
//!
//! The crate is split the way the control loop is:
//!
//! - [`rot3`]: rotation algebra (RPY, skew matrices, rotation between two
//!   vectors, axis-angle extraction).
//! - [`chain`]: serial-chain kinematics and dynamics of one finger.
//! - [`tactile`]: taxel layout, simulated readout, contact pose and
//!   pseudo-force estimation.
//! - [`stability`]: windowed tactile features and the logistic contact
//!   stability classifier.
//! - [`controller`]: the switching motion / force-direction control law.
//! - [`sim`]: penalty-contact world, fixed-step integration and the
//!   closed-loop scenario runner.
//! - [`harness`]: run logs, summaries, dataset generation, training and
//!   log verification used by the command-line front end.

// `!(x > 0.0)` is used on purpose throughout: it also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod chain;
pub mod controller;
pub mod error;
pub mod harness;
pub mod rot3;
pub mod sim;
pub mod stability;
pub mod tactile;

pub use error::{ChainError, HarnessError, Rot3Error, SimError, StabilityError, TactileError};
pub use rot3::Vec3;
