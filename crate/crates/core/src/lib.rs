//! Learning from a single demonstration on a redundant, torque-controlled
//! manipulator.
//!
//! The crate is organised in layers:
//!
//! * [`robot`]: kinematics, dynamics and redundancy algebra of a 7-DOF arm.
//! * [`fdm`]: fast diffeomorphic matching between a straight source line and
//!   a demonstrated 3D path.
//! * [`motion`]: the velocity field built on the diffeomorphism, offline gain
//!   adaptation and the demonstration-referenced EKF velocity correction.
//! * [`interaction`]: direction-parameterized damping, velocity tracking and
//!   orientation regulation.
//! * [`nullspace_opt`]: teaching-stage null-space optimization
//!   (directional manipulability, mDCI, gated LCI).
//! * [`compliance`]: reproduction-stage null-space compliance torque.
//! * [`sim`]: fixed-step forward-dynamics simulator with friction,
//!   perturbations and a simulated human hand.
//! * [`scenarios`]: the experiment replications, metrics and exports used by
//!   the command line tool.
//!
//! All numeric code is generic over [`Real`] (`f32` or `f64`); the aliases
//! below fix the scalar to `f64`, which the scenarios use.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0)` also rejects NaN

pub mod compliance;
pub mod error;
pub mod fdm;
pub mod interaction;
pub mod motion;
pub mod nullspace_opt;
pub mod robot;
pub mod scalar;
pub mod scenarios;
pub mod sim;

pub use error::{Error, Result};
pub use scalar::Real;

pub type RobotModel = robot::RobotModel<f64>;
pub type RobotModel32 = robot::RobotModel<f32>;
pub type JointVector = robot::JointVector<f64>;
pub type JointState = robot::JointState<f64>;
pub type Diffeomorphism = fdm::Diffeomorphism<f64>;
pub type Diffeomorphism32 = fdm::Diffeomorphism<f32>;
pub type DemonstrationPath = fdm::DemonstrationPath<f64>;
pub type EkfState = motion::EkfState<f64>;
pub type Simulator = sim::Simulator<f64>;
