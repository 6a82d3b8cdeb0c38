//! Controller stacks used by the experiment replications.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::compliance::{compliance_torque, desired_joint_velocity, ComplianceGains};
use crate::error::Result;
use crate::interaction::{
    orientation_moment, to_joint_torques, tracking_force, variable_cartesian_damping, DampingSpec,
    OrientationSetpoint,
};
use crate::motion::Reproducer;
use crate::nullspace_opt::{CostTerms, NullspaceOptimizer, OptimizationWeights};
use crate::robot::{DampingPolicy, JointVector, RobotModel};
use crate::sim::{simulated_hand, ControlOutput, Controller, HandParams, SimState};

/// A position-dependent velocity reference.
pub trait VelocityReference {
    fn velocity(&mut self, y: &Vector3<f64>, dt: f64) -> Result<Vector3<f64>>;
}

impl VelocityReference for Reproducer<f64> {
    fn velocity(&mut self, y: &Vector3<f64>, dt: f64) -> Result<Vector3<f64>> {
        self.step(y, dt)
    }
}

/// Horizontal circle traversed counter-clockwise at constant speed, with
/// proportional attraction toward the circle and its plane.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CircleReference {
    pub center: [f64; 3],
    pub radius: f64,
    pub speed: f64,
    pub radial_gain: f64,
    pub height_gain: f64,
    /// Surface approach speed α_c along −z (m/s).
    pub surface_speed: f64,
}

impl Default for CircleReference {
    fn default() -> Self {
        Self {
            center: [-0.5, 0.0, 0.305],
            radius: 0.1,
            speed: 0.08,
            radial_gain: 3.0,
            height_gain: 3.0,
            surface_speed: 0.0,
        }
    }
}

impl CircleReference {
    pub fn center(&self) -> Vector3<f64> {
        Vector3::from(self.center)
    }

    /// Point on the circle at phase `phi` (rad).
    pub fn point(&self, phi: f64) -> Vector3<f64> {
        self.center() + Vector3::new(phi.cos(), phi.sin(), 0.0) * self.radius
    }

    /// (radial, vertical) offset of `y` from the circle.
    pub fn offset(&self, y: &Vector3<f64>) -> (f64, f64) {
        let d = y - self.center();
        ((d.x * d.x + d.y * d.y).sqrt() - self.radius, d.z)
    }
}

impl VelocityReference for CircleReference {
    fn velocity(&mut self, y: &Vector3<f64>, _dt: f64) -> Result<Vector3<f64>> {
        let d = y - self.center();
        let rho = (d.x * d.x + d.y * d.y).sqrt().max(1e-9);
        let radial = Vector3::new(d.x / rho, d.y / rho, 0.0);
        let tangent = Vector3::new(-radial.y, radial.x, 0.0);
        Ok(tangent * self.speed
            + radial * (self.radial_gain * (self.radius - rho))
            + Vector3::z() * (-self.height_gain * d.z - self.surface_speed))
    }
}

/// What the controller does in the kinematic null space during
/// reproduction.
#[derive(Debug, Clone, PartialEq)]
pub enum NullSpaceMode {
    /// Null-space damping with friction feed-forward.
    Compliant(ComplianceGains),
    /// Stiff posture regulation `N·(K·(q_ref − q) − B·q̇)`.
    Rigid { stiffness: f64, damping: f64, posture: JointVector<f64> },
    Free,
}

/// Reproduction stack: velocity reference → direction-dependent damping
/// tracking force, orientation PD, and a null-space term.
pub struct TrackingController<R: VelocityReference> {
    pub reference: R,
    pub damping: DampingSpec<f64>,
    pub orientation: OrientationSetpoint<f64>,
    pub policy: DampingPolicy<f64>,
    pub null_space: NullSpaceMode,
    pub control_dt: f64,
    pub last_command: Vector3<f64>,
}

impl<R: VelocityReference> TrackingController<R> {
    pub fn new(reference: R, damping: DampingSpec<f64>, orientation: OrientationSetpoint<f64>, null_space: NullSpaceMode, control_dt: f64) -> Self {
        Self {
            reference,
            damping,
            orientation,
            policy: DampingPolicy::default(),
            null_space,
            control_dt,
            last_command: Vector3::zeros(),
        }
    }
}

impl<R: VelocityReference> Controller<f64> for TrackingController<R> {
    fn control(&mut self, model: &RobotModel<f64>, state: &SimState<f64>) -> Result<ControlOutput<f64>> {
        let q = state.joints.q;
        let qdot = state.joints.qdot;
        let kin = model.kinematics(&q);
        let j = kin.jacobian();
        let pose = kin.pose();
        let twist = j * qdot;
        let v = twist.fixed_rows::<3>(0).into_owned();
        let w = twist.fixed_rows::<3>(3).into_owned();
        let command = self.reference.velocity(&pose.position, self.control_dt)?;
        self.last_command = command;
        let d = self.damping.damping(&command);
        let force = tracking_force(&v, &command, &d);
        let moment = orientation_moment(&pose.orientation, &w, &self.orientation);
        let tau_c = to_joint_torques(&force, &moment, &j);
        let tau_n = match &self.null_space {
            NullSpaceMode::Compliant(gains) => {
                let n = model.nullspace_projector(&j, &self.policy);
                let qd = desired_joint_velocity(model, &j, &command, &self.policy);
                compliance_torque(&n, &qd, &qdot, gains)
            }
            NullSpaceMode::Rigid {
                stiffness,
                damping,
                posture,
            } => {
                let n = model.nullspace_projector(&j, &self.policy);
                n * ((posture - q) * *stiffness - qdot * *damping)
            }
            NullSpaceMode::Free => JointVector::zeros(),
        };
        Ok(ControlOutput {
            tau_c,
            tau_n,
            tau_no: JointVector::zeros(),
        })
    }
}

/// Piecewise-linear path the simulated hand follows, with minimum-jerk
/// timing on every segment.
#[derive(Debug, Clone, PartialEq)]
pub struct HandPath {
    pub waypoints: Vec<Vector3<f64>>,
    pub segment_time: f64,
    pub start_time: f64,
}

impl HandPath {
    pub fn duration(&self) -> f64 {
        self.segment_time * (self.waypoints.len().saturating_sub(1)) as f64
    }

    pub fn end_time(&self) -> f64 {
        self.start_time + self.duration()
    }

    /// Index of the segment active at `t`, if any.
    pub fn segment(&self, t: f64) -> Option<usize> {
        let s = (t - self.start_time) / self.segment_time;
        (s >= 0.0 && s < (self.waypoints.len() - 1) as f64).then_some(s as usize)
    }

    /// Target position and velocity at `t`.
    pub fn sample(&self, t: f64) -> (Vector3<f64>, Vector3<f64>) {
        let n = self.waypoints.len();
        let s = ((t - self.start_time) / self.segment_time).clamp(0.0, (n - 1) as f64);
        let i = (s as usize).min(n - 2);
        let u = s - i as f64;
        let blend = u * u * u * (10.0 - 15.0 * u + 6.0 * u * u);
        let dblend = 30.0 * u * u * (1.0 - u) * (1.0 - u) / self.segment_time;
        let (a, b) = (self.waypoints[i], self.waypoints[i + 1]);
        let moving = t >= self.start_time && t <= self.end_time();
        (a + (b - a) * blend, if moving { (b - a) * dblend } else { Vector3::zeros() })
    }
}

/// Teaching-mode controller; the optimized stack can be switched off to
/// get the gravity-compensation-only baseline.
pub struct TeachController {
    pub hand: HandParams,
    pub path: HandPath,
    pub optimized: bool,
    pub optimizer: NullspaceOptimizer<f64>,
    pub orientation: OrientationSetpoint<f64>,
    /// Target damping D_d and inertia Λ_d for the variable damping.
    pub target_damping: Vector3<f64>,
    pub target_inertia: Vector3<f64>,
    pub control_dt: f64,
    /// Hold the tool orientation with the PD regulator.
    pub hold_orientation: bool,
    /// The hand stops advancing this far (m) past the target position at
    /// which the singularity gate first opened.
    pub pull_stop: Option<f64>,
    pub last_terms: Option<CostTerms<f64>>,
    pub last_gate: f64,
    pub hand_force: Vector3<f64>,
    /// Set once the hand has reached its pull stop.
    pub hand_holding: bool,
    gate_target: Option<Vector3<f64>>,
}

impl TeachController {
    pub fn new(path: HandPath, hand: HandParams, optimized: bool, weights: OptimizationWeights, control_dt: f64) -> Self {
        Self {
            hand,
            path,
            optimized,
            optimizer: NullspaceOptimizer::new(weights),
            orientation: OrientationSetpoint::default(),
            target_damping: Vector3::repeat(15.0),
            target_inertia: Vector3::repeat(4.0),
            control_dt,
            hold_orientation: false,
            pull_stop: None,
            last_terms: None,
            last_gate: 0.0,
            hand_force: Vector3::zeros(),
            hand_holding: false,
            gate_target: None,
        }
    }
}

impl Controller<f64> for TeachController {
    fn control(&mut self, model: &RobotModel<f64>, state: &SimState<f64>) -> Result<ControlOutput<f64>> {
        let q = state.joints.q;
        let qdot = state.joints.qdot;
        let out = self.optimizer.evaluate(model, &q, &qdot, state.t, self.control_dt)?;
        self.last_terms = Some(out.terms);
        self.last_gate = out.gate;
        if !self.optimized {
            return Ok(ControlOutput::default());
        }
        let kin = model.kinematics(&q);
        let j = kin.jacobian();
        let twist = j * qdot;
        let v = twist.fixed_rows::<3>(0).into_owned();
        let w = twist.fixed_rows::<3>(3).into_owned();
        let lambda = model.apparent_inertia(&q)?;
        let d_var = variable_cartesian_damping(&lambda, &self.target_damping, &self.target_inertia);
        let force: Vector3<f64> = -(d_var * v);
        let moment = if self.hold_orientation {
            orientation_moment(&kin.pose().orientation, &w, &self.orientation)
        } else {
            Vector3::zeros()
        };
        Ok(ControlOutput {
            tau_c: to_joint_torques(&force, &moment, &j) + out.tau_barrier,
            tau_n: JointVector::zeros(),
            tau_no: out.tau_no,
        })
    }

    fn external_force(&mut self, t: f64, position: &Vector3<f64>, velocity: &Vector3<f64>) -> Vector3<f64> {
        let (mut target, mut target_velocity) = self.path.sample(t);
        if let Some(stop) = self.pull_stop {
            if self.last_gate > 0.0 && self.gate_target.is_none() {
                self.gate_target = Some(target);
            }
            if let Some(open) = self.gate_target {
                let travelled = target - open;
                if travelled.norm() >= stop {
                    target = open + travelled.normalize() * stop;
                    target_velocity = Vector3::zeros();
                    self.hand_holding = true;
                }
            }
        }
        self.hand_force = simulated_hand(&target, &target_velocity, position, velocity, &self.hand);
        self.hand_force
    }
}

