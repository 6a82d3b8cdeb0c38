//! Fixed-step forward-dynamics simulation with friction, scheduled
//! disturbances and a simulated human hand.

mod simulator;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

pub use simulator::{
    advance, step, write_sim_trace_csv, ControlOutput, Controller, Integrator, SimConfig, SimState, SimTraceRow, Simulator,
    TorqueBreakdown,
};

use crate::robot::{JointVector, RobotModel, DOF};
use crate::scalar::Real;

/// Viscous plus tanh-smoothed Coulomb joint friction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FrictionModel {
    pub viscous: [f64; DOF],
    pub coulomb: [f64; DOF],
    /// Velocity scale of the Coulomb smoothing (rad/s).
    pub smoothing: f64,
}

impl Default for FrictionModel {
    fn default() -> Self {
        Self {
            viscous: [0.3, 0.3, 0.2, 0.2, 0.1, 0.05, 0.05],
            coulomb: [0.03, 0.03, 0.02, 0.02, 0.01, 0.005, 0.005],
            smoothing: 0.02,
        }
    }
}

impl FrictionModel {
    pub fn none() -> Self {
        Self {
            viscous: [0.0; DOF],
            coulomb: [0.0; DOF],
            smoothing: 0.02,
        }
    }

    pub fn is_valid(&self) -> bool {
        self.viscous.iter().chain(&self.coulomb).all(|v| *v >= 0.0 && v.is_finite()) && self.smoothing > 0.0
    }

    /// Friction torque; always opposes the joint velocity.
    pub fn torque<T: Real>(&self, qdot: &JointVector<T>) -> JointVector<T> {
        let s = T::lit(self.smoothing);
        JointVector::from_fn(|i, _| {
            -(T::lit(self.viscous[i]) * qdot[i] + T::lit(self.coulomb[i]) * (qdot[i] / s).tanh())
        })
    }
}

/// Where a scheduled disturbance acts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind", content = "index")]
pub enum PerturbationTarget {
    /// Torque written directly on one joint (0-based).
    Joint(usize),
    /// Force at the end effector, mapped through `Jvᵀ`.
    EndEffector,
    /// Force at the origin of a joint (0-based), mapped through that
    /// point's Jacobian.
    LinkPoint(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind", content = "vector")]
pub enum ForceDirection {
    Fixed([f64; 3]),
    /// Normal of the plane through shoulder, elbow and wrist.
    ArmPlaneNormal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Profile {
    #[default]
    Constant,
    /// `sin(π·s)` over the window.
    HalfSine,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationEvent {
    pub start: f64,
    pub end: f64,
    pub target: PerturbationTarget,
    /// Peak magnitude (N or N·m); the sign selects the direction.
    pub magnitude: f64,
    #[serde(default = "default_direction")]
    pub direction: ForceDirection,
    #[serde(default)]
    pub profile: Profile,
}

fn default_direction() -> ForceDirection {
    ForceDirection::Fixed([1.0, 0.0, 0.0])
}

impl PerturbationEvent {
    pub fn is_active(&self, t: f64) -> bool {
        t >= self.start && t < self.end
    }

    pub fn level(&self, t: f64) -> f64 {
        if !self.is_active(t) {
            return 0.0;
        }
        match self.profile {
            Profile::Constant => self.magnitude,
            Profile::HalfSine => {
                let s = (t - self.start) / (self.end - self.start);
                self.magnitude * (std::f64::consts::PI * s).sin()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PerturbationSchedule {
    #[serde(default)]
    pub events: Vec<PerturbationEvent>,
}

impl PerturbationSchedule {
    pub fn is_valid(&self) -> bool {
        self.events.iter().all(|e| {
            e.start >= 0.0
                && e.end >= e.start
                && e.magnitude.is_finite()
                && match e.target {
                    PerturbationTarget::Joint(i) | PerturbationTarget::LinkPoint(i) => i < DOF,
                    PerturbationTarget::EndEffector => true,
                }
                && match e.direction {
                    ForceDirection::Fixed(d) => Vector3::from(d).norm() > 0.0,
                    ForceDirection::ArmPlaneNormal => true,
                }
        })
    }

    pub fn is_active(&self, t: f64) -> bool {
        self.events.iter().any(|e| e.is_active(t))
    }

    /// Latest end time of any event.
    pub fn last_end(&self) -> f64 {
        self.events.iter().map(|e| e.end).fold(0.0, f64::max)
    }
}

fn arm_plane_normal<T: Real>(joints: &[Vector3<T>]) -> Vector3<T> {
    // shoulder (joint 2), elbow (joint 4), wrist (joint 6)
    let n = (joints[3] - joints[1]).cross(&(joints[5] - joints[1]));
    let norm = n.norm();
    if norm > T::lit(1e-9) {
        n / norm
    } else {
        Vector3::y()
    }
}

/// Joint torque produced by all events active at `t`.
pub fn perturbation_torque<T: Real>(
    schedule: &PerturbationSchedule,
    t: f64,
    model: &RobotModel<T>,
    q: &JointVector<T>,
) -> JointVector<T> {
    let mut tau = JointVector::zeros();
    let active: Vec<_> = schedule.events.iter().filter(|e| e.is_active(t)).collect();
    if active.is_empty() {
        return tau;
    }
    let kin = model.kinematics(q);
    for e in active {
        let level = T::lit(e.level(t));
        let dir = match e.direction {
            ForceDirection::Fixed(d) => {
                let v = Vector3::new(T::lit(d[0]), T::lit(d[1]), T::lit(d[2]));
                v / v.norm()
            }
            ForceDirection::ArmPlaneNormal => arm_plane_normal(&kin.joint_positions),
        };
        match e.target {
            PerturbationTarget::Joint(i) => tau[i] += level,
            PerturbationTarget::EndEffector => {
                let jv = kin.point_jacobian(DOF - 1, &kin.ee_position);
                tau += jv.transpose() * (dir * level);
            }
            PerturbationTarget::LinkPoint(i) => {
                let jv = kin.point_jacobian(i, &kin.joint_positions[i]);
                tau += jv.transpose() * (dir * level);
            }
        }
    }
    tau
}

/// Spring-damper model of a hand guiding the end effector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HandParams {
    pub stiffness: f64,
    pub damping: f64,
    pub max_force: f64,
}

impl Default for HandParams {
    fn default() -> Self {
        Self {
            stiffness: 300.0,
            damping: 30.0,
            max_force: 50.0,
        }
    }
}

/// Force the hand applies to pull the end effector onto the moving target,
/// saturated at `max_force`.
pub fn simulated_hand<T: Real>(
    target: &Vector3<T>,
    target_velocity: &Vector3<T>,
    position: &Vector3<T>,
    velocity: &Vector3<T>,
    params: &HandParams,
) -> Vector3<T> {
    let f = (target - position) * T::lit(params.stiffness) + (target_velocity - velocity) * T::lit(params.damping);
    let cap = T::lit(params.max_force);
    let n = f.norm();
    if n > cap {
        f * (cap / n)
    } else {
        f
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn friction_dissipates() {
        let f = FrictionModel::default();
        for k in -50..50 {
            let qdot = JointVector::from_fn(|i, _| (k as f64) * 0.01 * (i as f64 - 3.0));
            assert!(f.torque(&qdot).dot(&qdot) <= 0.0);
        }
        assert_eq!(f.torque(&JointVector::<f64>::zeros()), JointVector::zeros());
    }

    #[test]
    fn perturbations_outside_windows_vanish() {
        let model = RobotModel::<f64>::lwr_like();
        let q = JointVector::from_row_slice(&[0.0, 0.5, 0.0, -1.2, 0.0, 0.8, 0.0]);
        let s = PerturbationSchedule {
            events: vec![PerturbationEvent {
                start: 1.0,
                end: 1.5,
                target: PerturbationTarget::EndEffector,
                magnitude: 20.0,
                direction: ForceDirection::Fixed([0.0, 1.0, 0.0]),
                profile: Profile::Constant,
            }],
        };
        assert_eq!(perturbation_torque(&s, 0.5, &model, &q), JointVector::zeros());
        assert_eq!(perturbation_torque(&s, 1.5, &model, &q), JointVector::zeros());
        let tau = perturbation_torque(&s, 1.2, &model, &q);
        let jv = model.translational_jacobian(&q);
        assert!((tau - jv.transpose() * Vector3::new(0.0, 20.0, 0.0)).amax() < 1e-12);
    }

    #[test]
    fn joint_and_link_point_targets() {
        let model = RobotModel::<f64>::lwr_like();
        let q = JointVector::from_row_slice(&[0.0, 0.5, 0.0, -1.2, 0.0, 0.8, 0.0]);
        let mut s = PerturbationSchedule {
            events: vec![PerturbationEvent {
                start: 0.0,
                end: 1.0,
                target: PerturbationTarget::Joint(3),
                magnitude: -10.8,
                direction: ForceDirection::ArmPlaneNormal,
                profile: Profile::Constant,
            }],
        };
        let tau = perturbation_torque(&s, 0.5, &model, &q);
        assert_eq!(tau[3], -10.8);
        assert_eq!(tau.iter().filter(|v| **v != 0.0).count(), 1);

        // A force normal to the arm plane at the elbow only swivels the arm:
        // it produces torque about the shoulder roll axes, none at the elbow.
        s.events[0].target = PerturbationTarget::LinkPoint(3);
        s.events[0].magnitude = 27.0;
        let tau = perturbation_torque(&s, 0.5, &model, &q);
        assert!(tau[3].abs() < 1e-12 && tau.norm() > 5.0);
        assert!(s.is_valid());
    }

    #[test]
    fn half_sine_profile_peaks_mid_window() {
        let e = PerturbationEvent {
            start: 1.0,
            end: 2.0,
            target: PerturbationTarget::EndEffector,
            magnitude: 4.0,
            direction: default_direction(),
            profile: Profile::HalfSine,
        };
        assert!((e.level(1.5) - 4.0).abs() < 1e-12);
        assert!(e.level(1.01) < 0.2);
    }

    #[test]
    fn hand_is_zero_on_target_and_saturates() {
        let p = HandParams::default();
        let x = Vector3::new(0.5f64, 0.0, 0.3);
        let v = Vector3::new(0.1, 0.0, 0.0);
        assert_eq!(simulated_hand(&x, &v, &x, &v, &p), Vector3::zeros());
        let f = simulated_hand(&(x + Vector3::new(1.0, 0.0, 0.0)), &v, &x, &v, &p);
        assert!((f.norm() - 50.0).abs() < 1e-12);
    }
}
