use std::io::Write;

use nalgebra::{UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use super::{perturbation_torque, FrictionModel, PerturbationSchedule};
use crate::error::{Error, Result};
use crate::robot::{JointState, JointVector, RobotModel, DOF};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Integrator {
    /// Velocity first, then position with the new velocity.
    SemiImplicitEuler,
    /// Classical fourth-order Runge–Kutta with inputs held over the step.
    #[default]
    Rk4,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    /// Inner integration step (s).
    pub dt: f64,
    /// Controller update period (s); must be a multiple of `dt`.
    pub control_period: f64,
    pub integrator: Integrator,
    pub friction: FrictionModel,
    /// Abort when any |q̇ᵢ| exceeds this multiple of its limit.
    pub abort_factor: f64,
    /// Keep one trace row every this many inner steps (0 disables).
    pub record_every: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            control_period: 5e-3,
            integrator: Integrator::Rk4,
            friction: FrictionModel::default(),
            abort_factor: 2.0,
            record_every: 10,
        }
    }
}

impl SimConfig {
    pub fn steps_per_control(&self) -> usize {
        ((self.control_period / self.dt).round() as usize).max(1)
    }
}

/// Joint torques by source.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TorqueBreakdown<T: Real> {
    pub tau_c: JointVector<T>,
    pub tau_n: JointVector<T>,
    pub tau_no: JointVector<T>,
    pub tau_f: JointVector<T>,
    pub tau_ext: JointVector<T>,
}

impl<T: Real> Default for TorqueBreakdown<T> {
    fn default() -> Self {
        Self {
            tau_c: JointVector::zeros(),
            tau_n: JointVector::zeros(),
            tau_no: JointVector::zeros(),
            tau_f: JointVector::zeros(),
            tau_ext: JointVector::zeros(),
        }
    }
}

/// Controller torques, held constant between control updates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlOutput<T: Real> {
    pub tau_c: JointVector<T>,
    pub tau_n: JointVector<T>,
    pub tau_no: JointVector<T>,
}

impl<T: Real> Default for ControlOutput<T> {
    fn default() -> Self {
        Self {
            tau_c: JointVector::zeros(),
            tau_n: JointVector::zeros(),
            tau_no: JointVector::zeros(),
        }
    }
}

impl<T: Real> ControlOutput<T> {
    pub fn total(&self) -> JointVector<T> {
        self.tau_c + self.tau_n + self.tau_no
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimState<T: Real> {
    pub t: f64,
    pub joints: JointState<T>,
    pub torques: TorqueBreakdown<T>,
}

impl<T: Real> SimState<T> {
    pub fn at_rest(q: JointVector<T>) -> Self {
        Self {
            t: 0.0,
            joints: JointState::at_rest(q),
            torques: TorqueBreakdown::default(),
        }
    }
}

/// A control law sampled at the control rate, plus an optional
/// end-effector force source sampled at the inner rate (a simulated hand).
pub trait Controller<T: Real> {
    fn control(&mut self, model: &RobotModel<T>, state: &SimState<T>) -> Result<ControlOutput<T>>;

    fn external_force(&mut self, _t: f64, _position: &Vector3<T>, _velocity: &Vector3<T>) -> Vector3<T> {
        Vector3::zeros()
    }
}

/// Gravity-compensated acceleration `M⁻¹(τ − C·q̇)`.
fn acceleration<T: Real>(
    model: &RobotModel<T>,
    q: &JointVector<T>,
    qdot: &JointVector<T>,
    tau: &JointVector<T>,
) -> JointVector<T> {
    let mp = model.mass_partials(q);
    let rhs = tau - mp.coriolis(qdot) * qdot;
    mp.mass.cholesky().expect("mass matrix is positive definite").solve(&rhs)
}

/// Advances one inner step. `tau_ext` is held over the step; friction is
/// evaluated with the velocity at each stage.
pub fn advance<T: Real>(
    model: &RobotModel<T>,
    state: &SimState<T>,
    control: &ControlOutput<T>,
    tau_ext: &JointVector<T>,
    config: &SimConfig,
) -> Result<SimState<T>> {
    let dt = T::lit(config.dt);
    let q = state.joints.q;
    let qdot = state.joints.qdot;
    let applied = control.total() + tau_ext;
    let friction = &config.friction;
    let tau_f = friction.torque(&qdot);
    let (q_next, qdot_next) = match config.integrator {
        Integrator::SemiImplicitEuler => {
            let qddot = acceleration(model, &q, &qdot, &(applied + tau_f));
            let v = qdot + qddot * dt;
            (q + v * dt, v)
        }
        Integrator::Rk4 => {
            let f = |q: &JointVector<T>, v: &JointVector<T>| acceleration(model, q, v, &(applied + friction.torque(v)));
            let half = dt * T::lit(0.5);
            let a1 = f(&q, &qdot);
            let (q2, v2) = (q + qdot * half, qdot + a1 * half);
            let a2 = f(&q2, &v2);
            let (q3, v3) = (q + v2 * half, qdot + a2 * half);
            let a3 = f(&q3, &v3);
            let (q4, v4) = (q + v3 * dt, qdot + a3 * dt);
            let a4 = f(&q4, &v4);
            let sixth = dt / T::lit(6.0);
            let two = T::lit(2.0);
            (
                q + (qdot + v2 * two + v3 * two + v4) * sixth,
                qdot + (a1 + a2 * two + a3 * two + a4) * sixth,
            )
        }
    };
    let limits = model.velocity_limits();
    for i in 0..DOF {
        let bound = limits[i] * T::lit(config.abort_factor);
        if !qdot_next[i].is_finite() || qdot_next[i].abs() > bound {
            return Err(Error::InstabilityAbort {
                time: state.t + config.dt,
                joint: i,
                velocity: qdot_next[i].as_f64(),
                bound: bound.as_f64(),
            });
        }
    }
    Ok(SimState {
        t: state.t + config.dt,
        joints: JointState {
            q: q_next,
            qdot: qdot_next,
        },
        torques: TorqueBreakdown {
            tau_c: control.tau_c,
            tau_n: control.tau_n,
            tau_no: control.tau_no,
            tau_f,
            tau_ext: *tau_ext,
        },
    })
}

/// One inner step with the default integrator under scheduled
/// disturbances and friction.
pub fn step<T: Real>(
    model: &RobotModel<T>,
    state: &SimState<T>,
    control: &ControlOutput<T>,
    schedule: &PerturbationSchedule,
    friction: &FrictionModel,
    dt: f64,
) -> Result<SimState<T>> {
    let config = SimConfig {
        dt,
        friction: friction.clone(),
        ..SimConfig::default()
    };
    let tau_ext = perturbation_torque(schedule, state.t, model, &state.joints.q);
    advance(model, state, control, &tau_ext, &config)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimTraceRow<T: Real> {
    pub t: f64,
    pub q: JointVector<T>,
    pub qdot: JointVector<T>,
    pub position: Vector3<T>,
    pub orientation: UnitQuaternion<T>,
    pub torques: TorqueBreakdown<T>,
    /// Force from the controller's external source (simulated hand).
    pub hand_force: Vector3<T>,
}

/// Fixed-step simulation loop with a zero-order-hold controller.
#[derive(Debug, Clone)]
pub struct Simulator<T: Real> {
    pub model: RobotModel<T>,
    pub config: SimConfig,
    pub schedule: PerturbationSchedule,
    state: SimState<T>,
    control: ControlOutput<T>,
    steps: usize,
    control_updates: usize,
    trace: Vec<SimTraceRow<T>>,
}

impl<T: Real> Simulator<T> {
    pub fn new(model: RobotModel<T>, q0: JointVector<T>, config: SimConfig, schedule: PerturbationSchedule) -> Self {
        Self {
            model,
            config,
            schedule,
            state: SimState::at_rest(q0),
            control: ControlOutput::default(),
            steps: 0,
            control_updates: 0,
            trace: Vec::new(),
        }
    }

    pub fn state(&self) -> &SimState<T> {
        &self.state
    }

    pub fn set_state(&mut self, joints: JointState<T>) {
        self.state.joints = joints;
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn control_updates(&self) -> usize {
        self.control_updates
    }

    pub fn trace(&self) -> &[SimTraceRow<T>] {
        &self.trace
    }

    pub fn take_trace(&mut self) -> Vec<SimTraceRow<T>> {
        std::mem::take(&mut self.trace)
    }

    /// One inner step; the controller runs on every control boundary.
    pub fn step<C: Controller<T> + ?Sized>(&mut self, controller: &mut C) -> Result<()> {
        if self.steps.is_multiple_of(self.config.steps_per_control()) {
            self.control = controller.control(&self.model, &self.state)?;
            self.control_updates += 1;
        }
        let q = self.state.joints.q;
        let kin = self.model.kinematics(&q);
        let jv = kin.point_jacobian(DOF - 1, &kin.ee_position);
        let ee_vel = jv * self.state.joints.qdot;
        let hand = controller.external_force(self.state.t, &kin.ee_position, &ee_vel);
        let tau_ext = perturbation_torque(&self.schedule, self.state.t, &self.model, &q) + jv.transpose() * hand;
        let next = advance(&self.model, &self.state, &self.control, &tau_ext, &self.config)?;
        self.steps += 1;
        if self.config.record_every > 0 && (self.steps - 1).is_multiple_of(self.config.record_every) {
            let pose = kin.pose();
            self.trace.push(SimTraceRow {
                t: self.state.t,
                q,
                qdot: self.state.joints.qdot,
                position: pose.position,
                orientation: pose.orientation,
                torques: next.torques,
                hand_force: hand,
            });
        }
        self.state = next;
        Ok(())
    }

    /// Runs for `duration` seconds of simulated time.
    pub fn run<C: Controller<T> + ?Sized>(&mut self, controller: &mut C, duration: f64) -> Result<()> {
        let n = (duration / self.config.dt).round() as usize;
        for _ in 0..n {
            self.step(controller)?;
        }
        Ok(())
    }
}

pub fn write_sim_trace_csv<T: Real, W: Write>(mut w: W, rows: &[SimTraceRow<T>]) -> Result<()> {
    let mut header = vec!["t".to_string()];
    for name in ["q", "qdot"] {
        header.extend((1..=DOF).map(|i| format!("{name}{i}")));
    }
    header.extend(["x", "y", "z", "qw", "qx", "qy", "qz"].map(String::from));
    for name in ["tau_c", "tau_n", "tau_no", "tau_f", "tau_ext"] {
        header.extend((1..=DOF).map(|i| format!("{name}{i}")));
    }
    header.extend(["f_hand_x", "f_hand_y", "f_hand_z"].map(String::from));
    writeln!(w, "{}", header.join(","))?;
    for r in rows {
        let mut cols: Vec<f64> = vec![r.t];
        cols.extend(r.q.iter().map(|v| v.as_f64()));
        cols.extend(r.qdot.iter().map(|v| v.as_f64()));
        cols.extend(r.position.iter().map(|v| v.as_f64()));
        let c = r.orientation.coords;
        cols.extend([c.w, c.x, c.y, c.z].map(|v| v.as_f64()));
        for tau in [
            &r.torques.tau_c,
            &r.torques.tau_n,
            &r.torques.tau_no,
            &r.torques.tau_f,
            &r.torques.tau_ext,
        ] {
            cols.extend(tau.iter().map(|v| v.as_f64()));
        }
        cols.extend(r.hand_force.iter().map(|v| v.as_f64()));
        let line: Vec<String> = cols.iter().map(|v| v.to_string()).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    Ok(())
}
