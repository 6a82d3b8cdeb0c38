//! Reproduction velocity: the diffeomorphic dynamical system, its offline
//! speed calibration, and the EKF bias correction.

mod ekf;
mod session;

use std::collections::VecDeque;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

pub use ekf::{ekf_correct, nearest_demo_point, project_onto_demo, EkfConfig, EkfState, NearestPoint};
pub use session::{write_trace_csv, ReproductionConfig, ReproductionState, Reproducer, TraceRow};

use crate::error::Result;
use crate::fdm::{DemonstrationPath, Diffeomorphism};
use crate::scalar::Real;

/// Gain matrix ζ of the dynamical system and the parameters of its offline
/// adaptation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct VelocityModulation<T: Real> {
    pub zeta: Matrix3<T>,
    pub eta: T,
    pub epsilon: T,
    pub window: usize,
    /// Elementwise bound on the adapted offset `ζ − ζ₀`.
    pub clamp: T,
}

impl<T: Real> Default for VelocityModulation<T> {
    fn default() -> Self {
        Self {
            zeta: Matrix3::identity(),
            eta: T::lit(0.005),
            epsilon: T::lit(1e-6),
            window: 20,
            clamp: T::lit(5.0),
        }
    }
}

/// Source-space state `x̂` (shifted so the attractor is the origin) and
/// `J_Φ` at `Φ⁻¹(y)`.
fn source_state<T: Real>(phi: &Diffeomorphism<T>, y: &Vector3<T>) -> Result<(Vector3<T>, Matrix3<T>)> {
    let x = phi.inverse(y)?;
    Ok((x - phi.source_goal, phi.jacobian_of(&x)))
}

/// `ẏ = −ζ·J_Φ(Φ⁻¹(y))·x̂`.
pub fn fdm_velocity<T: Real>(phi: &Diffeomorphism<T>, y: &Vector3<T>, zeta: &Matrix3<T>) -> Result<Vector3<T>> {
    let (xhat, j) = source_state(phi, y)?;
    Ok(-(zeta * (j * xhat)))
}

/// Scalar gain `s` minimizing `Σ‖v_i + s·m_i‖²` over the demonstration,
/// with `m = J_Φ·x̂`. Used as the starting point `ζ₀ = s·I`.
pub fn fit_speed_gain<T: Real>(demo: &DemonstrationPath<T>, phi: &Diffeomorphism<T>) -> Result<T> {
    let mut num = T::zero();
    let mut den = T::zero();
    for (y, v) in demo.points.iter().zip(&demo.velocities) {
        let (xhat, j) = source_state(phi, y)?;
        let m = j * xhat;
        num -= v.dot(&m);
        den += m.norm_squared();
    }
    Ok(if den > T::zero() { (num / den).max(T::zero()) } else { T::one() })
}

/// One calibration pass over the demonstration.
///
/// At each demo point the velocity error `v_e = v_demo − ẏ` drives a
/// normalized rank-one step `−v_e·mᵀ/(‖v_e·mᵀ‖_F + ε)`; steps are smoothed
/// by a moving average of `window` samples, scaled by `η`, accumulated, and
/// the accumulated offset from the starting ζ is clamped elementwise.
pub fn adapt_zeta<T: Real>(
    demo: &DemonstrationPath<T>,
    phi: &Diffeomorphism<T>,
    params: &VelocityModulation<T>,
) -> Result<Matrix3<T>> {
    let zeta0 = params.zeta;
    let mut zeta = zeta0;
    let window = params.window.max(1);
    let mut recent: VecDeque<Matrix3<T>> = VecDeque::with_capacity(window);
    let mut sum = Matrix3::zeros();
    for (y, v) in demo.points.iter().zip(&demo.velocities) {
        let (xhat, j) = source_state(phi, y)?;
        let m = j * xhat;
        let ve = v + zeta * m;
        let outer = ve * m.transpose();
        let step = -outer / (outer.norm() + params.epsilon);
        if recent.len() == window {
            sum -= recent.pop_front().expect("window is full");
        }
        recent.push_back(step);
        sum += step;
        let avg = sum / T::from_usize_lossy(recent.len());
        zeta += avg * params.eta;
        let c = params.clamp;
        zeta = zeta0 + (zeta - zeta0).map(|e| e.clamp(-c, c));
    }
    Ok(zeta)
}

/// Mean `‖v_demo − ẏ_fdm‖` over the demonstration for a given ζ.
pub fn mean_velocity_error<T: Real>(
    demo: &DemonstrationPath<T>,
    phi: &Diffeomorphism<T>,
    zeta: &Matrix3<T>,
) -> Result<T> {
    let mut total = T::zero();
    for (y, v) in demo.points.iter().zip(&demo.velocities) {
        total += (v - fdm_velocity(phi, y, zeta)?).norm();
    }
    Ok(total / T::from_usize_lossy(demo.len()))
}

/// Constant approach velocity toward a contact surface, `α_c·ê₃`.
pub fn surface_velocity<T: Real>(alpha_c: T, normal: &Vector3<T>) -> Vector3<T> {
    normal * alpha_c
}
