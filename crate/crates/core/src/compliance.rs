//! Reproduction-time null-space compliance: friction feed-forward and
//! damping confined to the kinematic null space of the task.

use nalgebra::{Vector3, Vector6};
use serde::{Deserialize, Serialize};

use crate::robot::{DampingPolicy, Jacobian, JointMatrix, JointVector, RobotModel};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ComplianceGains {
    pub d_n: f64,
    pub alpha_f: f64,
    /// Null-space damping (N·m·s/rad); the compliance level knob.
    pub alpha_d: f64,
}

impl Default for ComplianceGains {
    fn default() -> Self {
        Self {
            d_n: 1.0,
            alpha_f: 0.1,
            alpha_d: 20.0,
        }
    }
}

/// `q̇_d = J†·[ẏ; 0]` (zero commanded angular velocity).
pub fn desired_joint_velocity<T: Real>(
    model: &RobotModel<T>,
    j: &Jacobian<T>,
    ydot: &Vector3<T>,
    policy: &DampingPolicy<T>,
) -> JointVector<T> {
    let twist = Vector6::new(ydot.x, ydot.y, ydot.z, T::zero(), T::zero(), T::zero());
    model.pseudoinverse(j, policy) * twist
}

/// `τ_n = N·d_n·α_f·q̇_d + N·α_d·(q̇_d − q̇)`.
pub fn compliance_torque<T: Real>(
    n: &JointMatrix<T>,
    qdot_d: &JointVector<T>,
    qdot: &JointVector<T>,
    gains: &ComplianceGains,
) -> JointVector<T> {
    let ff = qdot_d * T::lit(gains.d_n * gains.alpha_f);
    let damp = (qdot_d - qdot) * T::lit(gains.alpha_d);
    n * (ff + damp)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_q(rng: &mut ChaCha8Rng) -> JointVector<f64> {
        JointVector::from_fn(|i, _| if i == 3 { rng.random_range(-2.0..-0.5) } else { rng.random_range(-1.2..1.2) })
    }

    #[test]
    fn desired_velocity_realizes_the_command() {
        let model = RobotModel::lwr_like();
        let policy = DampingPolicy::default();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(
            desired_joint_velocity(&model, &model.jacobian(&random_q(&mut rng)), &Vector3::zeros(), &policy),
            JointVector::zeros()
        );
        for _ in 0..50 {
            let q = random_q(&mut rng);
            let j = model.jacobian(&q);
            let sv = j.svd(false, false).singular_values.min();
            if sv < 0.05 {
                continue;
            }
            let v = Vector3::new(rng.random_range(-0.1..0.1), rng.random_range(-0.1..0.1), rng.random_range(-0.1..0.1));
            let qd = desired_joint_velocity(&model, &j, &v, &policy);
            let twist = j * qd;
            assert!((twist - Vector6::new(v.x, v.y, v.z, 0.0, 0.0, 0.0)).amax() < 1e-9);
            let n = model.nullspace_projector(&j, &policy);
            assert!((n * qd).amax() < 1e-9);
        }
    }

    #[test]
    fn torque_lies_in_projector_range_and_dissipates() {
        let model = RobotModel::lwr_like();
        let policy = DampingPolicy::default();
        let gains = ComplianceGains::default();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..100 {
            let q = random_q(&mut rng);
            let j = model.jacobian(&q);
            let n = model.nullspace_projector(&j, &policy);
            let qd = JointVector::from_fn(|_, _| rng.random_range(-1.0..1.0));
            let qdot = JointVector::from_fn(|_, _| rng.random_range(-1.0..1.0));
            let tau = compliance_torque(&n, &qd, &qdot, &gains);
            assert!(((JointMatrix::identity() - n) * tau).amax() < 1e-9);
            // null-space velocity, no command: power is −α_d·q̇ᵀNq̇ ≤ 0
            let v = n * qdot;
            let tau = compliance_torque(&n, &JointVector::zeros(), &v, &gains);
            assert!(v.dot(&tau) <= 1e-12);
            assert!((v.dot(&tau) + gains.alpha_d * v.dot(&(n * v))).abs() < 1e-9);
        }
    }

    #[test]
    fn matched_row_space_velocity_gives_zero_torque() {
        let model = RobotModel::lwr_like();
        let policy = DampingPolicy::default();
        let q = JointVector::from_row_slice(&[0.2, 0.6, -0.3, -1.4, 0.1, 0.9, 0.0]);
        let j = model.jacobian(&q);
        let n = model.nullspace_projector(&j, &policy);
        let qd = desired_joint_velocity(&model, &j, &Vector3::new(0.05, -0.02, 0.01), &policy);
        let gains = ComplianceGains {
            alpha_f: 0.0,
            ..ComplianceGains::default()
        };
        assert!(compliance_torque(&n, &qd, &qd, &gains).amax() < 1e-9);
    }
}
