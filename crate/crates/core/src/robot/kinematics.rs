use nalgebra::{DMatrix, DVector, Rotation3, Unit, UnitQuaternion, Vector3, Vector6};

use super::{AngularJacobian, Jacobian, JointVector, LinearJacobian, RobotModel, DOF};
use crate::scalar::Real;

/// End-effector pose in the base frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose<T: Real> {
    pub position: Vector3<T>,
    pub orientation: UnitQuaternion<T>,
}

/// All frames of the chain at one configuration.
#[derive(Debug, Clone)]
pub struct Kinematics<T: Real> {
    /// Link orientations (after each joint rotation) in the base frame.
    pub rotations: Vec<Rotation3<T>>,
    /// Joint origins in the base frame.
    pub joint_positions: Vec<Vector3<T>>,
    /// Joint axes in the base frame.
    pub axes: Vec<Vector3<T>>,
    /// Link centres of mass in the base frame.
    pub coms: Vec<Vector3<T>>,
    pub ee_position: Vector3<T>,
}

impl<T: Real> Kinematics<T> {
    pub fn compute(model: &RobotModel<T>, q: &JointVector<T>) -> Self {
        let n = model.links.len();
        let mut rotations = Vec::with_capacity(n);
        let mut joint_positions = Vec::with_capacity(n);
        let mut axes = Vec::with_capacity(n);
        let mut coms = Vec::with_capacity(n);
        let mut rot = Rotation3::identity();
        let mut pos = Vector3::zeros();
        for (i, link) in model.links.iter().enumerate() {
            pos += rot * link.origin;
            let axis_world = rot * link.axis;
            rot *= Rotation3::from_axis_angle(&Unit::new_unchecked(link.axis), q[i]);
            joint_positions.push(pos);
            axes.push(axis_world);
            coms.push(pos + rot * link.com);
            rotations.push(rot);
        }
        let ee_position = pos + rot * model.tool;
        Self {
            rotations,
            joint_positions,
            axes,
            coms,
            ee_position,
        }
    }

    pub fn pose(&self) -> Pose<T> {
        Pose {
            position: self.ee_position,
            orientation: UnitQuaternion::from_rotation_matrix(
                self.rotations.last().expect("non-empty chain"),
            ),
        }
    }

    /// Linear Jacobian of a point rigidly attached to link `link`.
    pub fn point_jacobian(&self, link: usize, point: &Vector3<T>) -> LinearJacobian<T> {
        let mut jv = LinearJacobian::zeros();
        for j in 0..=link {
            let col = self.axes[j].cross(&(point - self.joint_positions[j]));
            jv.set_column(j, &col);
        }
        jv
    }

    pub fn angular_jacobian(&self, link: usize) -> AngularJacobian<T> {
        let mut jw = AngularJacobian::zeros();
        for j in 0..=link {
            jw.set_column(j, &self.axes[j]);
        }
        jw
    }

    pub fn jacobian(&self) -> Jacobian<T> {
        let mut jac = Jacobian::zeros();
        let jv = self.point_jacobian(DOF - 1, &self.ee_position);
        jac.fixed_view_mut::<3, DOF>(0, 0).copy_from(&jv);
        jac.fixed_view_mut::<3, DOF>(3, 0)
            .copy_from(&self.angular_jacobian(DOF - 1));
        jac
    }
}

impl<T: Real> RobotModel<T> {
    pub fn kinematics(&self, q: &JointVector<T>) -> Kinematics<T> {
        Kinematics::compute(self, q)
    }

    pub fn forward_kinematics(&self, q: &JointVector<T>) -> Pose<T> {
        self.kinematics(q).pose()
    }

    /// 6×n geometric Jacobian, linear velocity rows first.
    pub fn jacobian(&self, q: &JointVector<T>) -> Jacobian<T> {
        self.kinematics(q).jacobian()
    }

    pub fn translational_jacobian(&self, q: &JointVector<T>) -> LinearJacobian<T> {
        self.jacobian(q).fixed_rows::<3>(0).into_owned()
    }

    /// Damped least-squares position and orientation IK with a weak pull
    /// toward the seed posture in the null space. Returns the solution and
    /// the final position error norm.
    pub fn inverse_kinematics(
        &self,
        position: &Vector3<T>,
        orientation: &UnitQuaternion<T>,
        seed: &JointVector<T>,
        iterations: usize,
    ) -> (JointVector<T>, T) {
        let mut q = *seed;
        let lambda = T::lit(1e-3);
        let lower = self.lower_limits();
        let upper = self.upper_limits();
        for _ in 0..iterations {
            let kin = self.kinematics(&q);
            let pose = kin.pose();
            let mut err = Vector6::zeros();
            err.fixed_rows_mut::<3>(0)
                .copy_from(&(position - pose.position));
            err.fixed_rows_mut::<3>(3)
                .copy_from(&(-orientation_error(&pose.orientation, orientation)));
            if err.norm() < T::lit(1e-12) {
                break;
            }
            let j = DMatrix::from_column_slice(6, DOF, kin.jacobian().as_slice());
            let jjt = &j * j.transpose() + DMatrix::identity(6, 6) * (lambda * lambda);
            let Some(inv) = jjt.try_inverse() else { break };
            let pinv = j.transpose() * inv;
            let e = DVector::from_column_slice(err.as_slice());
            let posture = DVector::from_iterator(DOF, (seed - q).iter().copied())
                * T::lit(0.1);
            let null = DMatrix::identity(DOF, DOF) - &pinv * &j;
            let dq = &pinv * e + null * posture;
            for i in 0..DOF {
                q[i] = (q[i] + dq[i]).clamp(lower[i], upper[i]);
            }
        }
        let err = (self.forward_kinematics(&q).position - position).norm();
        (q, err)
    }
}

/// Rotation vector (axis·angle) taking `desired` to `current`, expressed in
/// the base frame. A small rotation of `current` about +x gives +x.
pub fn orientation_error<T: Real>(
    current: &UnitQuaternion<T>,
    desired: &UnitQuaternion<T>,
) -> Vector3<T> {
    (current * desired.inverse()).scaled_axis()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::robot::RobotModel;
    use nalgebra::Vector3;

    fn random_q(seed: u64) -> JointVector<f64> {
        let mut s = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        JointVector::from_fn(|_, _| {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) * 3.0 - 1.5
        })
    }

    #[test]
    fn zero_configuration_is_stacked_offsets() {
        let m = RobotModel::<f64>::lwr_like();
        let pose = m.forward_kinematics(&JointVector::zeros());
        let height: f64 = m.links.iter().map(|l| l.origin.z).sum::<f64>() + m.tool.z;
        assert!((pose.position - Vector3::new(0.0, 0.0, height)).norm() < 1e-12);
        assert!((pose.orientation.angle()).abs() < 1e-12);
    }

    #[test]
    fn periodic_in_each_joint() {
        let m = RobotModel::<f64>::lwr_like();
        let q = random_q(3);
        let p = m.forward_kinematics(&q);
        for i in 0..DOF {
            let mut q2 = q;
            q2[i] += 2.0 * std::f64::consts::PI;
            let p2 = m.forward_kinematics(&q2);
            assert!((p.position - p2.position).norm() < 1e-12);
            assert!(p.orientation.angle_to(&p2.orientation) < 1e-7);
        }
    }

    #[test]
    fn jacobian_matches_central_differences() {
        let m = RobotModel::<f64>::lwr_like();
        let h = 1e-6;
        for seed in 0..50 {
            let q = random_q(seed);
            let j = m.jacobian(&q);
            for i in 0..DOF {
                let mut qp = q;
                let mut qm = q;
                qp[i] += h;
                qm[i] -= h;
                let pp = m.forward_kinematics(&qp);
                let pm = m.forward_kinematics(&qm);
                let dp = (pp.position - pm.position) / (2.0 * h);
                let dw = orientation_error(&pp.orientation, &pm.orientation) / (2.0 * h);
                let lin = j.fixed_view::<3, 1>(0, i).into_owned();
                let ang = j.fixed_view::<3, 1>(3, i).into_owned();
                assert!((lin - dp).norm() < 1e-5, "seed {seed} joint {i}");
                assert!((ang - dw).norm() < 1e-5, "seed {seed} joint {i}");
            }
        }
    }

    #[test]
    fn stretched_arm_loses_translational_rank() {
        let m = RobotModel::<f64>::lwr_like();
        let jv = m.translational_jacobian(&JointVector::zeros());
        let sv = jv.svd(false, false).singular_values;
        assert!(sv.min() < 1e-6);
    }

    #[test]
    fn zero_velocity_gives_zero_twist() {
        let m = RobotModel::<f64>::lwr_like();
        let j = m.jacobian(&random_q(9));
        assert_eq!(j * JointVector::zeros(), Vector6::zeros());
    }

    #[test]
    fn orientation_error_sign() {
        let des = UnitQuaternion::from_euler_angles(std::f64::consts::PI, 0.0, std::f64::consts::PI);
        let cur = UnitQuaternion::from_axis_angle(&Vector3::x_axis(), 0.05) * des;
        let e = orientation_error(&cur, &des);
        assert!((e - Vector3::new(0.05, 0.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn ik_reaches_target() {
        let m = RobotModel::<f64>::lwr_like();
        let seed = JointVector::from_column_slice(&[0.0, 0.6, 0.0, -1.4, 0.0, 1.1, 0.0]);
        let down = UnitQuaternion::from_euler_angles(std::f64::consts::PI, 0.0, std::f64::consts::PI);
        let target = Vector3::new(0.55, 0.05, 0.35);
        let (q, err) = m.inverse_kinematics(&target, &down, &seed, 300);
        assert!(err < 1e-6, "ik error {err}");
        let pose = m.forward_kinematics(&q);
        assert!(pose.orientation.angle_to(&down) < 1e-5);
    }
}
