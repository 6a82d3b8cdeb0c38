//! Cartesian interaction control: direction-dependent damping, velocity
//! tracking, the orientation regulator and the teaching-mode variable
//! damping.

use nalgebra::{Matrix3, SymmetricEigen, UnitQuaternion, Vector3, Vector6};
use serde::{Deserialize, Serialize};

use crate::robot::{orientation_error, Jacobian, JointVector};
use crate::scalar::Real;

/// Principal damping values Ξ along (motion, lateral, lateral) and the
/// frame memory used for sign continuity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct DampingSpec<T: Real> {
    pub xi: Vector3<T>,
    pub prev_u: Matrix3<T>,
    pub epsilon_num: T,
}

impl<T: Real> Default for DampingSpec<T> {
    fn default() -> Self {
        Self::new(Vector3::repeat(T::lit(30.0)))
    }
}

impl<T: Real> DampingSpec<T> {
    pub fn new(xi: Vector3<T>) -> Self {
        Self {
            xi,
            prev_u: Matrix3::identity(),
            epsilon_num: T::lit(1e-8),
        }
    }

    pub fn is_valid(&self) -> bool {
        self.xi.iter().all(|x| *x >= T::zero() && x.is_finite()) && self.epsilon_num > T::zero()
    }

    /// Frame for `star`, remembered for the next call.
    pub fn principal_frame(&mut self, star: &Vector3<T>) -> Matrix3<T> {
        let u = principal_frame(star, &self.prev_u, self.epsilon_num);
        self.prev_u = u;
        u
    }

    /// `D = U·Ξ·Uᵀ` for the frame aligned with `star`.
    pub fn damping(&mut self, star: &Vector3<T>) -> Matrix3<T> {
        let u = self.principal_frame(star);
        damping_matrix(&u, &self.xi)
    }
}

/// Orthonormal frame whose first column points along `star`.
///
/// The other two columns come from Gram–Schmidt over the canonical axes
/// x, y, z in that order; an axis whose residual is at most `eps` is
/// skipped. Where the selected axis changes (star crossing a canonical
/// axis) the two lateral columns may come out in swapped order, so they are
/// reordered to best match `prev` before each is sign-flipped to agree with
/// it. A (near) zero `star` returns `prev` unchanged.
pub fn principal_frame<T: Real>(star: &Vector3<T>, prev: &Matrix3<T>, eps: T) -> Matrix3<T> {
    let n = star.norm();
    if n <= eps {
        return *prev;
    }
    let mut cols = vec![star / n];
    for k in 0..3 {
        if cols.len() == 3 {
            break;
        }
        let mut e = Vector3::zeros();
        e[k] = T::one();
        for c in &cols {
            e -= c * c.dot(&e);
        }
        let en = e.norm();
        if en > eps {
            cols.push(e / en);
        }
    }
    let mut u = Matrix3::from_columns(&cols);
    let keep = u.column(1).dot(&prev.column(1)).abs() + u.column(2).dot(&prev.column(2)).abs();
    let swap = u.column(1).dot(&prev.column(2)).abs() + u.column(2).dot(&prev.column(1)).abs();
    if swap > keep {
        u.swap_columns(1, 2);
    }
    for c in 1..3 {
        if u.column(c).dot(&prev.column(c)) < T::zero() {
            u.set_column(c, &(-u.column(c)));
        }
    }
    u
}

pub fn damping_matrix<T: Real>(u: &Matrix3<T>, xi: &Vector3<T>) -> Matrix3<T> {
    let d = u * Matrix3::from_diagonal(xi) * u.transpose();
    (d + d.transpose()) * T::lit(0.5)
}

/// Velocity tracking force `−D·(ẏ_msr − ẏ_ekf)`; opposes the tracking
/// error.
pub fn tracking_force<T: Real>(ydot_msr: &Vector3<T>, ydot_ekf: &Vector3<T>, d: &Matrix3<T>) -> Vector3<T> {
    -(d * (ydot_msr - ydot_ekf))
}

/// `Jᵀ·[F; m]`.
pub fn to_joint_torques<T: Real>(force: &Vector3<T>, moment: &Vector3<T>, j: &Jacobian<T>) -> JointVector<T> {
    let w = Vector6::new(force.x, force.y, force.z, moment.x, moment.y, moment.z);
    j.transpose() * w
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct OrientationSetpoint<T: Real> {
    pub desired: UnitQuaternion<T>,
    pub kp: T,
    pub kd: T,
}

impl<T: Real> Default for OrientationSetpoint<T> {
    fn default() -> Self {
        Self {
            desired: tool_down(),
            kp: T::lit(20.0),
            kd: T::lit(2.0),
        }
    }
}

/// Tool pointing down: Euler angles (π, 0, π).
pub fn tool_down<T: Real>() -> UnitQuaternion<T> {
    UnitQuaternion::from_euler_angles(T::pi(), T::zero(), T::pi())
}

/// Restoring moment `−Kp·e − Kd·ω`.
pub fn orientation_moment<T: Real>(
    current: &UnitQuaternion<T>,
    omega: &Vector3<T>,
    setpoint: &OrientationSetpoint<T>,
) -> Vector3<T> {
    let e = orientation_error(current, &setpoint.desired);
    -(e * setpoint.kp) - omega * setpoint.kd
}

/// Orientation PD torques through the rotational rows of `J`.
pub fn orientation_pd<T: Real>(
    current: &UnitQuaternion<T>,
    qdot: &JointVector<T>,
    j: &Jacobian<T>,
    setpoint: &OrientationSetpoint<T>,
) -> JointVector<T> {
    let jw = j.fixed_rows::<3>(3);
    let omega = jw * qdot;
    let m = orientation_moment(current, &omega, setpoint);
    jw.transpose() * m
}

/// Damping that keeps the per-direction ratio `D/Λ` equal to the target
/// ratio `D_d/Λ_d`.
///
/// Each eigenvector of `Λ` inherits the target ratio of the canonical
/// axis it is most aligned with (greedy one-to-one matching).
pub fn variable_cartesian_damping<T: Real>(
    lambda: &Matrix3<T>,
    d_d: &Vector3<T>,
    lambda_d: &Vector3<T>,
) -> Matrix3<T> {
    let ratio = d_d.component_div(lambda_d);
    let off_diagonal = lambda.norm_squared() - lambda.diagonal().norm_squared();
    if off_diagonal == T::zero() {
        return Matrix3::from_diagonal(&ratio.component_mul(&lambda.diagonal()));
    }
    let eig = SymmetricEigen::new(*lambda);
    let assignment = align_to_axes(&eig.eigenvectors);
    let mut scaled = Vector3::zeros();
    for j in 0..3 {
        scaled[j] = ratio[assignment[j]] * eig.eigenvalues[j];
    }
    let v = eig.eigenvectors;
    let d = v * Matrix3::from_diagonal(&scaled) * v.transpose();
    (d + d.transpose()) * T::lit(0.5)
}

/// `out[j]` is the canonical axis assigned to column `j` of `v`.
fn align_to_axes<T: Real>(v: &Matrix3<T>) -> [usize; 3] {
    let mut out = [0; 3];
    let mut row_used = [false; 3];
    let mut col_used = [false; 3];
    for _ in 0..3 {
        let mut best = (0, 0);
        let mut best_val = -T::one();
        for i in (0..3).filter(|&i| !row_used[i]) {
            for j in (0..3).filter(|&j| !col_used[j]) {
                let a = v[(i, j)].abs();
                if a > best_val {
                    best_val = a;
                    best = (i, j);
                }
            }
        }
        row_used[best.0] = true;
        col_used[best.1] = true;
        out[best.1] = best.0;
    }
    out
}
