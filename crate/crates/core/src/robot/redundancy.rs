use nalgebra::{DMatrix, Matrix3, SMatrix};

use super::{Jacobian, JointMatrix, JointVector, LinearJacobian, RobotModel, DOF};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Singular-value-dependent damping for the least-squares inverse.
///
/// The damping is zero while the smallest singular value stays above
/// `sigma_threshold` and ramps quadratically up to `max_damping` as it
/// approaches zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DampingPolicy<T: Real> {
    pub sigma_threshold: T,
    pub max_damping: T,
}

impl<T: Real> Default for DampingPolicy<T> {
    fn default() -> Self {
        Self {
            sigma_threshold: T::lit(1e-3),
            max_damping: T::lit(1e-2),
        }
    }
}

impl<T: Real> DampingPolicy<T> {
    pub fn damping(&self, sigma_min: T) -> T {
        if sigma_min >= self.sigma_threshold {
            return T::zero();
        }
        let r = sigma_min / self.sigma_threshold;
        self.max_damping * (T::one() - r * r).sqrt()
    }
}

/// Damped Moore–Penrose inverse `Jᵀ(JJᵀ + λ²I)⁻¹` computed through the SVD,
/// for a wide (or square) matrix. Returns the inverse and the damping used.
pub fn damped_pseudoinverse<T: Real>(j: &DMatrix<T>, policy: &DampingPolicy<T>) -> (DMatrix<T>, T) {
    let svd = j.clone().svd(true, true);
    let sigma = &svd.singular_values;
    let sigma_min = if j.nrows() <= j.ncols() {
        sigma.min()
    } else {
        T::zero()
    };
    let lambda = policy.damping(sigma_min);
    let l2 = lambda * lambda;
    let inv = sigma.map(|s| {
        let den = s * s + l2;
        if den > T::zero() {
            s / den
        } else {
            T::zero()
        }
    });
    let u = svd.u.expect("u requested");
    let vt = svd.v_t.expect("v_t requested");
    let pinv = vt.transpose() * DMatrix::from_diagonal(&inv) * u.transpose();
    (pinv, lambda)
}

/// `N = I − J†J`.
pub fn nullspace_projector<T: Real>(j: &DMatrix<T>, policy: &DampingPolicy<T>) -> DMatrix<T> {
    let (pinv, _) = damped_pseudoinverse(j, policy);
    DMatrix::identity(j.ncols(), j.ncols()) - pinv * j
}

pub fn manipulability<T: Real>(jv: &LinearJacobian<T>) -> Matrix3<T> {
    jv * jv.transpose()
}

fn to_dynamic<T: Real, const R: usize, const C: usize>(m: &SMatrix<T, R, C>) -> DMatrix<T> {
    DMatrix::from_column_slice(R, C, m.as_slice())
}

impl<T: Real> RobotModel<T> {
    pub fn pseudoinverse(&self, j: &Jacobian<T>, policy: &DampingPolicy<T>) -> SMatrix<T, DOF, 6> {
        let (pinv, _) = damped_pseudoinverse(&to_dynamic(j), policy);
        SMatrix::from_column_slice(pinv.as_slice())
    }

    pub fn nullspace_projector(&self, j: &Jacobian<T>, policy: &DampingPolicy<T>) -> JointMatrix<T> {
        JointMatrix::from_column_slice(nullspace_projector(&to_dynamic(j), policy).as_slice())
    }
}

/// Relative eigenvalue floor of `Jv M⁻¹ Jvᵀ` below which Λ is damped.
const LAMBDA_CONDITION_CAP: f64 = 1e8;

/// `Λ = (Jv M⁻¹ Jvᵀ)⁻¹`, damped along directions whose eigenvalue falls below
/// the condition cap.
pub fn apparent_inertia<T: Real>(jv: &LinearJacobian<T>, mass_inv: &JointMatrix<T>) -> Result<Matrix3<T>> {
    let a = jv * mass_inv * jv.transpose();
    let a = (a + a.transpose()) * T::lit(0.5);
    let eig = a.symmetric_eigen();
    let a_max = eig.eigenvalues.max().max(T::zero());
    let floor = (a_max / T::lit(LAMBDA_CONDITION_CAP)).max(T::lit(1e-12));
    let damped = eig.eigenvalues.iter().any(|&v| v < floor);
    let inv = eig.eigenvalues.map(|v| {
        let v = v.max(T::zero());
        if damped {
            v / (v * v + floor * floor)
        } else {
            T::one() / v
        }
    });
    let lambda = eig.eigenvectors * Matrix3::from_diagonal(&inv) * eig.eigenvectors.transpose();
    if lambda.iter().all(|v| v.is_finite()) {
        Ok((lambda + lambda.transpose()) * T::lit(0.5))
    } else {
        Err(Error::Singularity("non-finite apparent inertia".into()))
    }
}

/// Dynamically consistent quantities of the translational task.
#[derive(Debug, Clone)]
pub struct DynConsistent<T: Real> {
    pub lambda: Matrix3<T>,
    /// `J̄v = M⁻¹ Jvᵀ Λ`.
    pub inverse: SMatrix<T, DOF, 3>,
    /// `N_dyn = I − Jvᵀ J̄vᵀ`.
    pub projector: JointMatrix<T>,
    pub mass_inv: JointMatrix<T>,
}

impl<T: Real> DynConsistent<T> {
    pub fn from_parts(jv: &LinearJacobian<T>, mass: &JointMatrix<T>) -> Result<Self> {
        let mass_inv = mass
            .cholesky()
            .ok_or_else(|| Error::Singularity("mass matrix not positive definite".into()))?
            .inverse();
        let lambda = apparent_inertia(jv, &mass_inv)?;
        let inverse = mass_inv * jv.transpose() * lambda;
        let projector = JointMatrix::identity() - jv.transpose() * inverse.transpose();
        Ok(Self {
            lambda,
            inverse,
            projector,
            mass_inv,
        })
    }
}

pub fn dyn_consistent_projector<T: Real>(model: &RobotModel<T>, q: &JointVector<T>) -> Result<DynConsistent<T>> {
    let jv = model.translational_jacobian(q);
    DynConsistent::from_parts(&jv, &model.mass_matrix(q))
}

impl<T: Real> RobotModel<T> {
    pub fn apparent_inertia(&self, q: &JointVector<T>) -> Result<Matrix3<T>> {
        Ok(dyn_consistent_projector(self, q)?.lambda)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
        DMatrix::from_fn(r, c, |_, _| rng.random_range(-1.0..1.0))
    }

    fn random_q(rng: &mut ChaCha8Rng) -> JointVector<f64> {
        JointVector::from_fn(|_, _| rng.random_range(-1.5..1.5))
    }

    #[test]
    fn square_full_rank_has_trivial_nullspace() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let j = random_matrix(&mut rng, 6, 6);
        let n = nullspace_projector(&j, &DampingPolicy::default());
        assert!(n.abs().max() < 1e-9);
    }

    #[test]
    fn redundant_jacobian_has_rank_one_nullspace() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20 {
            let j = random_matrix(&mut rng, 6, 7);
            let n = nullspace_projector(&j, &DampingPolicy::default());
            assert!((&j * &n).abs().max() <= 1e-9);
            assert!((&n * &n - &n).abs().max() <= 1e-9);
            let rank = n.clone().svd(false, false).rank(1e-6);
            assert_eq!(rank, 1);
        }
    }

    #[test]
    fn damped_inverse_is_bounded_when_rank_deficient() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut j = random_matrix(&mut rng, 6, 7);
        let row = j.row(0).into_owned();
        j.set_row(5, &(row * 2.0));
        let policy = DampingPolicy::default();
        let (pinv, lambda) = damped_pseudoinverse(&j, &policy);
        assert!(lambda > 0.0);
        let norm = pinv.svd(false, false).singular_values.max();
        assert!(norm <= 1.0 / (2.0 * lambda) + 1e-9, "{norm} vs {}", 1.0 / (2.0 * lambda));
    }

    #[test]
    fn damping_ramps_from_zero() {
        let p = DampingPolicy::<f64>::default();
        assert_eq!(p.damping(2e-3), 0.0);
        assert_eq!(p.damping(1e-3), 0.0);
        assert!((p.damping(0.0) - p.max_damping).abs() < 1e-15);
        assert!(p.damping(5e-4) > 0.0 && p.damping(5e-4) < p.max_damping);
    }

    #[test]
    fn dynamically_consistent_projector_blocks_task_acceleration() {
        let m = RobotModel::<f64>::lwr_like();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..100 {
            let q = random_q(&mut rng);
            let dc = dyn_consistent_projector(&m, &q).unwrap();
            let jv = m.translational_jacobian(&q);
            assert!((jv * dc.mass_inv * dc.projector).abs().max() <= 1e-8);
        }
    }

    #[test]
    fn degenerate_jacobian_gives_identity_projector() {
        let m = RobotModel::<f64>::lwr_like();
        let dc = DynConsistent::from_parts(&LinearJacobian::zeros(), &m.mass_matrix(&JointVector::zeros())).unwrap();
        assert!((dc.projector - JointMatrix::identity()).abs().max() < 1e-15);
    }

    #[test]
    fn apparent_inertia_is_spd_and_inverts() {
        let m = RobotModel::<f64>::lwr_like();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let q = random_q(&mut rng);
            let jv = m.translational_jacobian(&q);
            let minv = m.mass_matrix(&q).try_inverse().unwrap();
            let lambda = apparent_inertia(&jv, &minv).unwrap();
            assert!(lambda.symmetric_eigenvalues().min() > 0.0);
            let id = lambda * (jv * minv * jv.transpose());
            assert!((id - Matrix3::identity()).abs().max() < 1e-8);
        }
    }

    #[test]
    fn apparent_inertia_grows_toward_full_extension() {
        let m = RobotModel::<f64>::lwr_like();
        // bend only the elbow; the arm straightens as q4 -> 0
        let mut last = 0.0;
        for step in (1..=30).rev() {
            let mut q = JointVector::from_column_slice(&[0.0, 0.5, 0.0, 0.0, 0.0, 0.3, 0.0]);
            q[3] = -0.02 * step as f64;
            let jv = m.translational_jacobian(&q);
            let minv = m.mass_matrix(&q).try_inverse().unwrap();
            let top = apparent_inertia(&jv, &minv).unwrap().symmetric_eigenvalues().max();
            assert!(top > last, "not monotone at step {step}");
            last = top;
        }
    }
}
