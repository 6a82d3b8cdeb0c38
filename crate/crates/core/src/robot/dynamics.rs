use nalgebra::{Matrix3, Vector3};

use super::{JointMatrix, JointVector, Kinematics, LinearJacobian, RobotModel, DOF};
use crate::scalar::Real;

/// Configuration-dependent terms of `M q̈ + C q̇ + g = τ`.
#[derive(Debug, Clone)]
pub struct Dynamics<T: Real> {
    pub mass: JointMatrix<T>,
    pub coriolis: JointMatrix<T>,
    pub gravity: JointVector<T>,
}

/// `∂M/∂q_k` for every joint `k`, computed analytically.
#[derive(Debug, Clone)]
pub struct MassPartials<T: Real> {
    pub mass: JointMatrix<T>,
    pub partials: Vec<JointMatrix<T>>,
}

impl<T: Real> MassPartials<T> {
    /// `Ṁ = Σ_k ∂M/∂q_k · q̇_k`.
    pub fn mass_rate(&self, qdot: &JointVector<T>) -> JointMatrix<T> {
        self.partials
            .iter()
            .zip(qdot.iter())
            .fold(JointMatrix::zeros(), |acc, (dm, &v)| acc + dm * v)
    }

    /// Coriolis matrix from the Christoffel symbols of the first kind, so
    /// that `Ṁ − 2C` is skew-symmetric.
    pub fn coriolis(&self, qdot: &JointVector<T>) -> JointMatrix<T> {
        let a = self.mass_rate(qdot);
        let mut b = JointMatrix::zeros();
        for (j, dm) in self.partials.iter().enumerate() {
            b.set_column(j, &(dm * qdot));
        }
        (a + b - b.transpose()) * T::lit(0.5)
    }
}

fn skew<T: Real>(v: &Vector3<T>) -> Matrix3<T> {
    Matrix3::new(
        T::zero(),
        -v.z,
        v.y,
        v.z,
        T::zero(),
        -v.x,
        -v.y,
        v.x,
        T::zero(),
    )
}

struct LinkTerms<T: Real> {
    jv: LinearJacobian<T>,
    jw: LinearJacobian<T>,
    inertia_world: Matrix3<T>,
}

fn link_terms<T: Real>(model: &RobotModel<T>, kin: &Kinematics<T>) -> Vec<LinkTerms<T>> {
    model
        .links
        .iter()
        .enumerate()
        .map(|(i, link)| {
            let r = kin.rotations[i].matrix();
            LinkTerms {
                jv: kin.point_jacobian(i, &kin.coms[i]),
                jw: kin.angular_jacobian(i),
                inertia_world: r * link.inertia * r.transpose(),
            }
        })
        .collect()
}

impl<T: Real> RobotModel<T> {
    pub fn mass_matrix(&self, q: &JointVector<T>) -> JointMatrix<T> {
        let kin = self.kinematics(q);
        self.mass_from_terms(&link_terms(self, &kin))
    }

    fn mass_from_terms(&self, terms: &[LinkTerms<T>]) -> JointMatrix<T> {
        let mut m = JointMatrix::from_diagonal(&JointVector::from_fn(|i, _| {
            self.links[i].armature
        }));
        for (link, t) in self.links.iter().zip(terms) {
            m += t.jv.transpose() * t.jv * link.mass;
            m += t.jw.transpose() * t.inertia_world * t.jw;
        }
        // symmetrize away round-off
        (m + m.transpose()) * T::lit(0.5)
    }

    pub fn mass_partials(&self, q: &JointVector<T>) -> MassPartials<T> {
        let kin = self.kinematics(q);
        let terms = link_terms(self, &kin);
        let mass = self.mass_from_terms(&terms);
        let z = &kin.axes;
        let p = &kin.joint_positions;
        let mut partials = vec![JointMatrix::zeros(); DOF];
        for (k, dm) in partials.iter_mut().enumerate() {
            let zk = z[k];
            let sk = skew(&zk);
            for (i, (link, t)) in self.links.iter().zip(&terms).enumerate().skip(k) {
                let c = kin.coms[i];
                let dc = zk.cross(&(c - p[k]));
                let mut djv = LinearJacobian::zeros();
                let mut djw = LinearJacobian::zeros();
                for j in 0..=i {
                    let dz = if k < j { zk.cross(&z[j]) } else { Vector3::zeros() };
                    let dp = if k < j {
                        zk.cross(&(p[j] - p[k]))
                    } else {
                        Vector3::zeros()
                    };
                    djv.set_column(j, &(dz.cross(&(c - p[j])) + z[j].cross(&(dc - dp))));
                    djw.set_column(j, &dz);
                }
                let di = sk * t.inertia_world - t.inertia_world * sk;
                let lin = djv.transpose() * t.jv;
                *dm += (lin + lin.transpose()) * link.mass;
                let ang = djw.transpose() * t.inertia_world * t.jw;
                *dm += ang + ang.transpose() + t.jw.transpose() * di * t.jw;
            }
        }
        MassPartials { mass, partials }
    }

    pub fn coriolis_matrix(&self, q: &JointVector<T>, qdot: &JointVector<T>) -> JointMatrix<T> {
        self.mass_partials(q).coriolis(qdot)
    }

    /// Gradient of the potential energy, i.e. the torque that holds the arm
    /// against gravity.
    pub fn gravity_torque(&self, q: &JointVector<T>) -> JointVector<T> {
        let kin = self.kinematics(q);
        self.links
            .iter()
            .enumerate()
            .fold(JointVector::zeros(), |acc, (i, link)| {
                acc - kin.point_jacobian(i, &kin.coms[i]).transpose() * self.gravity * link.mass
            })
    }

    pub fn potential_energy(&self, q: &JointVector<T>) -> T {
        let kin = self.kinematics(q);
        self.links
            .iter()
            .zip(&kin.coms)
            .fold(T::zero(), |acc, (link, c)| acc - link.mass * self.gravity.dot(c))
    }

    pub fn kinetic_energy(&self, q: &JointVector<T>, qdot: &JointVector<T>) -> T {
        (qdot.transpose() * self.mass_matrix(q) * qdot)[0] * T::lit(0.5)
    }

    pub fn dynamics(&self, q: &JointVector<T>, qdot: &JointVector<T>) -> Dynamics<T> {
        let mp = self.mass_partials(q);
        Dynamics {
            coriolis: mp.coriolis(qdot),
            mass: mp.mass,
            gravity: self.gravity_torque(q),
        }
    }

    /// Joint accelerations under `τ` with gravity acting.
    pub fn forward_dynamics(
        &self,
        q: &JointVector<T>,
        qdot: &JointVector<T>,
        tau: &JointVector<T>,
    ) -> JointVector<T> {
        let d = self.dynamics(q, qdot);
        d.forward(qdot, tau)
    }
}

impl<T: Real> Dynamics<T> {
    pub fn forward(&self, qdot: &JointVector<T>, tau: &JointVector<T>) -> JointVector<T> {
        let rhs = tau - self.coriolis * qdot - self.gravity;
        self.mass
            .cholesky()
            .expect("mass matrix is positive definite")
            .solve(&rhs)
    }
}
