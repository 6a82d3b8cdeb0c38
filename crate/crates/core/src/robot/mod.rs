//! Kinematic and dynamic model of a 7-DOF serial manipulator, plus the
//! redundancy algebra (pseudoinverses, null-space projectors, apparent
//! inertia) the controllers consume.

mod dynamics;
mod kinematics;
mod redundancy;

pub use dynamics::{Dynamics, MassPartials};
pub use kinematics::{orientation_error, Kinematics, Pose};
pub use redundancy::{
    apparent_inertia, damped_pseudoinverse, dyn_consistent_projector, manipulability,
    nullspace_projector, DampingPolicy, DynConsistent,
};

use nalgebra::{Matrix3, SMatrix, SVector, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Number of joints of the shipped manipulator.
pub const DOF: usize = 7;

pub type JointVector<T> = SVector<T, DOF>;
pub type JointMatrix<T> = SMatrix<T, DOF, DOF>;
/// Full geometric Jacobian, linear rows first.
pub type Jacobian<T> = SMatrix<T, 6, DOF>;
pub type LinearJacobian<T> = SMatrix<T, 3, DOF>;
pub type AngularJacobian<T> = SMatrix<T, 3, DOF>;

/// One revolute joint and the rigid link it drives.
///
/// `origin` is the joint position expressed in the previous link frame; the
/// joint then rotates about `axis` (unit vector, local frame). Mass
/// properties are expressed in the link frame after the joint rotation.
#[derive(Debug, Clone, PartialEq)]
pub struct Link<T: Real> {
    pub origin: Vector3<T>,
    pub axis: Vector3<T>,
    pub mass: T,
    pub com: Vector3<T>,
    /// Rotational inertia about the centre of mass (kg·m²).
    pub inertia: Matrix3<T>,
    /// Reflected rotor inertia added to the joint diagonal of M (kg·m²).
    pub armature: T,
    pub lower: T,
    pub upper: T,
    pub max_velocity: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RobotModel<T: Real> {
    pub links: Vec<Link<T>>,
    /// End-effector point expressed in the last link frame.
    pub tool: Vector3<T>,
    pub gravity: Vector3<T>,
}

/// Joint positions and velocities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointState<T: Real> {
    pub q: JointVector<T>,
    pub qdot: JointVector<T>,
}

impl<T: Real> JointState<T> {
    pub fn at_rest(q: JointVector<T>) -> Self {
        Self {
            q,
            qdot: JointVector::zeros(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.q.iter().chain(self.qdot.iter()).all(|v| v.is_finite())
    }
}

impl<T: Real> RobotModel<T> {
    /// LWR-like arm: roughly 1.2 m tall when stretched, alternating
    /// roll/pitch axes, spherical wrist, link masses between 0.8 and 2.5 kg.
    pub fn lwr_like() -> Self {
        RobotSpec::lwr_like().to_model().expect("shipped model is valid")
    }

    pub fn dof(&self) -> usize {
        self.links.len()
    }

    pub fn lower_limits(&self) -> JointVector<T> {
        JointVector::from_fn(|i, _| self.links[i].lower)
    }

    pub fn upper_limits(&self) -> JointVector<T> {
        JointVector::from_fn(|i, _| self.links[i].upper)
    }

    pub fn velocity_limits(&self) -> JointVector<T> {
        JointVector::from_fn(|i, _| self.links[i].max_velocity)
    }

    pub fn within_limits(&self, q: &JointVector<T>) -> bool {
        self.links
            .iter()
            .zip(q.iter())
            .all(|(l, &qi)| qi >= l.lower && qi <= l.upper)
    }

    pub fn validate(&self) -> Result<()> {
        if self.links.len() != DOF {
            return Err(Error::InvalidInput(format!(
                "model must have {DOF} links, got {}",
                self.links.len()
            )));
        }
        for (i, l) in self.links.iter().enumerate() {
            if !(l.mass > T::zero()) {
                return Err(Error::InvalidInput(format!("link {i}: mass must be > 0")));
            }
            if !(l.lower < l.upper) {
                return Err(Error::InvalidInput(format!(
                    "link {i}: lower limit must be below upper limit"
                )));
            }
            if (l.axis.norm() - T::one()).abs() > T::lit(1e-6) {
                return Err(Error::InvalidInput(format!("link {i}: axis must be unit")));
            }
            if (l.inertia - l.inertia.transpose()).abs().max() > T::lit(1e-12) {
                return Err(Error::InvalidInput(format!("link {i}: inertia not symmetric")));
            }
            if l.inertia.cholesky().is_none() {
                return Err(Error::InvalidInput(format!(
                    "link {i}: inertia not positive definite"
                )));
            }
            if l.armature < T::zero() || !(l.max_velocity > T::zero()) {
                return Err(Error::InvalidInput(format!(
                    "link {i}: armature must be >= 0 and velocity limit > 0"
                )));
            }
        }
        Ok(())
    }

    pub fn to_spec(&self) -> RobotSpec {
        let v3 = |v: &Vector3<T>| [v.x.as_f64(), v.y.as_f64(), v.z.as_f64()];
        RobotSpec {
            tool: v3(&self.tool),
            gravity: v3(&self.gravity),
            links: self
                .links
                .iter()
                .map(|l| LinkSpec {
                    origin: v3(&l.origin),
                    axis: v3(&l.axis),
                    mass: l.mass.as_f64(),
                    com: v3(&l.com),
                    inertia: [
                        l.inertia[(0, 0)].as_f64(),
                        l.inertia[(1, 1)].as_f64(),
                        l.inertia[(2, 2)].as_f64(),
                        l.inertia[(0, 1)].as_f64(),
                        l.inertia[(0, 2)].as_f64(),
                        l.inertia[(1, 2)].as_f64(),
                    ],
                    armature: l.armature.as_f64(),
                    limits_deg: [l.lower.as_f64().to_degrees(), l.upper.as_f64().to_degrees()],
                    max_velocity: l.max_velocity.as_f64(),
                })
                .collect(),
        }
    }

    /// Parses the plain-text (TOML) model description.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let spec: RobotSpec = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        spec.to_model()
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(&self.to_spec()).expect("robot spec serializes")
    }
}

/// File schema of a robot model.
///
/// ```toml
/// tool = [0.0, 0.0, 0.05]          # EE point in the last link frame (m)
/// gravity = [0.0, 0.0, -9.81]      # m/s²
///
/// [[links]]
/// origin = [0.0, 0.0, 0.11]        # joint position in the previous frame (m)
/// axis = [0.0, 0.0, 1.0]           # rotation axis, local frame
/// mass = 2.5                       # kg
/// com = [0.0, 0.01, 0.1]           # centre of mass, link frame (m)
/// inertia = [ixx, iyy, izz, ixy, ixz, iyz]   # about the com (kg·m²)
/// armature = 0.35                  # reflected rotor inertia (kg·m²)
/// limits_deg = [-170.0, 170.0]
/// max_velocity = 1.92              # rad/s
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobotSpec {
    pub tool: [f64; 3],
    pub gravity: [f64; 3],
    pub links: Vec<LinkSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkSpec {
    pub origin: [f64; 3],
    pub axis: [f64; 3],
    pub mass: f64,
    pub com: [f64; 3],
    pub inertia: [f64; 6],
    pub armature: f64,
    pub limits_deg: [f64; 2],
    pub max_velocity: f64,
}

fn cylinder_inertia(mass: f64, length: f64, radius: f64) -> [f64; 6] {
    let side = mass * (3.0 * radius * radius + length * length) / 12.0;
    let axial = 0.5 * mass * radius * radius;
    [side, side, axial, 0.0, 0.0, 0.0]
}

impl RobotSpec {
    pub fn lwr_like() -> Self {
        // (origin z, axis, mass, length of the link body, armature, limit deg, vmax)
        type Row = (f64, [f64; 3], f64, f64, f64, f64, f64);
        let table: [Row; DOF] = [
            (0.11, [0.0, 0.0, 1.0], 2.5, 0.20, 0.35, 170.0, 1.92),
            (0.20, [0.0, 1.0, 0.0], 2.5, 0.20, 0.35, 120.0, 1.92),
            (0.20, [0.0, 0.0, 1.0], 2.2, 0.20, 0.20, 170.0, 2.23),
            (0.20, [0.0, -1.0, 0.0], 2.2, 0.19, 0.20, 120.0, 2.23),
            (0.19, [0.0, 0.0, 1.0], 1.8, 0.20, 0.10, 170.0, 3.56),
            (0.20, [0.0, 1.0, 0.0], 1.2, 0.078, 0.06, 120.0, 3.21),
            (0.078, [0.0, 0.0, 1.0], 0.8, 0.05, 0.04, 170.0, 3.21),
        ];
        let links = table
            .iter()
            .enumerate()
            .map(|(i, &(oz, axis, mass, len, armature, lim, vmax))| {
                // small lateral com offsets so the dynamics are not degenerate
                let lateral = if i % 2 == 0 { 0.01 } else { -0.008 };
                LinkSpec {
                    origin: [0.0, 0.0, oz],
                    axis,
                    mass,
                    com: [0.0, lateral, 0.5 * len],
                    inertia: cylinder_inertia(mass, len, 0.06),
                    armature,
                    limits_deg: [-lim, lim],
                    max_velocity: vmax,
                }
            })
            .collect();
        Self {
            tool: [0.0, 0.0, 0.05],
            gravity: [0.0, 0.0, -9.81],
            links,
        }
    }

    pub fn to_model<T: Real>(&self) -> Result<RobotModel<T>> {
        let v3 = |a: &[f64; 3]| Vector3::new(T::lit(a[0]), T::lit(a[1]), T::lit(a[2]));
        let links = self
            .links
            .iter()
            .map(|l| {
                let [ixx, iyy, izz, ixy, ixz, iyz] = l.inertia;
                let axis = v3(&l.axis);
                Link {
                    origin: v3(&l.origin),
                    axis: axis.normalize(),
                    mass: T::lit(l.mass),
                    com: v3(&l.com),
                    inertia: Matrix3::new(ixx, ixy, ixz, ixy, iyy, iyz, ixz, iyz, izz)
                        .map(T::lit),
                    armature: T::lit(l.armature),
                    lower: T::lit(l.limits_deg[0].to_radians()),
                    upper: T::lit(l.limits_deg[1].to_radians()),
                    max_velocity: T::lit(l.max_velocity),
                }
            })
            .collect();
        let model = RobotModel {
            links,
            tool: v3(&self.tool),
            gravity: v3(&self.gravity),
        };
        model.validate()?;
        Ok(model)
    }
}
