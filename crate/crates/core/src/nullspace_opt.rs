//! Teaching-mode posture optimization in the dynamically consistent null
//! space.
//!
//! The composite cost is `C = −w₁·s·C₁ + w₂·C₂ − w₃·a·C₃` where `C₁` is the
//! manipulability along a dominant axis (weighted by the initial-phase
//! schedule `s`), `C₂` the modified dynamic conditioning index and `C₃` the
//! local conditioning index (weighted by the singularity gate `a`).

use std::io::Write;

use nalgebra::{Matrix3, SymmetricEigen, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::robot::{dyn_consistent_projector, manipulability, JointVector, RobotModel};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizationWeights {
    pub w1: f64,
    pub w2: f64,
    pub w3: f64,
    pub mu_bar: f64,
    /// Dominant axis for the directional manipulability term.
    pub u: [f64; 3],
    /// Gate threshold on the smallest manipulability eigenvalue (m²).
    pub r_thr: f64,
    pub kp: f64,
    pub kd: f64,
    pub alpha_ns: f64,
    pub alpha_f: f64,
    pub k_d: f64,
    /// Bias in the LCI denominator.
    pub lci_eps: f64,
    /// Central-difference step for the cost gradient (rad).
    pub fd_step: f64,
    /// Duration of the initial phase in which C₁ is active (s).
    pub init_phase: f64,
    /// Linear fade-out of C₁ after the initial phase (s).
    pub anneal: f64,
    /// Norm cap on the descent torque `α_ns·∇C` (N·m).
    pub grad_limit: f64,
}

impl Default for OptimizationWeights {
    fn default() -> Self {
        Self {
            w1: 1.0,
            w2: 3.0,
            w3: 3.0,
            mu_bar: 2.0,
            u: [1.0, 0.0, 0.0],
            r_thr: DEFAULT_R_THR,
            kp: 2e5,
            kd: 1e4,
            alpha_ns: 1.0,
            alpha_f: 0.1,
            k_d: 2.0,
            lci_eps: 1e-6,
            fd_step: 1e-5,
            init_phase: 3.0,
            anneal: 1.0,
            grad_limit: 1.0,
        }
    }
}

/// 15 % of the median smallest manipulability eigenvalue of the shipped
/// model over its joint range (see [`workspace_median_r_min`]).
pub const DEFAULT_R_THR: f64 = 0.00505;

impl OptimizationWeights {
    pub fn axis<T: Real>(&self) -> Vector3<T> {
        Vector3::new(T::lit(self.u[0]), T::lit(self.u[1]), T::lit(self.u[2])).normalize()
    }

    /// Weight of C₁ at teaching time `t`.
    pub fn c1_scale(&self, t: f64) -> f64 {
        if t <= self.init_phase {
            1.0
        } else if self.anneal > 0.0 && t < self.init_phase + self.anneal {
            1.0 - (t - self.init_phase) / self.anneal
        } else {
            0.0
        }
    }
}

/// `√(uᵀ·Υ·u)`, the manipulability ellipsoid radius along `u`.
pub fn directional_manipulability<T: Real>(model: &RobotModel<T>, q: &JointVector<T>, u: &Vector3<T>) -> T {
    let ups = manipulability(&model.translational_jacobian(q));
    (u.transpose() * ups * u)[0].max(T::zero()).sqrt()
}

/// Diagonal of `Λ` sorted descending.
pub fn sorted_diagonal<T: Real>(lambda: &Matrix3<T>) -> [T; 3] {
    let mut d = [lambda[(0, 0)], lambda[(1, 1)], lambda[(2, 2)]];
    d.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    d
}

/// mDCI for a given apparent inertia.
pub fn mdci_from_lambda<T: Real>(lambda: &Matrix3<T>, mu_bar: T) -> T {
    let [d1, d2, d3] = sorted_diagonal(lambda);
    let mean = (d1 + d2) * T::lit(0.5);
    let e = Vector3::new(d1 - mean, d2 - mean, d3);
    T::lit(0.5) * mu_bar * e.norm_squared()
}

pub fn mdci<T: Real>(model: &RobotModel<T>, q: &JointVector<T>, mu_bar: T) -> Result<T> {
    Ok(mdci_from_lambda(&model.apparent_inertia(q)?, mu_bar))
}

/// `(C₃, r_min, r_max)` from the eigenvalues of `Υ`.
pub fn lci_from_manipulability<T: Real>(ups: &Matrix3<T>, eps: T) -> (T, T, T) {
    let ev = SymmetricEigen::new(*ups).eigenvalues;
    let r_min = ev.min().max(T::zero());
    let r_max = ev.max().max(T::zero());
    (r_min / (r_max + eps), r_min, r_max)
}

pub fn lci<T: Real>(model: &RobotModel<T>, q: &JointVector<T>, eps: T) -> T {
    lci_from_manipulability(&manipulability(&model.translational_jacobian(q)), eps).0
}

/// PD repulsion scale: `Kp·Δr + Kd·Δ̇r` with `Δr = r_thr − r_min` while
/// `r_min < r_thr`, never negative; zero otherwise.
pub fn singularity_gate<T: Real>(r_min: T, r_min_rate: T, r_thr: T, kp: T, kd: T) -> T {
    if r_min < r_thr {
        (kp * (r_thr - r_min) - kd * r_min_rate).max(T::zero())
    } else {
        T::zero()
    }
}

/// Gate with memory of the previous `r_min` for the rate term.
#[derive(Debug, Clone, Default)]
pub struct SingularityGate<T: Real> {
    prev: Option<T>,
}

impl<T: Real> SingularityGate<T> {
    pub fn update(&mut self, r_min: T, dt: T, weights: &OptimizationWeights) -> T {
        let rate = match self.prev {
            Some(p) if dt > T::zero() => (r_min - p) / dt,
            _ => T::zero(),
        };
        self.prev = Some(r_min);
        singularity_gate(r_min, rate, T::lit(weights.r_thr), T::lit(weights.kp), T::lit(weights.kd))
    }
}

/// Weights on C₁ and C₃ that vary during a teaching run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostPhase<T: Real> {
    pub c1_scale: T,
    pub gate: T,
}

impl<T: Real> CostPhase<T> {
    /// Only the mDCI term active.
    pub fn conditioning_only() -> Self {
        Self {
            c1_scale: T::zero(),
            gate: T::zero(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostTerms<T: Real> {
    pub cost: T,
    pub c1: T,
    pub c2: T,
    pub c3: T,
    pub r_min: T,
    pub lambda_diag: [T; 3],
}

pub fn cost_terms<T: Real>(
    model: &RobotModel<T>,
    q: &JointVector<T>,
    weights: &OptimizationWeights,
    phase: &CostPhase<T>,
) -> Result<CostTerms<T>> {
    let jv = model.translational_jacobian(q);
    let ups = manipulability(&jv);
    let u = weights.axis::<T>();
    let c1 = (u.transpose() * ups * u)[0].max(T::zero()).sqrt();
    let lambda = model.apparent_inertia(q)?;
    let c2 = mdci_from_lambda(&lambda, T::lit(weights.mu_bar));
    let (c3, r_min, _) = lci_from_manipulability(&ups, T::lit(weights.lci_eps));
    let cost = -T::lit(weights.w1) * phase.c1_scale * c1 + T::lit(weights.w2) * c2
        - T::lit(weights.w3) * phase.gate * c3;
    Ok(CostTerms {
        cost,
        c1,
        c2,
        c3,
        r_min,
        lambda_diag: sorted_diagonal(&lambda),
    })
}

/// `(C, ∇_q C)` with the gradient by central differences.
pub fn total_cost_gradient<T: Real>(
    model: &RobotModel<T>,
    q: &JointVector<T>,
    weights: &OptimizationWeights,
    phase: &CostPhase<T>,
) -> Result<(T, JointVector<T>)> {
    let h = T::lit(weights.fd_step);
    let c = cost_terms(model, q, weights, phase)?.cost;
    let mut grad = JointVector::zeros();
    for i in 0..q.len() {
        let mut qp = *q;
        let mut qm = *q;
        qp[i] += h;
        qm[i] -= h;
        let cp = cost_terms(model, &qp, weights, phase)?.cost;
        let cm = cost_terms(model, &qm, weights, phase)?.cost;
        grad[i] = (cp - cm) / (h + h);
    }
    Ok((c, grad))
}

/// Gradient of `C₃` alone (central differences).
pub fn lci_gradient<T: Real>(model: &RobotModel<T>, q: &JointVector<T>, weights: &OptimizationWeights) -> JointVector<T> {
    let h = T::lit(weights.fd_step);
    let eps = T::lit(weights.lci_eps);
    JointVector::from_fn(|i, _| {
        let mut qp = *q;
        let mut qm = *q;
        qp[i] += h;
        qm[i] -= h;
        (lci(model, &qp, eps) - lci(model, &qm, eps)) / (h + h)
    })
}

/// `τ_no = N_dyn·(−α_ns·∇C + α_f·q̇ − k_D·q̇)`; the cost gradient is
/// negated so the torque descends `C`.
pub fn nullspace_opt_torque<T: Real>(
    model: &RobotModel<T>,
    q: &JointVector<T>,
    qdot: &JointVector<T>,
    grad: &JointVector<T>,
    weights: &OptimizationWeights,
) -> Result<JointVector<T>> {
    let dc = dyn_consistent_projector(model, q)?;
    let mut descent = -grad * T::lit(weights.alpha_ns);
    let limit = T::lit(weights.grad_limit);
    let norm = descent.norm();
    if norm > limit {
        descent *= limit / norm;
    }
    let inner = descent + qdot * T::lit(weights.alpha_f - weights.k_d);
    Ok(dc.projector * inner)
}

/// Task-space complement of the gated LCI ascent,
/// `(I − N_dyn)·α_ns·w₃·a·∇C₃`: pushes the end effector away from the
/// stretched configuration while the gate is open.
pub fn singularity_barrier_torque<T: Real>(
    model: &RobotModel<T>,
    q: &JointVector<T>,
    gate: T,
    weights: &OptimizationWeights,
) -> Result<JointVector<T>> {
    if gate <= T::zero() {
        return Ok(JointVector::zeros());
    }
    let dc = dyn_consistent_projector(model, q)?;
    let g = lci_gradient(model, q, weights) * (T::lit(weights.alpha_ns * weights.w3) * gate);
    Ok(g - dc.projector * g)
}

/// Output of one optimizer evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerOutput<T: Real> {
    pub tau_no: JointVector<T>,
    pub tau_barrier: JointVector<T>,
    pub terms: CostTerms<T>,
    pub gate: T,
}

/// Stateful teaching-mode optimizer (one per control loop).
#[derive(Debug, Clone)]
pub struct NullspaceOptimizer<T: Real> {
    pub weights: OptimizationWeights,
    gate: SingularityGate<T>,
}

impl<T: Real> NullspaceOptimizer<T> {
    pub fn new(weights: OptimizationWeights) -> Self {
        Self {
            weights,
            gate: SingularityGate::default(),
        }
    }

    pub fn evaluate(
        &mut self,
        model: &RobotModel<T>,
        q: &JointVector<T>,
        qdot: &JointVector<T>,
        t: T,
        dt: T,
    ) -> Result<OptimizerOutput<T>> {
        let ups = manipulability(&model.translational_jacobian(q));
        let (_, r_min, _) = lci_from_manipulability(&ups, T::lit(self.weights.lci_eps));
        let gate = self.gate.update(r_min, dt, &self.weights);
        let phase = CostPhase {
            c1_scale: T::lit(self.weights.c1_scale(t.as_f64())),
            gate,
        };
        let (_, grad) = total_cost_gradient(model, q, &self.weights, &phase)?;
        let terms = cost_terms(model, q, &self.weights, &phase)?;
        let tau_no = nullspace_opt_torque(model, q, qdot, &grad, &self.weights)?;
        let tau_barrier = singularity_barrier_torque(model, q, gate, &self.weights)?;
        Ok(OptimizerOutput {
            tau_no,
            tau_barrier,
            terms,
            gate,
        })
    }
}

/// Null-space-only descent `q ← q − h·M⁻¹·N_dyn·∇C`.
///
/// The joint step is capped at `max_step` (rad, infinity norm) and halved
/// whenever the cost would not decrease. After each step the end-effector
/// position is restored to its initial value with a few Gauss–Newton
/// corrections, removing the second-order task drift of a finite step.
/// Returns every visited posture.
pub fn nullspace_descent<T: Real>(
    model: &RobotModel<T>,
    q0: &JointVector<T>,
    weights: &OptimizationWeights,
    phase: &CostPhase<T>,
    steps: usize,
    max_step: T,
) -> Result<Vec<JointVector<T>>> {
    let target = model.forward_kinematics(q0).position;
    let restore = |mut q: JointVector<T>| {
        for _ in 0..3 {
            let err = target - model.forward_kinematics(&q).position;
            let jv = model.translational_jacobian(&q);
            let jjt = jv * jv.transpose();
            match jjt.try_inverse() {
                Some(inv) => q += jv.transpose() * (inv * err),
                None => break,
            }
        }
        q
    };
    let mut q = *q0;
    let mut path = vec![q];
    let mut h = max_step;
    for _ in 0..steps {
        let (c, grad) = total_cost_gradient(model, &q, weights, phase)?;
        let dc = dyn_consistent_projector(model, &q)?;
        let mut dir = dc.mass_inv * dc.projector * grad;
        let amax = dir.amax();
        if amax == T::zero() {
            break;
        }
        dir /= amax;
        let mut accepted = false;
        for _ in 0..30 {
            let cand = restore(q - dir * h);
            if cost_terms(model, &cand, weights, phase)?.cost < c {
                q = cand;
                accepted = true;
                h = (h * T::lit(1.5)).min(max_step);
                break;
            }
            h *= T::lit(0.5);
        }
        if !accepted {
            break;
        }
        path.push(q);
    }
    Ok(path)
}

/// Median smallest eigenvalue of `Υ` over uniformly sampled joint
/// configurations (deterministic low-discrepancy sampling).
pub fn workspace_median_r_min(model: &RobotModel<f64>, samples: usize) -> f64 {
    let lo = model.lower_limits();
    let hi = model.upper_limits();
    // Additive recurrence with irrational steps per joint.
    let alpha: [f64; 7] = [
        0.618_033_988_749_895,
        0.414_213_562_373_095,
        0.732_050_807_568_877,
        0.236_067_977_499_790,
        0.645_751_311_064_591,
        0.316_624_790_355_400,
        0.872_983_346_207_417,
    ];
    let mut values: Vec<f64> = (1..=samples)
        .map(|k| {
            let q = JointVector::from_fn(|i, _| {
                let u = (0.5 + alpha[i] * k as f64).fract();
                lo[i] + u * (hi[i] - lo[i])
            });
            let ups = manipulability(&model.translational_jacobian(&q));
            lci_from_manipulability(&ups, 0.0).1
        })
        .collect();
    values.sort_by(f64::total_cmp);
    values[values.len() / 2]
}

/// Cost-trace CSV (t, C, C₁, C₂, C₃, r_min, a).
pub fn write_cost_trace<W: Write>(mut w: W, rows: &[(f64, CostTerms<f64>, f64)]) -> Result<()> {
    writeln!(w, "t,C,C1,C2,C3,r_min,a")?;
    for (t, c, a) in rows {
        writeln!(w, "{t},{},{},{},{},{},{a}", c.cost, c.c1, c.c2, c.c3, c.r_min)?;
    }
    Ok(())
}
